""" Benchmark annotation: difficulty scores, reference chains, reasoning scores.
"""
