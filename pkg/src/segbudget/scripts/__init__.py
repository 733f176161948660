""" Command line scripts.
"""
