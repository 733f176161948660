""" Length-budgeted reward and evaluation tools for reasoning segmentation.
"""
