""" Segmentation masks and metrics.
"""
