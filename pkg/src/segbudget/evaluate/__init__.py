""" Difficulty-stratified evaluation of reasoning segmentation models.
"""
