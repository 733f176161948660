""" Reward computation: confidence, answer parsing and the length-aware reward.
"""
