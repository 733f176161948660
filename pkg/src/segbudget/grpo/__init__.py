""" Group-relative policy optimization on a toy length-choice task.
"""
