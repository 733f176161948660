""" Utility Modules.

    Copyright (c) 2010 The PyroScope Project <pyroscope.project@gmail.com>
"""
