""" Python Utility Functions.
"""


import enum
import json
import logging


def get_class_logger(obj):
    """Get a logger specific for the given object's class."""
    return logging.getLogger(obj.__class__.__module__ + "." + obj.__class__.__name__)


class JSONEncoder(json.JSONEncoder):
    """JSON encoder for the toolkit's records.

    Handles sets, enums, objects with an ``as_dict`` method, and numpy
    scalars and arrays.
    """

    def default(self, o):
        """Support more object types."""
        if isinstance(o, set):
            return list(sorted(o))
        if isinstance(o, enum.Enum):
            return o.value
        if hasattr(o, "as_dict"):
            return o.as_dict()
        if hasattr(o, "tolist"):
            # numpy scalars and arrays
            return o.tolist()
        return super().default(o)
