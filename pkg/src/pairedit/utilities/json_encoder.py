"""Implementation of custom JSON encoder."""
import dataclasses
import json
from enum import Enum
from typing import Any

import numpy as np


class JSONEncoder(json.JSONEncoder):
    """JSON Encoder class for dataclasses, enums and numpy values."""

    def default(self, obj) -> Any:
        """Encode object default method.

        Parameters
        ----------
        obj
            Object to encode

        Returns
        -------
            JSON encodable object
        """
        if bool(dataclasses.is_dataclass(obj)) and not isinstance(obj, type):
            return dataclasses.asdict(obj)
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        return super().default(obj)
