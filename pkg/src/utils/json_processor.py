import math
from pathlib import Path
from typing import Any

import numpy as np


def replace_inf_values(obj: Any) -> Any:
    """
    Make nested config/metric structures safe for YAML and JSON text:
    infinities become strings, numpy scalars become Python numbers, tuples
    become lists and paths become strings.
    """
    if isinstance(obj, dict):
        return {k: replace_inf_values(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [replace_inf_values(v) for v in obj]
    elif isinstance(obj, np.generic):
        return replace_inf_values(obj.item())
    elif isinstance(obj, Path):
        return str(obj)
    elif isinstance(obj, float) and math.isinf(obj):
        return "Infinity" if obj > 0 else "-Infinity"
    return obj


def restore_inf_values(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: restore_inf_values(v) for k, v in obj.items()}
    elif isinstance(obj, list):
        return [restore_inf_values(v) for v in obj]
    elif obj == "Infinity":
        return math.inf
    elif obj == "-Infinity":
        return -math.inf
    return obj
