import math
from typing import Any

import numpy as np
from pydantic import BaseModel

from chsim.constants import SIGNIFICANT_DIGITS


def validated_update[M: BaseModel](model: M, data: dict[str, Any]) -> M:
    return model.__class__.model_validate({**model.model_dump(), **data})


def round_significant(value: float) -> float:
    rounded = float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return 0.0 if rounded == 0.0 else rounded


def canonical(value: Any) -> Any:
    """Plain JSON data with floats rounded to a fixed number of significant digits."""
    if isinstance(value, dict):
        return {str(canonical(k)): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if isinstance(value, np.ndarray):
        return canonical(value.tolist())
    if isinstance(value, str):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return str(float(value))
        return round_significant(float(value))
    if isinstance(value, complex):
        return [round_significant(value.real), round_significant(value.imag)]
    return value
