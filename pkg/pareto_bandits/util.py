import json
import hashlib
import traceback

import numpy as np

TIE_TOLERANCE = 1e-12
"""Absolute tolerance under which two scores, gaps or rates count as tied."""


class NumericalError(RuntimeError):
    """Raised when a numerical state is found corrupted (non-PD Gram matrix, broken simplex, bad registry)."""


def format_exception(exception):
    """Return the full traceback of an exception as text."""
    return "".join(traceback.format_exception(None, exception, exception.__traceback__))


def argmax_first(values, atol=TIE_TOLERANCE):
    """Index of the maximum of values, ties (within atol) broken by the lowest index."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("argmax of an empty sequence")

    best = values.max()
    return int(np.flatnonzero(values >= best - atol)[0])


def config_hash(config: dict) -> str:
    """Short, stable hash of a json-serializable configuration."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]
