"""JSON encoding of complex matrices: each entry is a [re, im] pair."""

import numpy as np

from .errors import ValidationError


def matrix_to_json(mat) -> list:
    arr = np.asarray(mat, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in arr]


def matrix_from_json(data) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix data: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValidationError(
            f"matrix entries must be [re, im] pairs, got array of shape {arr.shape}"
        )
    return arr[..., 0] + 1j * arr[..., 1]
