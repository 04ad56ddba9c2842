"""Runtime configuration knobs.

The only global knob is the total-dimension cap guarding against
accidentally huge dense computations.  It can be overridden with the
``EXTENDICAP_DIM_CAP`` environment variable.
"""

import os

DEFAULT_DIM_CAP = 512


def dim_cap() -> int:
    """Current total-dimension cap (env override wins)."""
    raw = os.environ.get("EXTENDICAP_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"EXTENDICAP_DIM_CAP must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"EXTENDICAP_DIM_CAP must be positive, got {value}")
    return value


def check_dim(total_dim: int, what: str = "operator") -> None:
    """Raise if ``total_dim`` exceeds the configured cap."""
    from .errors import DimensionCapError

    cap = dim_cap()
    if total_dim > cap:
        raise DimensionCapError(
            f"{what} dimension {total_dim} exceeds cap {cap} "
            f"(set EXTENDICAP_DIM_CAP to override)"
        )
