"""Parameter selection with explicit calibration constants.

The underlying results are asymptotic, so each formula takes a constant
``c``. Calibrated values live in ``calibration.txt`` next to this module as
``formula_name = c_value`` lines.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

from .errors import ParameterError
from .hashing import CuckooParams

CALIBRATION_FILE = Path(__file__).with_name("calibration.txt")
FORMULAS = ("k_for_failure", "k_robust", "b_single_hash", "pbc_load")
MIN_K = 4
_ULPS = 1e-14


def _ceil(x: float) -> int:
    # absorb a few ulps of noise such as 40.000000000000004 before rounding up
    r = round(x)
    return int(r) if math.isclose(x, r, rel_tol=_ULPS, abs_tol=_ULPS) else math.ceil(x)


def _check_eps(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")


def _check_c(c: float) -> None:
    if not c > 0:
        raise ParameterError(f"calibration constant must be positive, got {c}")


def load_calibration(path: Optional[Path] = None) -> dict[str, float]:
    values = {name: 1.0 for name in FORMULAS}
    path = CALIBRATION_FILE if path is None else Path(path)
    if not path.exists():
        return values
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise ParameterError(f"{path}:{lineno}: expected 'name = value'")
        try:
            values[name.strip()] = float(value)
        except ValueError:
            raise ParameterError(f"{path}:{lineno}: bad value {value.strip()!r}") from None
    return values


def write_calibration(values: dict[str, float], path: Optional[Path] = None) -> Path:
    path = CALIBRATION_FILE if path is None else Path(path)
    lines = [f"{name} = {values[name]:g}" for name in sorted(values)]
    path.write_text("\n".join(lines) + "\n")
    return path


def calibrated(name: str) -> float:
    return load_calibration()[name]


def k_for_failure(n: int, epsilon: float, c: float = 1.0) -> int:
    """Sub-table count for construction failure at most ``epsilon`` (ell=1, s=0, b=O(n))."""
    _check_eps(epsilon)
    _check_c(c)
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    k = _ceil(c * (1 + math.sqrt(math.log2(1 / epsilon) / math.log2(n))))
    return max(MIN_K, k)


def k_robust(Q: float, epsilon: float, c: float = 1.0) -> int:
    """Sub-table count for robustness against ``Q`` hash evaluations."""
    _check_eps(epsilon)
    _check_c(c)
    if Q < 1:
        raise ParameterError(f"Q must be >= 1, got {Q}")
    return _ceil(c * math.log2(Q / epsilon)) + 4


def b_single_hash(n: int, epsilon: float, c: float = 1.0) -> int:
    """Entry count for a single hash function (k = ell = 1, s = 0)."""
    _check_eps(epsilon)
    _check_c(c)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return _ceil(c * n * n / epsilon)


def overhead_lower_bound(n: int, epsilon: float, ell: int = 1, s: int = 0) -> int:
    """Smallest ``k >= 1`` with ``k*k*ell + k*s >= log(1/epsilon) / log(n)``."""
    _check_eps(epsilon)
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if ell < 1 or s < 0:
        raise ParameterError("need ell >= 1 and s >= 0")
    bound = math.log2(1 / epsilon) / math.log2(n)
    k = 1
    while k * k * ell + k * s < bound and not math.isclose(k * k * ell + k * s, bound, rel_tol=_ULPS):
        k += 1
    return k


def round_up(x: int, multiple: int) -> int:
    if multiple < 1:
        raise ParameterError(f"cannot round to a multiple of {multiple}")
    return -(-x // multiple) * multiple


def default_b(n: int, k: int, ell: int = 1) -> int:
    """``2n`` entries (``2n/ell`` for larger entries), rounded up to a multiple of ``k``."""
    base = 2 * n if ell == 1 else -(-2 * n // ell)
    return max(k, round_up(base, k))


def choose_params(n: int, epsilon: float, c: Optional[float] = None) -> CuckooParams:
    """``CH(k, b, 1, 0)`` with ``k`` from :func:`k_for_failure` and default ``b``."""
    if c is None:
        c = calibrated("k_for_failure")
    k = k_for_failure(n, epsilon, c)
    return CuckooParams(n, k, default_b(n, k))
