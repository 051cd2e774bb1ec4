"""Monte Carlo estimates of construction failure, lower-bound probes and grids.

Trial ``t`` of a run with master seed ``M`` uses the child seed
``child_seed(M, t)``: its key is ``sample_key(child)`` and its ``n`` ids are
16-byte values from a stream keyed by the child seed. Trials are split into
fixed-size chunks, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, Iterator, Optional, Sequence, TextIO

import numpy as np

from . import _kernels
from .construct import check_algorithm, default_max_steps
from .errors import GridError, ParameterError
from .hashing import CuckooParams, _check_seed
from .params import default_b

CONFIDENCE = 0.99
Z = NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)
CHUNK = 2048
CSV_HEADER = ("n", "k", "b", "ell", "s", "algo", "trials", "failures",
              "rate", "ci_lo", "ci_hi", "master_seed")


def wilson_interval(failures: int, trials: int, z: float = Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if not 0 <= failures <= trials:
        raise ParameterError("failures must lie in [0, trials]")
    p = failures / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


def sigma(rate_a: float, rate_b: float, trials: int) -> float:
    """Standard error at the larger of two rates (the 3 sigma convention)."""
    p = max(rate_a, rate_b)
    return math.sqrt(p * (1 - p) / trials)


def at_most_within(rate: float, other: float, trials: int, nsigma: float = 3.0) -> bool:
    """``rate <= other + nsigma * sigma``."""
    return rate <= other + nsigma * sigma(rate, other, trials)


@dataclass(frozen=True)
class FailureEstimate:
    params: CuckooParams
    algorithm: str
    trials: int
    failures: int
    master_seed: int
    rate: float = field(init=False)
    ci_lo: float = field(init=False)
    ci_hi: float = field(init=False)

    def __post_init__(self):
        lo, hi = wilson_interval(self.failures, self.trials)
        object.__setattr__(self, "rate", self.failures / self.trials)
        object.__setattr__(self, "ci_lo", lo)
        object.__setattr__(self, "ci_hi", hi)

    def csv_row(self) -> list[str]:
        p = self.params
        return [str(p.n), str(p.k), str(p.b), str(p.ell), str(p.s), self.algorithm,
                str(self.trials), str(self.failures), f"{self.rate:.6g}",
                f"{self.ci_lo:.6g}", f"{self.ci_hi:.6g}", str(self.master_seed)]


def trial_key_and_ids(master_seed: int, t: int, n: int):
    """``(child_seed, key, ids)`` of trial ``t``; mirrors the compiled trial loop."""
    from .hashing import HashKey

    child = int(_kernels.trial_seed(np.uint64(_check_seed(master_seed)), np.uint64(t)))
    key = HashKey(bytes(_kernels.expand_seed(np.uint64(child))))
    buf = _kernels.trial_ids(np.uint64(child), n) if n else np.zeros(0, np.uint8)
    raw = buf.tobytes()
    return child, key, [raw[16 * j:16 * j + 16] for j in range(n)]


def _count(args) -> int:
    master, trials, n, k, b, ell, s, code, max_steps = args
    return int(_kernels.run_trials(np.uint64(master), trials, n, k, b, ell, s, code, max_steps))


def _count_lb(args) -> tuple[int, int]:
    master, trials, n, k, b, ell, s = args
    e, f = _kernels.run_lower_bound_trials(np.uint64(master), trials, n, k, b, ell, s)
    return int(e), int(f)


def _chunks(order: np.ndarray) -> list[np.ndarray]:
    return [order[i:i + CHUNK] for i in range(0, len(order), CHUNK)]


def _map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _trial_order(trials: int, order: Optional[Sequence[int]]) -> np.ndarray:
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if order is None:
        return np.arange(trials, dtype=np.uint64)
    arr = np.asarray(order, dtype=np.int64)
    if arr.shape != (trials,) or not np.array_equal(np.sort(arr), np.arange(trials)):
        raise ParameterError("order must be a permutation of range(trials)")
    return arr.astype(np.uint64)


def estimate_failure(
    params: CuckooParams,
    algorithm: str = "bfs",
    trials: int = 1000,
    master_seed: int = 0,
    jobs: int = 1,
    order: Optional[Sequence[int]] = None,
) -> FailureEstimate:
    """Failure rate of ``algorithm`` over ``trials`` independent keys and id sets.

    ``order`` optionally permutes the execution order of trials; the result
    does not depend on it, nor on ``jobs``.
    """
    code = check_algorithm(algorithm, params)
    master = _check_seed(master_seed)
    p = params
    tasks = [(master, c, p.n, p.k, p.b, p.ell, p.s, code, default_max_steps(p.n))
             for c in _chunks(_trial_order(trials, order))]
    failures = sum(_map(_count, tasks, jobs))
    return FailureEstimate(params, algorithm, trials, failures, master)


@dataclass(frozen=True)
class LowerBoundProbe:
    """Frequency of the forced-collision event next to its exact probability."""

    params: CuckooParams
    trials: int
    events: int
    failures: int
    floor: float

    @property
    def event_rate(self) -> float:
        return self.events / self.trials

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials


def lower_bound_floor(params: CuckooParams) -> float:
    """``(k/b) ** (k*k*ell + k*s)``."""
    p = params
    return (p.k / p.b) ** (p.k * p.k * p.ell + p.k * p.s)


def probe_err_lb(params: CuckooParams, trials: int, master_seed: int = 0, jobs: int = 1) -> LowerBoundProbe:
    """Count trials where items ``1..k*ell+s`` all land on item 0's entries.

    Any such trial fails: those ``k*ell + s + 1`` items see only ``k*ell + s``
    slots. Overall failures are counted with the matching oracle.
    """
    p = params
    if p.query_overhead + 1 > p.n:
        raise ParameterError(f"need n >= k*ell + s + 1 = {p.query_overhead + 1}, got n={p.n}")
    master = _check_seed(master_seed)
    tasks = [(master, c, p.n, p.k, p.b, p.ell, p.s) for c in _chunks(_trial_order(trials, None))]
    parts = _map(_count_lb, tasks, jobs)
    events = sum(e for e, _ in parts)
    failures = sum(f for _, f in parts)
    return LowerBoundProbe(params, trials, events, failures, lower_bound_floor(params))


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------

_INT_KEYS = ("n", "k", "b", "ell", "s")


@dataclass(frozen=True)
class GridSpec:
    """Cartesian product over parameter lists, in row-major key order.

    An empty ``b`` list means the default ``b`` for each ``(n, k, ell)``.
    With ``round_b`` a listed ``b`` is rounded up to a multiple of ``k``.
    """

    n: tuple = (64,)
    k: tuple = (2, 3, 4)
    b: tuple = ()
    ell: tuple = (1,)
    s: tuple = (0, 1)
    algo: tuple = ("bfs",)
    trials: int = 1000
    seed: int = 0
    round_b: bool = True

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Read ``key = v1,v2,...`` lines; ``#`` starts a comment."""
        fields = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, value = line.partition("=")
            name = name.strip()
            if not sep or name not in cls.__dataclass_fields__:
                raise ParameterError(f"grid line {lineno}: cannot parse {raw!r}")
            items = [v.strip() for v in value.split(",") if v.strip()]
            try:
                if name in _INT_KEYS:
                    fields[name] = tuple(int(v) for v in items)
                elif name == "algo":
                    fields[name] = tuple(items)
                elif name == "round_b":
                    fields[name] = items == ["1"] or items == ["true"]
                else:
                    (single,) = items
                    fields[name] = int(single)
            except ValueError:
                raise ParameterError(f"grid line {lineno}: bad value for {name}") from None
        return cls(**fields)

    def points(self) -> Iterator[tuple]:
        bs = self.b or (None,)
        return itertools.product(self.n, self.k, bs, self.ell, self.s, self.algo)

    def rows(self) -> list[tuple[CuckooParams, str]]:
        """Validated ``(params, algorithm)`` per row; raises :class:`GridError`."""
        out = []
        for row, (n, k, b, ell, s, algo) in enumerate(self.points()):
            try:
                if b is None:
                    b = default_b(n, k, ell)
                elif self.round_b and k > 0:
                    b = max(k, -(-b // k) * k)
                params = CuckooParams(n, k, b, ell, s)
                check_algorithm(algo, params)
            except ParameterError as exc:
                raise GridError(row, str(exc)) from None
            out.append((params, algo))
        if self.trials < 1:
            raise GridError(0, "trials must be >= 1")
        return out


def run_grid(grid: GridSpec, start: int = 0, jobs: int = 1) -> Iterator[FailureEstimate]:
    """Yield one estimate per grid row from ``start`` on, in grid order."""
    rows = grid.rows()
    if not 0 <= start <= len(rows):
        raise ParameterError(f"start row {start} out of range")
    for params, algo in rows[start:]:
        yield estimate_failure(params, algo, grid.trials, grid.seed, jobs=jobs)


def write_csv(rows: Iterable[FailureEstimate], out: TextIO, header: bool = True) -> None:
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(r.csv_row())
        out.flush()


def to_csv(rows: Iterable[FailureEstimate]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
