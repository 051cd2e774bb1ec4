"""Command-line front end: ``kcuckoo <subcommand> [options]``.

Exit status is 0 on success, 1 when a construction or batch schedule failed
(the report is still printed) and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import params as prm
from .batchpir import DEFAULT_VALUE_LEN, BatchPirServer, adversarial_batch, random_database
from .construct import ALGORITHMS, construct
from .errors import CuckooError, ScheduleFailure
from .estimator import GridSpec, estimate_failure, run_grid, write_csv
from .hashing import CuckooParams, child_seed, sample_key
from .pbc import dump_buckets, load_envelope, pbc_encode, pbc_init, pbc_schedule
from .robustness import evaluate_attack, run_key
from .table import CuckooTable, dumps

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


@contextmanager
def _output(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _cuckoo_args(p: argparse.ArgumentParser, n=1024, k=4, b=2048) -> None:
    p.add_argument("--n", type=int, default=n, help="number of items (default: %(default)s)")
    p.add_argument("--k", type=int, default=k, help="number of sub-tables (default: %(default)s)")
    p.add_argument("--b", type=int, default=b, help="total entries, a multiple of k (default: %(default)s)")
    p.add_argument("--ell", type=int, default=1, help="cells per entry (default: %(default)s)")
    p.add_argument("--s", type=int, default=0, help="stash size (default: %(default)s)")


def _seed_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")


def _jobs_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jobs", type=int, default=1, help="worker processes; output does not depend on it (default: %(default)s)")


def _out_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="-", help="output file, '-' for stdout (default: %(default)s)")


def _params(a) -> CuckooParams:
    return CuckooParams(a.n, a.k, a.b, a.ell, a.s)


def _check_positive(name: str, value: int) -> None:
    if value < 1:
        raise _UsageError(f"--{name} must be >= 1")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_construct(a) -> int:
    p = _params(a)
    if not 1 <= a.value_len <= 64:
        raise _UsageError("--value-len must lie in [1, 64]")
    key = sample_key(a.seed)
    ids = [f"item-{i}".encode() for i in range(p.n)]
    result = construct(p, key, ids, a.algo, rng_seed=a.seed)
    st = result.stats
    lines = [
        f"params: n={p.n} k={p.k} b={p.b} ell={p.ell} s={p.s}",
        f"algorithm: {a.algo}",
        f"key: {key.hex()}",
        f"result: {'success' if result.success else 'failure'}",
        f"steps: {st.steps}",
        f"evictions: {st.evictions}",
        f"fallback_used: {str(st.fallback_used).lower()}",
        f"max_label: {st.max_label}",
    ]
    if not result.success:
        lines.append(f"failed_item: {result.failed_item}")
        print("\n".join(lines))
        return EXIT_FAILURE
    slots: list = [None] * p.num_slots
    for id_, r in zip(ids, result.allocation.assignment):
        slots[int(r)] = (id_, hashlib.blake2b(id_, digest_size=a.value_len).digest())
    table = CuckooTable(p, key, a.value_len, tuple(slots))
    lines.append(f"stash_occupancy: {table.stash_occupancy}")
    print("\n".join(lines))
    if a.out:
        Path(a.out).write_bytes(dumps(table))
    return EXIT_OK


def cmd_estimate(a) -> int:
    _check_positive("trials", a.trials)
    _check_positive("jobs", a.jobs)
    est = estimate_failure(_params(a), a.algo, a.trials, a.seed, jobs=a.jobs)
    with _output(a.out) as fh:
        write_csv([est], fh)
    return EXIT_OK


def cmd_grid(a) -> int:
    _check_positive("jobs", a.jobs)
    grid = GridSpec.parse(Path(a.config).read_text()) if a.config else GridSpec()
    if a.seed is not None:
        grid = replace(grid, seed=a.seed)
    if a.trials is not None:
        grid = replace(grid, trials=a.trials)
    grid.rows()  # validate every row before any output
    with _output(a.out) as fh:
        write_csv(run_grid(grid, a.start, a.jobs), fh, header=not a.no_header)
    return EXIT_OK


ATTACK_HEADER = ("n", "k", "b", "ell", "s", "budget", "runs", "found", "successes",
                 "rate", "ci_lo", "ci_hi", "master_seed")


def cmd_attack(a) -> int:
    _check_positive("runs", a.runs)
    if a.budget < 0:
        raise _UsageError("--budget must be >= 0")
    p = _params(a)
    ev = evaluate_attack(p, a.budget, a.runs, a.seed, a.algo)
    lo, hi = ev.interval
    with _output(a.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ATTACK_HEADER)
        w.writerow([p.n, p.k, p.b, p.ell, p.s, a.budget, ev.runs, ev.found, ev.successes,
                    f"{ev.rate:.6g}", f"{lo:.6g}", f"{hi:.6g}", a.seed])
    return EXIT_OK


def _pbc(a):
    return pbc_init(a.n, a.q, a.lam, a.mode, a.seed, k=a.k)


def _random_batch(rng: np.random.Generator, n: int, q: int) -> list[int]:
    return [int(x) for x in rng.choice(n, size=q, replace=False)]


PBC_HEADER = ("n", "q", "lambda", "mode", "inner", "k", "m", "N", "trials",
              "schedule_failures", "max_bucket", "load_envelope")


def cmd_pbc_bench(a) -> int:
    _check_positive("trials", a.trials)
    prms = _pbc(a)
    sizes = prms.bucket_sizes()
    if a.dump_buckets:
        db = [b""] * prms.n
        Path(a.dump_buckets).write_text(dump_buckets(pbc_encode(prms, db)))
    rng = np.random.default_rng(child_seed(a.seed, 1))
    failures = 0
    for _ in range(a.trials):
        try:
            pbc_schedule(prms, _random_batch(rng, prms.n, prms.q))
        except ScheduleFailure:
            failures += 1
    k = "" if prms.is_replication else prms.inner.params.k
    with _output(a.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PBC_HEADER)
        w.writerow([prms.n, prms.q, prms.lam, prms.mode,
                    "replication" if prms.is_replication else "cuckoo", k, prms.m, prms.N,
                    a.trials, failures, max(sizes), f"{load_envelope(prms):.6g}"])
    return EXIT_FAILURE if failures else EXIT_OK


PIR_HEADER = ("n", "q", "lambda", "mode", "trials", "schedule_failures", "upload_bits",
              "download_bits", "entry_touches", "max_bucket")


def cmd_pir_bench(a) -> int:
    _check_positive("trials", a.trials)
    _check_positive("value-len", a.value_len)
    prms = _pbc(a)
    db = random_database(prms.n, a.value_len, child_seed(a.seed, 0))
    rng = np.random.default_rng(child_seed(a.seed, 1))
    server = None if a.attack_budget is not None else BatchPirServer(prms, db)
    failures = upload = download = touches = max_bucket = 0
    for t in range(a.trials):
        if a.attack_budget is not None:
            keyed = prms.with_key(run_key(a.seed, t))
            server = BatchPirServer(keyed, db)
            Q = adversarial_batch(keyed, a.attack_budget, rng)
        else:
            Q = _random_batch(rng, prms.n, prms.q)
        max_bucket = max(max_bucket, server.buckets.max_load)
        try:
            values, cost = server.retrieve(Q, rng)
        except ScheduleFailure:
            failures += 1
            continue
        if values != [db[x] for x in Q]:
            raise CuckooError("batch answers differ from the database")
        upload += cost.upload_bits
        download += cost.download_bits
        touches += cost.server_entry_touches
    with _output(a.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PIR_HEADER)
        w.writerow([prms.n, prms.q, prms.lam, prms.mode, a.trials, failures,
                    upload, download, touches, max_bucket])
    return EXIT_FAILURE if failures else EXIT_OK


def _calibrate_formula(name, check, step, start, max_c, log) -> float:
    c = start
    while not check(c):
        c += step
        if c > max_c:
            raise CuckooError(f"{name}: no constant up to {max_c} meets the target")
    log(f"{name} = {c:g}")
    return c


def cmd_calibrate(a) -> int:
    _check_positive("jobs", a.jobs)
    ns = [int(x) for x in a.n_list.split(",")]
    exps = [int(x) for x in a.eps_exp.split(",")]
    log = lambda msg: print(msg, file=sys.stderr)  # noqa: E731
    values = prm.load_calibration(Path(a.out)) if Path(a.out).exists() else prm.load_calibration()

    def failure_ok(c: float) -> bool:
        for n in ns:
            for e in exps:
                eps = 2.0 ** -e
                k = prm.k_for_failure(n, eps, c)
                p = CuckooParams(n, k, prm.default_b(n, k))
                trials = math.ceil(a.trials_factor / eps)
                est = estimate_failure(p, "bfs", trials, a.seed, jobs=a.jobs)
                log(f"k_for_failure c={c:g} n={n} eps=2^-{e} k={k} failures={est.failures}/{trials}")
                if est.rate > eps:
                    return False
        return True

    def single_ok(c: float) -> bool:
        for n in (10, 32):
            for e in (5, 7):
                eps = 2.0 ** -e
                p = CuckooParams(n, 1, prm.b_single_hash(n, eps, c))
                trials = math.ceil(a.trials_factor * 10 / eps)
                est = estimate_failure(p, "bfs", trials, a.seed, jobs=a.jobs)
                log(f"b_single_hash c={c:g} n={n} eps=2^-{e} failures={est.failures}/{trials}")
                if est.rate > eps:
                    return False
        return True

    def load_ok(c: float) -> bool:
        for r in range(a.load_keys):
            prms = pbc_init(256, 16, 20, master_seed=child_seed(a.seed, r))
            if max(prms.bucket_sizes()) > load_envelope(prms, c):
                return False
        return True

    values["k_for_failure"] = _calibrate_formula("k_for_failure", failure_ok, 0.25, 1.0, a.max_c, log)
    values["b_single_hash"] = _calibrate_formula("b_single_hash", single_ok, 0.25, 1.0, a.max_c, log)
    values["pbc_load"] = _calibrate_formula("pbc_load", load_ok, 0.25, 1.0, a.max_c, log)
    values.setdefault("k_robust", 1.0)
    prm.write_calibration(values, Path(a.out))
    print(Path(a.out).read_text(), end="")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kcuckoo", description="Cuckoo hashing experiments, batch codes and batch PIR.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    algos = sorted(ALGORITHMS)

    p = sub.add_parser("construct", help="allocate ids item-0..item-{n-1} and report the outcome")
    _cuckoo_args(p, n=16, k=4, b=32)
    p.add_argument("--algo", choices=algos, default="bfs", help="construction algorithm (default: %(default)s)")
    _seed_arg(p)
    p.add_argument("--value-len", type=int, default=8, help="value bytes per item (default: %(default)s)")
    p.add_argument("--out", default=None, help="write the serialized table here (default: none)")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("estimate", help="Monte Carlo failure rate of one configuration")
    _cuckoo_args(p)
    p.add_argument("--algo", choices=algos, default="bfs", help="construction algorithm (default: %(default)s)")
    p.add_argument("--trials", type=int, default=1000, help="independent trials (default: %(default)s)")
    _seed_arg(p)
    _jobs_arg(p)
    _out_arg(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("grid", help="failure rates over a cartesian parameter grid")
    p.add_argument("--config", default=None, help="grid file of 'key = v1,v2' lines (default: built-in grid)")
    p.add_argument("--seed", type=int, default=None, help="override the grid's seed (default: from config, else 0)")
    p.add_argument("--trials", type=int, default=None, help="override the grid's trials (default: from config, else 1000)")
    p.add_argument("--start", type=int, default=0, help="first row to run, for resuming (default: %(default)s)")
    p.add_argument("--no-header", action="store_true", help="omit the CSV header (default: off)")
    _jobs_arg(p)
    _out_arg(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("attack", help="first-half adversary success rate over independent keys")
    _cuckoo_args(p, n=16, k=2, b=32)
    p.add_argument("--budget", type=int, default=100000, help="hash evaluations per run (default: %(default)s)")
    p.add_argument("--runs", type=int, default=100, help="independent keys (default: %(default)s)")
    p.add_argument("--algo", choices=algos, default="bfs", help="algorithm used to confirm failure (default: %(default)s)")
    _seed_arg(p)
    _out_arg(p)
    p.set_defaults(func=cmd_attack)

    for name, func, help_ in (
        ("pbc-bench", cmd_pbc_bench, "schedule failures of random batches"),
        ("pir-bench", cmd_pir_bench, "batch PIR correctness and costs"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--n", type=int, default=256, help="database size (default: %(default)s)")
        p.add_argument("--q", type=int, default=16, help="batch size (default: %(default)s)")
        p.add_argument("--lambda", dest="lam", type=int, default=20, help="target error 2^-lambda (default: %(default)s)")
        p.add_argument("--mode", choices=("standard", "robust"), default="standard", help="parameter choice (default: %(default)s)")
        p.add_argument("--k", type=int, default=None, help="override the number of sub-tables (default: from formula)")
        p.add_argument("--trials", type=int, default=1000, help="random batches (default: %(default)s)")
        _seed_arg(p)
        _out_arg(p)
        if name == "pbc-bench":
            p.add_argument("--dump-buckets", default=None, help="write bucket indices here (default: none)")
        else:
            p.add_argument("--value-len", type=int, default=DEFAULT_VALUE_LEN, help="bytes per entry (default: %(default)s)")
            p.add_argument("--attack-budget", type=int, default=None,
                           help="let the first-half attacker pick each batch against a fresh key (default: off)")
        p.set_defaults(func=func)

    p = sub.add_parser("calibrate", help="raise formula constants until measured failure meets the target")
    p.add_argument("--n-list", default="1024,4096", help="item counts (default: %(default)s)")
    p.add_argument("--eps-exp", default="10,13", help="target exponents e for eps = 2^-e (default: %(default)s)")
    p.add_argument("--trials-factor", type=float, default=3.0, help="trials = ceil(factor / eps) (default: %(default)s)")
    p.add_argument("--load-keys", type=int, default=100, help="keys for the bucket-load check (default: %(default)s)")
    p.add_argument("--max-c", type=float, default=8.0, help="give up above this constant (default: %(default)s)")
    _seed_arg(p)
    _jobs_arg(p)
    p.add_argument("--out", default=str(prm.CALIBRATION_FILE), help="calibration file (default: the packaged one)")
    p.set_defaults(func=cmd_calibrate)
    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (_UsageError, CuckooError, ValueError, OSError) as exc:
        print(f"kcuckoo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())
