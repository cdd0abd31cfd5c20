"""Benchmark harness: operation counts and wall-clock sweeps, CSV in and out.

Four experiment shapes compare the aggregate scheme against the per-board
baseline: (1) full encryption flow over growing cluster sizes, (2) a
mixed-family cluster, (3) growing payloads at fixed cluster size with the
seal phase isolated, and (4) key encryption alone over growing cluster
sizes.  Operation counts are exact assertions; timing claims are always
slope ratios or medians, never absolute numbers, and op counts double as
the energy proxy since desk-scale runs cannot meter power.

All scaffolding (parameter setup, key generation, board enrollment) happens
outside the timed region; timing runs are single-threaded.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy

from agencid import ieid, kac
from agencid.errors import InsufficientDataError, PlanError
from agencid.hybrid import derive_key, encapsulate, seal
from agencid.pairing.base import PairingEngine, make_rng

__all__ = [
    "CSV_COLUMNS",
    "BenchReport",
    "ExperimentPlan",
    "TrialRecord",
    "default_plan",
    "fit_and_assert",
    "read_csv",
    "run_experiment",
    "write_csv",
    "write_plots",
]

SCHEME_AGGREGATE = "agencid"
SCHEME_BASELINE = "ieid"

CSV_COLUMNS = [
    "experiment",
    "scheme",
    "scenario",
    "n",
    "m",
    "payload_bytes",
    "pairings",
    "group_adds",
    "scalar_muls",
    "seals",
    "wraps",
    "wall_ns",
]

# Timing assertions need at least this many repetitions per cell.
MIN_TIMING_REPS = 5
# Slope-shape fits need at least this many sweep points.
MIN_FIT_POINTS = 5

_DEFAULT_PAYLOAD = 4096


@dataclass(frozen=True)
class ExperimentPlan:
    experiment: int
    sizes: Tuple[int, ...]
    payload_sizes: Tuple[int, ...]
    family_sizes: Tuple[int, ...] = ()
    repetitions: int = MIN_TIMING_REPS
    warmup: int = 1
    schemes: Tuple[str, ...] = (SCHEME_AGGREGATE, SCHEME_BASELINE)
    seed: int = 2024

    def __post_init__(self) -> None:
        if self.experiment not in (1, 2, 3, 4):
            raise PlanError(f"unknown experiment {self.experiment}")
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise PlanError("sizes must be positive cluster sizes")
        if not self.payload_sizes or any(b < 0 for b in self.payload_sizes):
            raise PlanError("payload sizes must be nonnegative")
        if self.repetitions < 1 or self.warmup < 0:
            raise PlanError("repetitions must be >= 1 and warmup >= 0")
        unknown = set(self.schemes) - {SCHEME_AGGREGATE, SCHEME_BASELINE}
        if unknown:
            raise PlanError(f"unknown schemes {sorted(unknown)}")
        if self.experiment == 2:
            if not self.family_sizes or any(f < 1 for f in self.family_sizes):
                raise PlanError("experiment 2 needs a family partition")
            if sum(self.family_sizes) != self.sizes[0] or len(self.sizes) != 1:
                raise PlanError("experiment 2: families must partition the single size")
        if self.experiment in (1, 2, 4) and len(self.payload_sizes) != 1:
            raise PlanError("only experiment 3 sweeps payload sizes")
        if self.experiment in (2, 3) and len(self.sizes) != 1:
            raise PlanError("experiments 2 and 3 use a single cluster size")


@dataclass(frozen=True)
class TrialRecord:
    experiment: int
    scheme: str
    scenario: int
    n: int
    m: int
    payload_bytes: int
    pairings: int
    group_adds: int
    scalar_muls: int
    seals: int
    wraps: int
    wall_ns: int

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.type == "int" and getattr(self, f.name) < 0 and f.name != "experiment":
                raise ValueError(f"{f.name} must be nonnegative")


def default_plan(experiment: int, repetitions: int = MIN_TIMING_REPS, seed: int = 2024) -> ExperimentPlan:
    """Desk-scale analogs: 20-board sweep, 10-board 3/3/4 split, 5-board payload sweep."""
    if experiment == 1:
        return ExperimentPlan(1, tuple(range(1, 21)), (_DEFAULT_PAYLOAD,), repetitions=repetitions, seed=seed)
    if experiment == 2:
        return ExperimentPlan(2, (10,), (_DEFAULT_PAYLOAD,), family_sizes=(3, 3, 4), repetitions=repetitions, seed=seed)
    if experiment == 3:
        return ExperimentPlan(3, (5,), (1024, 65536, 1048576), repetitions=repetitions, seed=seed)
    if experiment == 4:
        return ExperimentPlan(4, tuple(range(1, 21)), (0,), repetitions=repetitions, seed=seed)
    raise PlanError(f"unknown experiment {experiment}")


# -- runners ---------------------------------------------------------------


def run_experiment(engine: PairingEngine, plan: ExperimentPlan) -> List[TrialRecord]:
    """Execute the plan; exactly |sizes| x |payloads| x |schemes| x reps rows."""
    runner = {1: _run_flow, 2: _run_families, 3: _run_payloads, 4: _run_key_only}[
        plan.experiment
    ]
    return runner(engine, plan)


def _timed(engine, fn) -> Tuple[int, Dict[str, int]]:
    before = engine.counters.snapshot()
    t0 = time.perf_counter_ns()
    fn()
    wall = time.perf_counter_ns() - t0
    delta = engine.counters.delta(before)
    return wall, {
        "pairings": delta.pairings,
        "group_adds": delta.group_adds,
        "scalar_muls": delta.scalar_muls,
        "seals": delta.seals,
        "wraps": delta.wraps,
    }


def _reps(plan: ExperimentPlan, engine, fn, record) -> List[TrialRecord]:
    rows = []
    for rep in range(plan.warmup + plan.repetitions):
        wall, ops = _timed(engine, fn)
        if rep >= plan.warmup:
            rows.append(record(wall, ops))
    return rows


def _scaffold(engine, plan: ExperimentPlan, n: int, rng):
    params = kac.setup(engine, n, rng)
    pk, _msk, _boards = kac.keygen(engine, params, rng)
    cluster = tuple(range(1, n + 1))
    agg = kac.extract(engine, params, cluster)
    keypairs = ieid.ieid_keygen(engine, cluster, rng)
    publics = {kp.index: kp.public for kp in keypairs}
    return pk, cluster, agg, publics


def _make_record(plan, scheme, scenario, n, m, payload_bytes):
    def record(wall, ops):
        return TrialRecord(
            experiment=plan.experiment,
            scheme=scheme,
            scenario=scenario,
            n=n,
            m=m,
            payload_bytes=payload_bytes,
            wall_ns=wall,
            **ops,
        )

    return record


def _run_flow(engine, plan: ExperimentPlan) -> List[TrialRecord]:
    """Experiment 1: key encapsulation plus payload seal, per cluster size."""
    rng = make_rng(plan.seed)
    payload = rng.randbytes(plan.payload_sizes[0])
    rows: List[TrialRecord] = []
    for n in plan.sizes:
        pk, cluster, agg, publics = _scaffold(engine, plan, n, rng)
        context = b"bench:flow:%d" % n
        for scheme in plan.schemes:
            if scheme == SCHEME_AGGREGATE:
                def flow():
                    secret, _ct = encapsulate(engine, pk, cluster, agg, rng)
                    key = derive_key(engine, secret, context)
                    seal(key, payload, context, rng, counters=engine.counters)
            else:
                def flow():
                    ieid.ieid_encrypt_all(engine, publics, payload, context, context, rng)
            rows.extend(
                _reps(plan, engine, flow, _make_record(plan, scheme, 1, n, 1, len(payload)))
            )
    return rows


def _run_families(engine, plan: ExperimentPlan) -> List[TrialRecord]:
    """Experiment 2: one cluster, m family groups, one payload per family."""
    rng = make_rng(plan.seed)
    payload = rng.randbytes(plan.payload_sizes[0])
    n = plan.sizes[0]
    m = len(plan.family_sizes)
    pk, cluster, agg, publics = _scaffold(engine, plan, n, rng)
    rows: List[TrialRecord] = []
    for scheme in plan.schemes:
        if scheme == SCHEME_AGGREGATE:
            def flow():
                secret, _ct = encapsulate(engine, pk, cluster, agg, rng)
                for fam in range(m):
                    context = b"bench:family:%d" % fam
                    key = derive_key(engine, secret, context)
                    seal(key, payload, context, rng, counters=engine.counters)
        else:
            def flow():
                ieid.ieid_encrypt_all(engine, publics, payload, b"bench:family", b"", rng)
        rows.extend(
            _reps(plan, engine, flow, _make_record(plan, scheme, 2, n, m, len(payload)))
        )
    return rows


def _run_payloads(engine, plan: ExperimentPlan) -> List[TrialRecord]:
    """Experiment 3: seal phase only; encapsulation prepared outside timing."""
    rng = make_rng(plan.seed)
    n = plan.sizes[0]
    pk, cluster, agg, publics = _scaffold(engine, plan, n, rng)
    context = b"bench:payload"
    rows: List[TrialRecord] = []
    for size in plan.payload_sizes:
        payload = rng.randbytes(size)
        for scheme in plan.schemes:
            if scheme == SCHEME_AGGREGATE:
                secret, _ct = encapsulate(engine, pk, cluster, agg, rng)
                key = derive_key(engine, secret, context)

                def flow():
                    seal(key, payload, context, rng, counters=engine.counters)
            else:
                keys = []
                for i in sorted(publics):
                    secret_i, _w = ieid.wrap_key(engine, publics[i], i, rng)
                    keys.append(derive_key(engine, secret_i, context + i.to_bytes(4, "big")))

                def flow():
                    for key_i in keys:
                        seal(key_i, payload, context, rng, counters=engine.counters)
            rows.extend(
                _reps(plan, engine, flow, _make_record(plan, scheme, 1, n, 1, size))
            )
    return rows


def _run_key_only(engine, plan: ExperimentPlan) -> List[TrialRecord]:
    """Experiment 4: key encryption alone; no payload work at all."""
    rng = make_rng(plan.seed)
    rows: List[TrialRecord] = []
    for n in plan.sizes:
        pk, cluster, agg, publics = _scaffold(engine, plan, n, rng)
        for scheme in plan.schemes:
            if scheme == SCHEME_AGGREGATE:
                def flow():
                    encapsulate(engine, pk, cluster, agg, rng)
            else:
                def flow():
                    for i in sorted(publics):
                        ieid.wrap_key(engine, publics[i], i, rng)
            rows.extend(
                _reps(plan, engine, flow, _make_record(plan, scheme, 1, n, 1, 0))
            )
    return rows


# -- CSV -------------------------------------------------------------------


def write_csv(path, records: Iterable[TrialRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow(asdict(rec))


def read_csv(path) -> List[TrialRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise PlanError(f"unexpected CSV columns {reader.fieldnames}")
        return [
            TrialRecord(
                **{k: (row[k] if k == "scheme" else int(row[k])) for k in CSV_COLUMNS}
            )
            for row in reader
        ]


# -- analysis --------------------------------------------------------------


@dataclass
class BenchReport:
    lines: List[str]
    failures: List[str]

    @property
    def ok(self) -> bool:
        return not self.failures

    def __str__(self) -> str:
        return "\n".join(self.lines)


def _medians(records: Sequence[TrialRecord], key) -> Dict:
    cells: Dict = {}
    for rec in records:
        cells.setdefault(key(rec), []).append(rec.wall_ns)
    return {k: statistics.median(v) for k, v in cells.items()}


def _check(report: BenchReport, label: str, ok: bool, detail: str = "") -> None:
    line = f"  {label}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    report.lines.append(line)
    if not ok:
        report.failures.append(label)


def _count_reps(records: Sequence[TrialRecord]) -> int:
    cells: Dict = {}
    for rec in records:
        k = (rec.scheme, rec.n, rec.payload_bytes)
        cells[k] = cells.get(k, 0) + 1
    return min(cells.values())


def fit_and_assert(records: Sequence[TrialRecord]) -> BenchReport:
    """Exact count checks plus slope-shape fits, per experiment present."""
    if not records:
        raise InsufficientDataError("no records to analyze")
    report = BenchReport(
        lines=[
            "benchmark report",
            "  note: operation counts stand in for energy at desk scale;",
            "  timing claims are slope ratios and medians, never absolute times.",
        ],
        failures=[],
    )
    by_exp: Dict[int, List[TrialRecord]] = {}
    for rec in records:
        by_exp.setdefault(rec.experiment, []).append(rec)
    for exp in sorted(by_exp):
        report.lines.append(f"experiment {exp}:")
        {1: _assert_flow, 2: _assert_families, 3: _assert_payloads, 4: _assert_key_only}[
            exp
        ](report, by_exp[exp])
    return report


def _split(records):
    agg = [r for r in records if r.scheme == SCHEME_AGGREGATE]
    base = [r for r in records if r.scheme == SCHEME_BASELINE]
    return agg, base


def _assert_flow(report, records) -> None:
    agg, base = _split(records)
    _check(
        report,
        "aggregate scheme: 1 seal, 1 wrap, 0 pairings at every size",
        all(r.seals == 1 and r.wraps == 1 and r.pairings == 0 for r in agg),
    )
    _check(
        report,
        "baseline scheme: n seals and n wraps at every size",
        all(r.seals == r.n and r.wraps == r.n for r in base),
    )


def _assert_families(report, records) -> None:
    agg, base = _split(records)
    _check(
        report,
        "aggregate scheme: m seals, 1 key encryption",
        all(r.seals == r.m and r.wraps == 1 for r in agg),
    )
    _check(
        report,
        "baseline scheme: n seals, n key encryptions",
        all(r.seals == r.n and r.wraps == r.n for r in base),
    )


def _assert_payloads(report, records) -> None:
    agg, base = _split(records)
    if not agg or not base:
        raise InsufficientDataError("experiment 3 needs both schemes")
    n = base[0].n
    _check(
        report,
        f"sealed bytes ratio = {n} at every payload size",
        all(r.seals == n for r in base) and all(r.seals == 1 for r in agg),
    )
    if _count_reps(records) < MIN_TIMING_REPS:
        raise InsufficientDataError(
            f"timing assertion needs >= {MIN_TIMING_REPS} repetitions"
        )
    top = max(r.payload_bytes for r in records)
    med_agg = _medians([r for r in agg if r.payload_bytes == top], lambda r: r.payload_bytes)[top]
    med_base = _medians([r for r in base if r.payload_bytes == top], lambda r: r.payload_bytes)[top]
    ratio = med_base / med_agg if med_agg else float("inf")
    _check(
        report,
        f"baseline seal time >= 4x aggregate at {top} bytes",
        ratio >= 4.0,
        f"ratio {ratio:.2f}",
    )


def _assert_key_only(report, records) -> None:
    agg, base = _split(records)
    _check(
        report,
        "aggregate key encryption count constant at 1",
        all(r.wraps == 1 and r.pairings == 0 for r in agg),
    )
    _check(
        report,
        "baseline key encryption count equals n",
        all(r.wraps == r.n for r in base),
    )
    sizes = sorted({r.n for r in base})
    if len(sizes) < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"slope fit needs >= {MIN_FIT_POINTS} sweep points, have {len(sizes)}"
        )
    if _count_reps(records) < MIN_TIMING_REPS:
        raise InsufficientDataError(
            f"timing assertion needs >= {MIN_TIMING_REPS} repetitions"
        )
    med_agg = _medians(agg, lambda r: r.n)
    med_base = _medians(base, lambda r: r.n)
    xs = numpy.array(sizes, dtype=float)
    ya = numpy.array([med_agg[n] for n in sizes])
    yb = numpy.array([med_base[n] for n in sizes])
    slope_a = numpy.polyfit(xs, ya, 1)[0]
    slope_b, intercept_b = numpy.polyfit(xs, yb, 1)
    # Weight the baseline fit by its op count (wraps == n), which is the
    # model the linearity claim is actually about.
    fitted = slope_b * xs + intercept_b
    ss_res = float(numpy.sum((yb - fitted) ** 2))
    ss_tot = float(numpy.sum((yb - yb.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot else 0.0
    _check(report, "baseline slope positive", slope_b > 0, f"{slope_b:.1f} ns/board")
    _check(report, "baseline linear fit R^2 >= 0.9", r2 >= 0.9, f"R^2 {r2:.4f}")
    _check(
        report,
        "aggregate slope < 10% of baseline slope",
        abs(slope_a) < 0.10 * slope_b,
        f"|{slope_a:.1f}| vs {slope_b:.1f} ns/board",
    )


# -- plots (optional) ------------------------------------------------------


def write_plots(records: Sequence[TrialRecord], outdir) -> List[Path]:
    """Median wall time per sweep point, one file per experiment present."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise PlanError("plotting needs matplotlib (install the plots extra)") from exc
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    by_exp: Dict[int, List[TrialRecord]] = {}
    for rec in records:
        by_exp.setdefault(rec.experiment, []).append(rec)
    written = []
    for exp, recs in sorted(by_exp.items()):
        x_of = (lambda r: r.payload_bytes) if exp == 3 else (lambda r: r.n)
        xlabel = "payload bytes" if exp == 3 else "boards"
        fig, ax = plt.subplots()
        for scheme in (SCHEME_AGGREGATE, SCHEME_BASELINE):
            med = _medians([r for r in recs if r.scheme == scheme], x_of)
            if not med:
                continue
            xs = sorted(med)
            ax.plot(xs, [med[x] / 1e6 for x in xs], marker="o", label=scheme)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("median wall time (ms)")
        ax.set_title(f"experiment {exp}")
        ax.legend()
        if exp == 3:
            ax.set_xscale("log")
        path = outdir / f"experiment{exp}.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written
