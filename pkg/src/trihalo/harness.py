"""Validation experiments: unit oracle, convergence studies, benchmarks.

The unit oracle feeds degree-one data through every face configuration and
compares each scheme against the per-axis tensor-product result, which is
exact on such data wherever the face supplies two source levels per axis.
Convergence studies sample a smooth field, shrink h with the 3:1 ratio
fixed, and fit the error slope in log-log space. Benchmarks time repeated
applications with every array allocated up front.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import csr, geometry, linear, schemes, taylor
from .errors import ConfigurationError, ContractViolationError
from .geometry import AXES, SIDES, FaceConfig, HaloBuffer, RegionShape
from .schemes import MATRIX_SCHEMES, SCHEMES, HaloExchange

FieldFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

PLATEAU_THRESHOLD = 1e-7

CONVERGENCE_CSV_COLUMNS = ("scheme", "role", "p", "k", "h", "err_max", "err_l2", "plateau")
BENCH_CSV_COLUMNS = ("scheme", "role", "p", "k", "u", "reps", "mean_ns", "total_ns", "phase")


FIELD_PHASE = 0.6


def default_field(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Smooth test field with non-vanishing derivatives along every axis.

    The constant phase keeps every derivative of the field away from zero at
    the face anchor point; the sampled region contracts onto that point as h
    shrinks, so a vanishing derivative there would distort the fitted order.
    """
    return np.sin(x + 0.5 * y + 0.25 * z + FIELD_PHASE)


def affine_field(a0: float, ax: float, ay: float, az: float) -> FieldFn:
    def f(x, y, z):
        return a0 + ax * x + ay * y + az * z

    return f


def sample_field(
    region: RegionShape,
    f: FieldFn,
    u: int,
    h: float = 1.0,
    channel_phase: float = 0.0,
) -> HaloBuffer:
    """Evaluate f at every cell centre; channel c sees x shifted by c*channel_phase."""
    centres = region.centres(h)
    vals = np.empty((region.cell_count, u))
    for c in range(u):
        vals[:, c] = f(centres[:, 0] + c * channel_phase, centres[:, 1], centres[:, 2])
    if vals.size and not np.isfinite(vals).all():
        raise ContractViolationError("field produced non-finite samples")
    return HaloBuffer(region, u, vals.reshape(-1))


def _expected_values(
    region: RegionShape, f: FieldFn, u: int, h: float, channel_phase: float
) -> np.ndarray:
    return sample_field(region, f, u, h, channel_phase).values


# ---------------------------------------------------------------------------
# Convergence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergencePoint:
    h: float
    err_max: float
    err_l2: float
    plateau: bool
    condition_estimate: float


@dataclass
class ConvergenceReport:
    scheme: str
    role: str
    p: int
    k: int
    points: list[ConvergencePoint]
    fitted_order_max: float
    fitted_order_l2: float
    fit_reliable: bool
    condition_warnings: list[str] = field(default_factory=list)


def _fit_order(hs: np.ndarray, errs: np.ndarray, threshold: float) -> tuple[float, bool]:
    keep = errs > threshold
    if keep.sum() < 3:
        return float("nan"), False
    slope = np.polyfit(np.log(hs[keep]), np.log(errs[keep]), 1)[0]
    return float(slope), True


def run_convergence(
    scheme: str,
    role: str,
    cfg: FaceConfig,
    h_list: Sequence[float],
    f: FieldFn | None = None,
    plateau_threshold: float = PLATEAU_THRESHOLD,
    fit_window: tuple[float, float] | None = None,
    cache: taylor.OperatorCache | None = None,
) -> ConvergenceReport:
    """Error of one scheme against the analytic field over a ladder of spacings."""
    if len(h_list) < 3:
        raise ConfigurationError("convergence study needs at least 3 h values")
    hs = np.asarray(sorted(h_list, reverse=True), dtype=np.float64)
    if np.any(hs <= 0) or np.unique(hs).size != hs.size:
        raise ConfigurationError("h values must be positive and distinct")
    schemes.require_feasible(scheme, role, cfg.p, cfg.k)
    f = f or default_field

    if role == "interpolate":
        src_region = geometry.interp_source_shape(cfg)
    else:
        src_region = geometry.restrict_source_shape(cfg)

    if scheme == "tensor_linear":
        cond = float("nan")
    else:
        ref_op = schemes.build_reference_operator(scheme, role, cfg.p, cfg.k, cache=cache)
        cond = ref_op.max_condition

    points = []
    for h in hs:
        src = sample_field(src_region, f, cfg.u, h)
        out = schemes.apply_scheme(cfg, scheme, role, src, half=None, cache=cache)
        expected = _expected_values(out.region, f, cfg.u, h, 0.0)
        diff = out.values - expected
        err_max = float(np.abs(diff).max()) if diff.size else 0.0
        err_l2 = float(np.sqrt(np.mean(diff**2))) if diff.size else 0.0
        points.append(
            ConvergencePoint(float(h), err_max, err_l2, err_max < plateau_threshold, cond)
        )

    fit_pts = points
    if fit_window is not None:
        lo, hi = min(fit_window), max(fit_window)
        fit_pts = [pt for pt in points if lo <= pt.h <= hi]
    fh = np.array([pt.h for pt in fit_pts])
    order_max, ok_max = _fit_order(fh, np.array([pt.err_max for pt in fit_pts]), plateau_threshold)
    order_l2, ok_l2 = _fit_order(fh, np.array([pt.err_l2 for pt in fit_pts]), plateau_threshold)

    warnings = [
        f"h={pt.h:g}: error {pt.err_max:.3e} below plateau threshold {plateau_threshold:g}; "
        f"operator condition_estimate {pt.condition_estimate:.6g}"
        for pt in points
        if pt.plateau
    ]
    return ConvergenceReport(
        scheme=scheme,
        role=role,
        p=cfg.p,
        k=cfg.k,
        points=points,
        fitted_order_max=order_max,
        fitted_order_l2=order_l2,
        fit_reliable=ok_max and ok_l2,
        condition_warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchReport:
    scheme: str
    role: str
    p: int
    k: int
    u: int
    repetitions: int
    mean_ns: float
    total_ns: int
    phase: str  # 'apply' | 'construct'


def run_bench(
    scheme: str,
    role: str,
    cfg: FaceConfig,
    repetitions: int = 100,
    include_construction: bool = False,
    half: str | None = "inner",
    cache: taylor.OperatorCache | None = None,
    seed: int = 0,
) -> BenchReport:
    """Mean wall time of the exchange (or of operator construction)."""
    if repetitions < 1:
        raise ConfigurationError("repetitions must be >= 1")
    schemes.require_feasible(scheme, role, cfg.p, cfg.k)

    if include_construction:
        work_cache = cache or taylor.OperatorCache()
        if scheme == "tensor_linear":
            def build():
                if role == "interpolate":
                    linear.build_axis_normal(cfg.k)
                    linear.build_axis_tangential(cfg.p)
                else:
                    linear.build_restrict_axis_normal(cfg.k)
                    linear.build_restrict_axis_tangential(cfg.p)
        else:
            key = csr.OperatorKey(role, scheme, cfg.p, cfg.k)

            def build():
                work_cache.build_uncached(key)

        build()  # warm any lazy state outside the timed loop
        t0 = time.perf_counter_ns()
        for _ in range(repetitions):
            build()
        total = time.perf_counter_ns() - t0
        return BenchReport(scheme, role, cfg.p, cfg.k, cfg.u, repetitions,
                           total / repetitions, total, "construct")

    exchange = HaloExchange(cfg, scheme, role, half=half if role == "restrict" else None, cache=cache)
    rng = np.random.default_rng(seed)
    src, out = exchange.make_buffers(rng)
    exchange.run(src, out)  # warm: JIT, page touch; nothing allocated afterwards
    t0 = time.perf_counter_ns()
    for _ in range(repetitions):
        exchange.run(src, out)
    total = time.perf_counter_ns() - t0
    return BenchReport(scheme, role, cfg.p, cfg.k, cfg.u, repetitions,
                       total / repetitions, total, "apply")


# ---------------------------------------------------------------------------
# Unit oracle: every scheme against the tensor product on degree-one data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleCase:
    scheme: str
    role: str
    normal_axis: str
    coarse_side: str
    selector: str  # 'segment=N' or 'half=inner/outer'
    p: int
    k: int
    status: str  # 'pass' | 'fail' | 'skipped'
    max_err: float
    detail: str = ""


@dataclass
class OracleSummary:
    cases: list[OracleCase]

    @property
    def passed(self) -> int:
        return sum(c.status == "pass" for c in self.cases)

    @property
    def failed(self) -> int:
        return sum(c.status == "fail" for c in self.cases)

    @property
    def skipped(self) -> int:
        return sum(c.status == "skipped" for c in self.cases)

    @property
    def all_pass(self) -> bool:
        return self.failed == 0 and self.passed > 0

    def failures(self) -> list[OracleCase]:
        return [c for c in self.cases if c.status == "fail"]

    def format_table(self) -> str:
        lines = [f"{'scheme':<14} {'role':<12} {'pass':>6} {'fail':>6} {'skip':>6}"]
        combos = sorted({(c.scheme, c.role) for c in self.cases})
        for scheme, role in combos:
            sub = [c for c in self.cases if c.scheme == scheme and c.role == role]
            lines.append(
                f"{scheme:<14} {role:<12} "
                f"{sum(c.status == 'pass' for c in sub):>6} "
                f"{sum(c.status == 'fail' for c in sub):>6} "
                f"{sum(c.status == 'skipped' for c in sub):>6}"
            )
        for c in self.failures():
            lines.append(
                f"FAIL {c.scheme} {c.role} normal={c.normal_axis} side={c.coarse_side} "
                f"{c.selector} p={c.p} k={c.k}: max_err={c.max_err:.3e} {c.detail}"
            )
        lines.append(f"total: {self.passed} passed, {self.failed} failed, {self.skipped} skipped")
        return "\n".join(lines)


def _apply_with_transform(cfg, scheme, role, src, half, cache, transform):
    if scheme == "tensor_linear" or transform is None:
        return schemes.apply_scheme(cfg, scheme, role, src, half=half, cache=cache)
    op = taylor.operator_cache_get(cfg, scheme, role, half=half, cache=cache)
    op = transform(op)
    ref = geometry.to_reference(cfg, src)
    return geometry.from_reference(cfg, csr.apply(op, ref))


def _oracle_case(args) -> OracleCase:
    (scheme, role, normal, side, selector, p, k, u, seed, tol, matrix_tol,
     channel_phase, cache, transform) = args
    segment = selector if role == "interpolate" else 0
    half = selector if role == "restrict" else None
    sel_text = f"segment={segment}" if role == "interpolate" else f"half={half}"

    try:
        cfg = FaceConfig(normal, side, segment, p, k, u)
    except ConfigurationError as exc:
        return OracleCase(scheme, role, normal, side, sel_text, p, k, "skipped", 0.0, str(exc))
    ok, reason = schemes.scheme_feasible(scheme, role, p, k)
    if not ok:
        return OracleCase(scheme, role, normal, side, sel_text, p, k, "skipped", 0.0, reason)

    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, size=4)
    f = affine_field(*coeffs)
    src_region = (
        geometry.interp_source_shape(cfg) if role == "interpolate" else geometry.restrict_source_shape(cfg)
    )
    src = sample_field(src_region, f, u, h=0.5, channel_phase=channel_phase)

    got = _apply_with_transform(cfg, scheme, role, src, half, cache, transform)
    want = schemes.apply_scheme(cfg, "tensor_linear", role, src, half=half, cache=cache)
    err = float(np.abs(got.values - want.values).max()) if got.values.size else 0.0
    detail = ""
    status = "pass" if err < tol else "fail"

    if scheme == "matrix_linear" and status == "pass":
        noise = HaloBuffer(src_region, u, rng.standard_normal(src_region.cell_count * u))
        got_n = _apply_with_transform(cfg, scheme, role, noise, half, cache, transform)
        want_n = schemes.apply_scheme(cfg, "tensor_linear", role, noise, half=half, cache=cache)
        err_n = float(np.abs(got_n.values - want_n.values).max()) if got_n.values.size else 0.0
        err = max(err, err_n)
        if err_n >= matrix_tol:
            status = "fail"
            detail = f"random-data mismatch {err_n:.3e} >= {matrix_tol:g}"

    return OracleCase(scheme, role, normal, side, sel_text, p, k, status, err, detail)


def run_unit_oracle(
    which_schemes: Sequence[str] = SCHEMES,
    ps: Sequence[int] = (1, 3, 4, 6),
    ks: Sequence[int] = (1, 3),
    tol: float = 1e-11,
    matrix_tol: float = 1e-13,
    u: int = 4,
    seed: int = 0,
    channel_phase: float = 0.1,
    cache: taylor.OperatorCache | None = None,
    operator_transform=None,
    threads: int | None = None,
) -> OracleSummary:
    """Degree-one data through every face configuration, checked against the tensor path.

    Failures are recorded per case, not raised. Configurations a scheme cannot
    serve (k > p, or too few source levels for its stencils) are skipped with
    the constraint named.
    """
    cache = cache or taylor.OperatorCache()
    jobs = []
    case_seed = seed
    for scheme in which_schemes:
        for role in ("interpolate", "restrict"):
            selectors = list(range(9)) if role == "interpolate" else ["inner", "outer"]
            for p in ps:
                for k in ks:
                    for normal in AXES:
                        for side in SIDES:
                            for selector in selectors:
                                case_seed += 1
                                jobs.append((
                                    scheme, role, normal, side, selector, p, k, u,
                                    case_seed, tol, matrix_tol, channel_phase,
                                    cache, operator_transform,
                                ))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cases = list(pool.map(_oracle_case, jobs))
    else:
        cases = [_oracle_case(job) for job in jobs]
    return OracleSummary(cases)


# ---------------------------------------------------------------------------
# Operator consistency checks (row sums, dense oracle, rebuild determinism)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyCase:
    scheme: str
    role: str
    p: int
    k: int
    check: str
    status: str
    value: float
    detail: str = ""


def run_consistency_suite(
    which_schemes: Sequence[str] = MATRIX_SCHEMES,
    ps: Sequence[int] = (1, 3, 4, 6),
    ks: Sequence[int] = (1, 3),
    row_sum_tol: float = 1e-12,
    dense_tol: float = 1e-13,
    u: int = 4,
    seed: int = 0,
    cache: taylor.OperatorCache | None = None,
) -> list[ConsistencyCase]:
    """Invariants of every buildable full-face operator on the config grid."""
    cache = cache or taylor.OperatorCache()
    rng = np.random.default_rng(seed)
    out: list[ConsistencyCase] = []
    for scheme in which_schemes:
        if scheme == "tensor_linear":
            continue
        for role in ("interpolate", "restrict"):
            for p in ps:
                for k in ks:
                    if k > p:
                        continue
                    ok, reason = schemes.scheme_feasible(scheme, role, p, k)
                    if not ok:
                        out.append(ConsistencyCase(scheme, role, p, k, "feasible", "skipped", 0.0, reason))
                        continue
                    op = schemes.build_reference_operator(scheme, role, p, k, cache=cache)

                    dev = float(np.abs(op.row_sums() - 1.0).max())
                    out.append(ConsistencyCase(
                        scheme, role, p, k, "row_sum",
                        "pass" if dev < row_sum_tol else "fail", dev,
                    ))

                    if p <= 6:
                        src = HaloBuffer(op.source_region, u, rng.standard_normal(op.n_cols * u))
                        got = csr.apply(op, src).values.reshape(op.n_rows, u)
                        want = op.to_dense() @ src.cell_matrix()
                        dev = float(np.abs(got - want).max()) if got.size else 0.0
                        out.append(ConsistencyCase(
                            scheme, role, p, k, "dense_oracle",
                            "pass" if dev < dense_tol else "fail", dev,
                        ))

                    key = csr.OperatorKey(role, scheme, p, k)
                    again = cache.build_uncached(key)
                    same = op.arrays_equal(again)
                    out.append(ConsistencyCase(
                        scheme, role, p, k, "deterministic_rebuild",
                        "pass" if same else "fail", 0.0 if same else 1.0,
                    ))
    return out


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def _open_for_write(path_or_fp):
    if hasattr(path_or_fp, "write"):
        return path_or_fp, False
    return open(path_or_fp, "w", encoding="utf-8"), True


def write_convergence_csv(reports: Sequence[ConvergenceReport], path_or_fp) -> None:
    fp, close = _open_for_write(path_or_fp)
    try:
        fp.write(",".join(CONVERGENCE_CSV_COLUMNS) + "\n")
        for rep in reports:
            for pt in rep.points:
                fp.write(
                    f"{rep.scheme},{rep.role},{rep.p},{rep.k},"
                    f"{pt.h:.17g},{pt.err_max:.17g},{pt.err_l2:.17g},"
                    f"{'true' if pt.plateau else 'false'}\n"
                )
    finally:
        if close:
            fp.close()


def convergence_json_payload(reports: Sequence[ConvergenceReport]) -> list[dict]:
    rows = []
    for rep in reports:
        for pt in rep.points:
            rows.append({
                "scheme": rep.scheme,
                "role": rep.role,
                "p": rep.p,
                "k": rep.k,
                "h": pt.h,
                "err_max": pt.err_max,
                "err_l2": pt.err_l2,
                "plateau": pt.plateau,
            })
    return rows


def write_convergence_json(reports: Sequence[ConvergenceReport], path_or_fp) -> None:
    fp, close = _open_for_write(path_or_fp)
    try:
        json.dump(convergence_json_payload(reports), fp, indent=2)
        fp.write("\n")
    finally:
        if close:
            fp.close()


def write_bench_csv(reports: Sequence[BenchReport], path_or_fp) -> None:
    fp, close = _open_for_write(path_or_fp)
    try:
        fp.write(",".join(BENCH_CSV_COLUMNS) + "\n")
        for r in reports:
            fp.write(
                f"{r.scheme},{r.role},{r.p},{r.k},{r.u},{r.repetitions},"
                f"{r.mean_ns:.17g},{r.total_ns},{r.phase}\n"
            )
    finally:
        if close:
            fp.close()


def bench_json_payload(reports: Sequence[BenchReport]) -> list[dict]:
    return [
        {
            "scheme": r.scheme,
            "role": r.role,
            "p": r.p,
            "k": r.k,
            "u": r.u,
            "reps": r.repetitions,
            "mean_ns": r.mean_ns,
            "total_ns": r.total_ns,
            "phase": r.phase,
        }
        for r in reports
    ]


def write_bench_json(reports: Sequence[BenchReport], path_or_fp) -> None:
    fp, close = _open_for_write(path_or_fp)
    try:
        json.dump(bench_json_payload(reports), fp, indent=2)
        fp.write("\n")
    finally:
        if close:
            fp.close()
