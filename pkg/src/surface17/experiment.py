"""Experiment driver: baseline and code fidelities, success predicate,
threshold search over gate noise, and the parameter sweeps behind the
headline curves (threshold vs preparation/measurement noise, ratio at
threshold, decoder comparison along p=m=g).

Success at a noise point means (a) the decoded code fidelity beats the
single-qubit baseline with statistical significance and (b) the ratio
f = (1 - F_code2) / (1 - F_code1) is significantly below one, i.e. the
standard syndrome round demonstrably helps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import decoders as dec
from .channels import NoiseParams, QuantumChannel, idle_channel, validate_noise_ordering
from .layout import CodeLayout
from .pauli_mc import JointCounts, sample_many
from .stats import wilson_interval
from .trajectories import TrajectoryConfig, estimate_joint

CHANNEL_MODES = ("pauli", "general")
DECODERS = ("lut", "ts")

DEFAULT_ALPHA = 0.01
DEFAULT_DELTA = 0.02
DEFAULT_SAMPLES = {"pauli": 1_000_000, "general": 100_000}
DEFAULT_RESOLUTION = 5e-4
DEFAULT_BOOTSTRAP = 200


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic child seed for a probe/basis path under one master."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def single_qubit_fidelity(params: NoiseParams, basis: str,
                          channel_mode: str = "pauli") -> float:
    """Probability that an unencoded qubit is read out as prepared.

    Exact 2x2 computation: preparation flips, four idle segments,
    measurement flips.  No sampling.
    """
    if basis not in ("Z", "X"):
        raise ValueError(f"bad basis {basis!r}")
    if channel_mode == "pauli":
        idle = params.idle
        seg_flip = idle.px + idle.py if basis == "Z" else idle.py + idle.pz
        prod = (1 - 2 * params.p) * (1 - 2 * params.m) * (1 - 2 * seg_flip) ** 4
        return 0.5 * (1.0 + prod)
    if channel_mode != "general":
        raise ValueError(f"bad channel_mode {channel_mode!r}")
    if basis == "Z":
        state = np.array([[1, 0], [0, 0]], dtype=complex)
    else:
        state = np.full((2, 2), 0.5, dtype=complex)
    rho = state.copy()
    rho = QuantumChannel.prep_or_meas_flips(params.p).apply(rho)
    seg = idle_channel(params)
    for _ in range(4):
        rho = seg.apply(rho)
    rho = QuantumChannel.prep_or_meas_flips(params.m).apply(rho)
    return float(np.trace(state @ rho).real)


def simulate_counts(layout: CodeLayout, params: NoiseParams, basis: str,
                    channel_mode: str, n_samples: int, seed: int,
                    n_workers: int | None = None) -> JointCounts:
    """JointCounts from the simulator matching the channel mode."""
    if channel_mode == "pauli":
        return sample_many(layout, params, basis, n_samples, seed, n_workers)
    if channel_mode == "general":
        config = TrajectoryConfig.general(params)
        return estimate_joint(layout, config, basis, n_samples, seed, n_workers)
    raise ValueError(f"bad channel_mode {channel_mode!r}")


def _successes2(counts: JointCounts, decoder: str, layout: CodeLayout) -> int:
    if decoder == "lut":
        return int(counts.counts.max(axis=1).sum())
    if decoder == "ts":
        table = dec.ts_decision_table(layout, counts.basis)
        return int(counts.counts[np.arange(256), table].sum())
    raise ValueError(f"bad decoder {decoder!r}")


def _successes1(counts: JointCounts) -> int:
    return int(dec.marginalize_to_final_round(counts).counts.max(axis=1).sum())


@dataclass
class BasisResult:
    basis: str
    f_single: float
    f_code1: float
    f_code1_ci: tuple[float, float]
    f_code2: float
    f_code2_ci: tuple[float, float]
    n_samples: int
    successes1: int
    successes2: int
    counts: JointCounts


@dataclass
class ExperimentResult:
    """Fidelities, ratio and verdict at one noise point.

    Overall fidelities are minima over the two bases.  The ratio f uses
    the overall F_code2 and F_code1; it is undefined when F_code1 = 1.
    """

    params: NoiseParams
    channel_mode: str
    decoder: str
    per_basis: dict[str, BasisResult]
    f_single: float
    f_code1: float
    f_code1_ci: tuple[float, float]
    f_code2: float
    f_code2_ci: tuple[float, float]
    f_ratio: float | None
    f_ratio_ci: tuple[float, float] | None
    undefined_f: bool
    success: bool
    failed_criterion: str
    alpha: float
    delta: float
    seed: int
    n_samples: int
    notes: dict = field(default_factory=dict)


def _bootstrap_ratio(per_basis: dict[str, BasisResult], decoder: str,
                     layout: CodeLayout, alpha: float, n_boot: int,
                     seed: int) -> tuple[float, float] | None:
    """Percentile bootstrap CI for f, resampling counts per basis."""
    rng = np.random.default_rng(seed)
    samples = []
    pvecs = {}
    for b, br in per_basis.items():
        flat = br.counts.counts.reshape(-1).astype(float)
        pvecs[b] = (flat / flat.sum(), int(flat.sum()))
    ts_tables = {b: dec.ts_decision_table(layout, b) for b in per_basis} \
        if decoder == "ts" else None
    idx = np.arange(256)
    for _ in range(n_boot):
        f2s, f1s = [], []
        for b, br in per_basis.items():
            pvec, total = pvecs[b]
            c = rng.multinomial(total, pvec).reshape(256, 2)
            if decoder == "lut":
                s2 = c.max(axis=1).sum()
            else:
                s2 = c[idx, ts_tables[b]].sum()
            marg = np.zeros_like(c)
            np.add.at(marg, idx & 0xF0, c)
            s1 = marg.max(axis=1).sum()
            f2s.append(s2 / total)
            f1s.append(s1 / total)
        f2, f1 = min(f2s), min(f1s)
        if f1 >= 1.0:
            continue
        samples.append((1.0 - f2) / (1.0 - f1))
    if len(samples) < max(10, n_boot // 2):
        return None
    lo, hi = np.percentile(samples, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def evaluate_point(layout: CodeLayout, params: NoiseParams, channel_mode: str,
                   decoder: str, n_samples: int, seed: int,
                   n_workers: int | None = None, alpha: float = DEFAULT_ALPHA,
                   delta: float = DEFAULT_DELTA, n_bootstrap: int = DEFAULT_BOOTSTRAP,
                   counts_by_basis: dict[str, JointCounts] | None = None
                   ) -> ExperimentResult:
    """Run both bases at one noise point and assemble the verdict.

    counts_by_basis allows reusing simulated counts (e.g. to evaluate
    both decoders on identical data).
    """
    per_basis = {}
    for bidx, basis in enumerate(("Z", "X")):
        if counts_by_basis is not None:
            counts = counts_by_basis[basis]
        else:
            counts = simulate_counts(layout, params, basis, channel_mode,
                                     n_samples, derive_seed(seed, bidx), n_workers)
        total = counts.total_samples
        s2 = _successes2(counts, decoder, layout)
        s1 = _successes1(counts)
        per_basis[basis] = BasisResult(
            basis=basis,
            f_single=single_qubit_fidelity(params, basis, channel_mode),
            f_code1=s1 / total,
            f_code1_ci=wilson_interval(s1, total, 1 - alpha),
            f_code2=s2 / total,
            f_code2_ci=wilson_interval(s2, total, 1 - alpha),
            n_samples=total,
            successes1=s1,
            successes2=s2,
            counts=counts,
        )

    f_single = min(br.f_single for br in per_basis.values())
    worst2 = min(per_basis.values(), key=lambda br: br.f_code2)
    worst1 = min(per_basis.values(), key=lambda br: br.f_code1)
    f_code2, f_code2_ci = worst2.f_code2, worst2.f_code2_ci
    f_code1, f_code1_ci = worst1.f_code1, worst1.f_code1_ci

    undefined_f = f_code1 >= 1.0
    if undefined_f:
        f_ratio = None
        f_ratio_ci = None
    else:
        f_ratio = (1.0 - f_code2) / (1.0 - f_code1)
        f_ratio_ci = _bootstrap_ratio(per_basis, decoder, layout, alpha,
                                      n_bootstrap, derive_seed(seed, 999))

    # (a) the code must beat the bare qubit with significance: the Wilson
    # lower bound (the baseline is exact, so it carries no error).
    outperforms = f_code2_ci[0] > f_single
    # (b) f must be significantly below 1 by at least delta.
    ratio_ok = (not undefined_f and f_ratio_ci is not None
                and f_ratio_ci[1] < 1.0 - delta)

    if undefined_f:
        failed = "undefined_f"
    elif not outperforms:
        failed = "outperform"
    elif not ratio_ok:
        failed = "ratio"
    else:
        failed = ""
    return ExperimentResult(
        params=params, channel_mode=channel_mode, decoder=decoder,
        per_basis=per_basis, f_single=f_single,
        f_code1=f_code1, f_code1_ci=f_code1_ci,
        f_code2=f_code2, f_code2_ci=f_code2_ci,
        f_ratio=f_ratio, f_ratio_ci=f_ratio_ci, undefined_f=undefined_f,
        success=(failed == ""), failed_criterion=failed,
        alpha=alpha, delta=delta, seed=seed, n_samples=n_samples,
    )


def success_predicate(result: ExperimentResult, delta: float | None = None,
                      alpha: float | None = None) -> bool:
    """Re-evaluate the two-part success verdict on an existing result.

    alpha cannot be tightened after the fact (the CIs were computed at
    the result's alpha); delta can be changed freely.
    """
    if alpha is not None and alpha != result.alpha:
        raise ValueError("alpha is fixed at evaluation time; re-run evaluate_point")
    delta = result.delta if delta is None else delta
    if result.undefined_f or result.f_ratio_ci is None:
        return False
    lower2 = result.f_code2_ci[0]
    return lower2 > result.f_single and result.f_ratio_ci[1] < 1.0 - delta


@dataclass
class SearchConfig:
    g_lo: float = 0.0
    g_hi: float = 0.02
    resolution: float = DEFAULT_RESOLUTION
    n_samples: int = DEFAULT_SAMPLES["pauli"]
    seed: int = 2024
    alpha: float = DEFAULT_ALPHA
    delta: float = DEFAULT_DELTA
    n_bootstrap: int = DEFAULT_BOOTSTRAP
    n_workers: int | None = None


@dataclass
class ThresholdPoint:
    """Outcome of one bisection search over g at fixed p = m."""

    p_equals_m: float
    g_star: float | None
    f_at_threshold: float | None
    f_ci: tuple[float, float] | None
    iterations: int
    resolution: float
    note: str
    probes: list[tuple[float, bool, str]] = field(default_factory=list)
    result_at_threshold: ExperimentResult | None = None


def threshold_search(layout: CodeLayout, p_equals_m: float,
                     params_template: NoiseParams, channel_mode: str,
                     decoder: str, config: SearchConfig) -> ThresholdPoint:
    """Bisection for the highest g at which the experiment succeeds.

    Probes below the per-segment idle total d are skipped (gated qubits
    must not see less noise than idle ones), so the bracket floor is
    max(g_lo, d).  Assumes success flips once inside the bracket; the
    endpoints are verified and degenerate brackets are reported rather
    than bisected.
    """
    base = replace(params_template, p=p_equals_m, m=p_equals_m)
    d_total = replace(base, g=0.0).idle.total
    g_lo = max(config.g_lo, d_total)
    note = ""
    if config.g_lo < d_total:
        note = f"bracket floor raised to d={d_total:.3e}"
    probes: list[tuple[float, bool, str]] = []

    def probe(g: float, index: int) -> ExperimentResult:
        params = replace(base, g=g)
        report = validate_noise_ordering(params)
        if not report:
            raise RuntimeError(f"probe g={g} violates d <= g: {report.failures}")
        res = evaluate_point(layout, params, channel_mode, decoder,
                             config.n_samples, derive_seed(config.seed, index),
                             config.n_workers, config.alpha, config.delta,
                             config.n_bootstrap)
        probes.append((g, res.success, res.failed_criterion))
        return res

    if g_lo > config.g_hi:
        return ThresholdPoint(p_equals_m, None, None, None, 0, config.resolution,
                              note + "; bracket empty (d exceeds g_hi)", probes)

    res_lo = probe(g_lo, 0)
    if not res_lo.success:
        return ThresholdPoint(p_equals_m, None, None, None, 1, config.resolution,
                              (note + "; " if note else "")
                              + f"no success at bracket floor ({res_lo.failed_criterion})",
                              probes)
    res_hi = probe(config.g_hi, 1)
    if res_hi.success:
        return ThresholdPoint(p_equals_m, config.g_hi, res_hi.f_ratio,
                              res_hi.f_ratio_ci, 2, config.resolution,
                              (note + "; " if note else "") + "success at bracket top",
                              probes, res_hi)

    lo, hi = g_lo, config.g_hi
    best = res_lo
    index = 2
    while hi - lo > config.resolution:
        mid = 0.5 * (lo + hi)
        res = probe(mid, index)
        index += 1
        if res.success:
            lo, best = mid, res
        else:
            hi = mid
    return ThresholdPoint(p_equals_m, lo, best.f_ratio, best.f_ratio_ci,
                          index, config.resolution, note, probes, best)


def sweep_threshold(layout: CodeLayout, pm_grid: list[float],
                    params_template: NoiseParams, channel_mode: str,
                    decoder: str, config: SearchConfig) -> list[ThresholdPoint]:
    """Threshold curve: one bisection per p=m grid value."""
    points = []
    for i, pm in enumerate(pm_grid):
        cfg = replace(config, seed=derive_seed(config.seed, 7000 + i))
        points.append(threshold_search(layout, pm, params_template,
                                       channel_mode, decoder, cfg))
    return points


@dataclass
class EqualNoiseRow:
    """One p=m=g point of the decoder-comparison sweep.

    Both decoders are evaluated on identical counts; the ratio for the
    rule-based decoder keeps the optimal-decoder F_code1 denominator so
    both compare against the same thing.
    """

    value: float
    lut: ExperimentResult | None
    ts: ExperimentResult | None
    f_ts: float | None
    f_ts_ci: tuple[float, float] | None
    note: str = ""


def sweep_equal_noise(layout: CodeLayout, grid: list[float],
                      params_template: NoiseParams, channel_mode: str,
                      config: SearchConfig) -> list[EqualNoiseRow]:
    """Ratio comparison along p=m=g for both decoders."""
    rows = []
    for i, v in enumerate(grid):
        params = replace(params_template, p=v, m=v, g=v)
        if not validate_noise_ordering(params):
            rows.append(EqualNoiseRow(v, None, None, None, None,
                                      note="skipped: d > g"))
            continue
        seed = derive_seed(config.seed, 9000 + i)
        counts = {}
        for bidx, basis in enumerate(("Z", "X")):
            counts[basis] = simulate_counts(layout, params, basis, channel_mode,
                                            config.n_samples, derive_seed(seed, bidx),
                                            config.n_workers)
        common = dict(n_samples=config.n_samples, seed=seed,
                      n_workers=config.n_workers, alpha=config.alpha,
                      delta=config.delta, n_bootstrap=config.n_bootstrap,
                      counts_by_basis=counts)
        res_lut = evaluate_point(layout, params, channel_mode, "lut", **common)
        res_ts = evaluate_point(layout, params, channel_mode, "ts", **common)
        # Cross ratio: rule-based numerator over optimal single-round denominator.
        if res_lut.f_code1 >= 1.0:
            f_ts, f_ts_ci = None, None
        else:
            f_ts = (1.0 - res_ts.f_code2) / (1.0 - res_lut.f_code1)
            f_ts_ci = _bootstrap_cross_ratio(res_ts.per_basis, layout,
                                             config.alpha, config.n_bootstrap,
                                             derive_seed(seed, 998))
        rows.append(EqualNoiseRow(v, res_lut, res_ts, f_ts, f_ts_ci))
    return rows


def _bootstrap_cross_ratio(per_basis: dict[str, BasisResult], layout: CodeLayout,
                           alpha: float, n_boot: int, seed: int
                           ) -> tuple[float, float] | None:
    """Bootstrap CI for the ratio with TS numerator and LUT denominator."""
    rng = np.random.default_rng(seed)
    idx = np.arange(256)
    tables = {b: dec.ts_decision_table(layout, b) for b in per_basis}
    samples = []
    for _ in range(n_boot):
        f2s, f1s = [], []
        for b, br in per_basis.items():
            flat = br.counts.counts.reshape(-1).astype(float)
            total = int(flat.sum())
            c = rng.multinomial(total, flat / flat.sum()).reshape(256, 2)
            f2s.append(c[idx, tables[b]].sum() / total)
            marg = np.zeros_like(c)
            np.add.at(marg, idx & 0xF0, c)
            f1s.append(marg.max(axis=1).sum() / total)
        f2, f1 = min(f2s), min(f1s)
        if f1 >= 1.0:
            continue
        samples.append((1.0 - f2) / (1.0 - f1))
    if len(samples) < max(10, n_boot // 2):
        return None
    lo, hi = np.percentile(samples, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# Results tables (plain text, one row per basis plus a "min" row).

TABLE_COLUMNS = (
    "p", "m", "g", "t1_ratio", "t_ratio", "channel_mode", "decoder", "basis",
    "f_single", "f_code1", "f_code1_lo", "f_code1_hi",
    "f_code2", "f_code2_lo", "f_code2_hi",
    "f_ratio", "f_ratio_lo", "f_ratio_hi",
    "success", "failed_criterion", "g_star", "n_samples", "seed",
)


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    if value == "":
        return "NA"
    return str(value)


def result_rows(result: ExperimentResult, g_star: float | None = None) -> list[dict]:
    rows = []
    p = result.params
    common = {"p": p.p, "m": p.m, "g": p.g, "t1_ratio": p.t1_ratio,
              "t_ratio": p.t_ratio, "channel_mode": result.channel_mode,
              "decoder": result.decoder, "n_samples": result.n_samples,
              "seed": result.seed, "g_star": g_star}
    for basis, br in result.per_basis.items():
        rows.append(dict(common, basis=basis, f_single=br.f_single,
                         f_code1=br.f_code1, f_code1_lo=br.f_code1_ci[0],
                         f_code1_hi=br.f_code1_ci[1], f_code2=br.f_code2,
                         f_code2_lo=br.f_code2_ci[0], f_code2_hi=br.f_code2_ci[1],
                         f_ratio=None, f_ratio_lo=None, f_ratio_hi=None,
                         success=None, failed_criterion=None))
    ci = result.f_ratio_ci or (None, None)
    rows.append(dict(common, basis="min", f_single=result.f_single,
                     f_code1=result.f_code1, f_code1_lo=result.f_code1_ci[0],
                     f_code1_hi=result.f_code1_ci[1], f_code2=result.f_code2,
                     f_code2_lo=result.f_code2_ci[0], f_code2_hi=result.f_code2_ci[1],
                     f_ratio=result.f_ratio, f_ratio_lo=ci[0], f_ratio_hi=ci[1],
                     success=result.success,
                     failed_criterion=result.failed_criterion or None))
    return rows


def format_table(rows: list[dict], header_meta: dict | None = None) -> str:
    lines = ["# surface17 results table"]
    for key in sorted(header_meta or {}):
        lines.append(f"# {key}: {header_meta[key]}")
    lines.append(" ".join(TABLE_COLUMNS))
    for row in rows:
        lines.append(" ".join(_fmt(row.get(col)) for col in TABLE_COLUMNS))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[dict]:
    rows = []
    header: list[str] | None = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = line.split()
            continue
        rows.append(dict(zip(header, line.split())))
    return rows
