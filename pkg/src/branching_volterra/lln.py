"""Scaled statistics, limit targets, and condition checkers for the laws of
large numbers.

The verified statement: with supercritical branching (rate ``beta``) and a
kernel whose spread ``sigma(t)`` tends to ``ell in (0, inf]``,

    e^{-beta t} sigma^d(t) X_t(f)  ->  e^{-beta r} F * Tf(U_inf x0),

almost surely, where ``F`` is the count-martingale limit and

    Tf(z) = (2 pi)^{-d/2} \\int exp(-|z - y/ell|^2 / 2) f(y) dy

with the convention ``y/ell = 0`` when ``ell`` is infinite.  Because ``F`` is
replicate-random, the primary pass/fail statistic is the F-free ratio
``sigma^d(t) X_t(f) / X_t(1)`` on surviving replicates; the scaled statistic
(whose replicate mean targets ``e^{-beta r} Tf`` since ``E F = 1``) is
reported as a secondary check.

Condition checkers trace, over a probe grid,

* (decay)      ``e^{-beta t} sigma^d(t) -> 0`` and ``sigma(t) -> ell``,
* (flow)       ``U_t x / sigma(t) -> U_inf x``,
* (memory cut) ``sigma_1(t, b(t)) sqrt(ln t) / sigma(t) -> 0`` and the same
  without the log factor, with ``b(t) = sqrt(t)`` for the driftless kernel
  and ``b(t) = t^delta`` for the mean-reverting one,
* (lattice)    the summability of ``e^{-beta b(t_{n-1})} sigma^d(t_n)`` along
  ``t_n = r + n^kappa`` and the empirical path-modulus sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .branching import BranchingLaw
from .kernels import KernelSpec, ell_limit, sigma_split, sigma_sq
from .moments import TestFunction, gaussian_expectation
from .particles import path_modulus
from .quadrature import DEFAULT_QUAD, QuadratureConfig

__all__ = [
    "ConditionReport",
    "ExpFlow",
    "LLNReport",
    "LimitTarget",
    "check_conditions",
    "default_delta",
    "limit_target",
    "lln_statistics",
    "sum_pmax_trace",
    "transform_Tf",
    "u_infinity_demo",
]


class ExpFlow:
    """Exponentially expanding demo motion ``xi_t = e^t xi_0 + \\int_0^t e^s dW_s``.

    The flow normalized by the spread has a nonzero limit:
    ``sigma^2(t) = (e^{2t} - 1)/2`` and ``e^t / sigma(t) -> sqrt(2)``.
    Implements the same surface the simulator needs from a kernel spec."""

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = dim

    def u_factor(self, t: float) -> float:
        return math.exp(t)

    def sigma_sq(self, t: float, q: QuadratureConfig | None = None) -> float:
        return 0.5 * (math.exp(2.0 * t) - 1.0)

    def cell_weights(self, t, grid, q: QuadratureConfig | None = None) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        lo, hi = grid[:-1], grid[1:]
        return (np.exp(hi) - np.exp(lo)) / (hi - lo)

    def __eq__(self, other):
        return isinstance(other, ExpFlow) and other.dim == self.dim


@dataclass(frozen=True)
class LimitTarget:
    """Limit data: ``ell`` (possibly infinite) and the flow limit ``U_inf x0``."""

    ell: float
    u_infinity_x0: np.ndarray
    dim: int


def limit_target(spec: KernelSpec, x0=0.0, q: QuadratureConfig | None = None) -> LimitTarget:
    """Limit target of the kernel family: ``U_inf = 0`` for both the
    driftless and the mean-reverting case (``e^{mu t} x / sigma(t) -> 0``)."""
    q = q or DEFAULT_QUAD
    return LimitTarget(ell_limit(spec, q), np.zeros(spec.dim), spec.dim)


def transform_Tf(f: TestFunction, target: LimitTarget, q: QuadratureConfig | None = None) -> float:
    """Evaluate the Gaussian-smoothing limit functional ``Tf(U_inf x0)``.

    For infinite ``ell`` this is ``(2 pi)^{-d/2} e^{-|z|^2/2} \\int f``;
    integrability of ``f`` is required.  For finite ``ell`` substitute
    ``y = ell u``: ``Tf(z) = ell^d E f(ell U)`` with ``U ~ N(z, I)``."""
    d = target.dim
    z = np.asarray(target.u_infinity_x0, dtype=float)
    if math.isinf(target.ell):
        if not f.integrable:
            raise ValueError("constant test functions diverge when ell is infinite")
        pref = (2.0 * math.pi) ** (-d / 2.0) * math.exp(-0.5 * float(np.sum(z**2)))
        return pref * f.lebesgue_integral(d)
    ell = target.ell
    return ell**d * gaussian_expectation(f, ell * z, ell**2)


@dataclass
class LLNReport:
    """Scaled and ratio statistics of an ensemble against the limit targets."""

    times: np.ndarray
    scaled_mean: np.ndarray
    scaled_se: np.ndarray
    scaled_target: float
    ratio_mean: np.ndarray
    ratio_se: np.ndarray
    ratio_target: float
    n_replicates: int
    n_surviving: int
    f_estimates: np.ndarray
    degenerate: bool = False


def _as_count_xf(samples, f: TestFunction):
    """Normalize ensemble input into (times, counts, xf) arrays.

    Accepts per-replicate snapshot lists (positions required) or already
    reduced ``(times, counts, xf)`` triples."""
    counts, xfs, times = [], [], None
    for rep in samples:
        if isinstance(rep, tuple) and len(rep) == 3:
            t, c, x = rep
        else:
            snaps = list(rep)
            t = np.array([s.t for s in snaps])
            c = np.array([s.count for s in snaps], dtype=float)
            x = np.array(
                [float(np.sum(f(s.positions))) if s.count else 0.0 for s in snaps]
            )
        if times is None:
            times = np.asarray(t, dtype=float)
        counts.append(np.asarray(c, dtype=float))
        xfs.append(np.asarray(x, dtype=float))
    if times is None:
        raise ValueError("no replicates supplied")
    return times, np.vstack(counts), np.vstack(xfs)


def lln_statistics(
    samples,
    spec,
    law: BranchingLaw,
    f: TestFunction,
    r: float = 0.0,
    target: LimitTarget | None = None,
    q: QuadratureConfig | None = None,
) -> LLNReport:
    """Per-time scaled and ratio statistics of an ensemble.

    A replicate counts as surviving when its count at the last recorded time
    is positive (extinction is absorbing).  The ratio statistic
    ``sigma^d(t) X_t(f) / X_t(1)`` cancels the martingale limit exactly, so
    its surviving-replicate mean is the primary comparison against
    ``Tf(U_inf x0)``; the scaled statistic's all-replicate mean targets
    ``e^{-beta r} Tf`` through ``E F = 1``."""
    law.require_supercritical()
    q = q or DEFAULT_QUAD
    times, counts, xfs = _as_count_xf(samples, f)
    d = spec.dim
    sig_d = np.array([sigma_sq(spec, t, q) ** (d / 2.0) for t in times]) if isinstance(
        spec, KernelSpec
    ) else np.array([spec.sigma_sq(t) ** (d / 2.0) for t in times])
    beta = law.beta
    tgt = target if target is not None else limit_target(spec, q=q)
    tf_value = transform_Tf(f, tgt, q)
    scaled = np.exp(-beta * times)[None, :] * sig_d[None, :] * xfs
    n = counts.shape[0]
    surviving = counts[:, -1] > 0
    n_surv = int(np.sum(surviving))
    ratio_mean = np.full(times.size, np.nan)
    ratio_se = np.full(times.size, np.nan)
    if n_surv:
        ratios = sig_d[None, :] * xfs[surviving] / counts[surviving]
        ratio_mean = ratios.mean(axis=0)
        ratio_se = ratios.std(axis=0, ddof=1) / math.sqrt(n_surv) if n_surv > 1 else np.zeros(times.size)
    f_est = np.exp(-beta * (times[-1] - r)) * counts[:, -1]
    return LLNReport(
        times=times,
        scaled_mean=scaled.mean(axis=0),
        scaled_se=scaled.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(times.size),
        scaled_target=math.exp(-beta * r) * tf_value,
        ratio_mean=ratio_mean,
        ratio_se=ratio_se,
        ratio_target=tf_value,
        n_replicates=n,
        n_surviving=n_surv,
        f_estimates=f_est,
        degenerate=(n_surv == 0),
    )


def default_delta(hurst: float) -> float:
    """Default exponent for the memory cut ``b(t) = t^delta`` of the
    mean-reverting kernel, inside the admissible window; the ``H = 1/2``
    case is unconstrained and uses 0.45."""
    g = abs(hurst - 0.5)
    if g == 0.0:
        return 0.45
    return 0.9 * min(0.5, 2.0 * g / (1.0 + 2.0 * g))


def _b_schedule(spec, kind: str | None, delta: float | None):
    """Memory-cut schedule b(t); returns (kind, exponent, vectorized callable)."""
    if kind is None:
        kind = "sqrt" if getattr(spec, "drift_mu", 0.0) == 0.0 else "power"
    if kind == "sqrt":
        return kind, None, np.sqrt
    if kind == "power":
        dlt = default_delta(spec.hurst) if delta is None else delta
        if not (0.0 < dlt < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        return kind, dlt, lambda t: np.power(t, dlt)
    if kind == "linear_fraction":  # for the expanding-flow demo: b(t) = delta * t
        frac = 0.75 if delta is None else delta
        return kind, frac, lambda t: frac * np.asarray(t, dtype=float)
    raise ValueError(f"unknown b schedule {kind!r}")


@dataclass
class ConditionReport:
    """Numeric traces of the limit-theorem conditions over a probe grid."""

    probes: np.ndarray
    b_kind: str
    delta: float | None
    kappa: float
    ell: float
    decay_trace: np.ndarray  # e^{-beta t} sigma^d(t)
    sigma_trace: np.ndarray
    flow_trace: np.ndarray  # |U_t x / sigma(t) - U_inf x|
    memory_cut_trace: np.ndarray  # sigma_1(t, b(t)) sqrt(ln t) / sigma(t)
    memory_cut_trace_nolog: np.ndarray
    decay_decreasing: bool
    memory_cut_decreasing: bool
    memory_cut_nolog_decreasing: bool
    tn_checkpoints: np.ndarray
    tn_gaps: np.ndarray
    tn_sigma_ratio: np.ndarray
    lattice_sum_head: float
    lattice_sum_total: float
    lattice_tail_fraction: float
    lattice_cauchy: bool
    pmax_ns: np.ndarray | None = None
    pmax_terms: np.ndarray | None = None
    pmax_partial_sums: np.ndarray | None = None


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _sigma_vec(spec, ts, q) -> np.ndarray:
    return np.array([math.sqrt(sigma_sq(spec, t, q)) for t in ts])


def _sigma_closed_form(spec) -> bool:
    return spec.drift_mu == 0.0 or spec.hurst == 0.5


def default_probes(spec) -> tuple:
    """Probe grid on which the condition traces are past their transients.

    The driftless memory-cut trace behaves like ``t^{-(1-2g)/4} sqrt(ln t)``
    (``g = |H - 1/2|``) and only decreases beyond ``t = e^{2/(1-2g)}``, so
    driftless probes start at 32; the mean-reverting trace decays like
    ``e^{-|mu|(t - t^delta)}``, which underflows for large ``t``, so those
    probes stay small."""
    if getattr(spec, "drift_mu", 0.0) == 0.0:
        return (32.0, 64.0, 128.0, 256.0)
    return (4.0, 8.0, 16.0, 32.0, 64.0)


def check_conditions(
    spec: KernelSpec,
    law: BranchingLaw,
    x0=1.0,
    b_kind: str | None = None,
    delta: float | None = None,
    kappa: float = 0.5,
    r: float = 0.0,
    probes=None,
    q: QuadratureConfig | None = None,
    lattice_n_max: int = 2**21,
    pmax: dict | None = None,
) -> ConditionReport:
    """Trace each condition numerically; purely diagnostic (never raises on a
    failed trend, only records it).

    The lattice sum ``sum_n e^{-beta b(t_{n-1})} sigma^d(t_n)`` with
    ``t_n = r + n^kappa`` is accumulated up to ``lattice_n_max`` terms; the
    Cauchy check compares the second-half tail against the total.  Pass a
    ``pmax`` dict (keys: ``ns``, ``eps``, ``replicates``, ``dt``, ``seed``)
    to add the empirical path-modulus partial sums.
    """
    law.require_supercritical()
    q = q or DEFAULT_QUAD
    beta, d = law.beta, spec.dim
    probes = np.asarray(probes if probes is not None else default_probes(spec), dtype=float)
    kind, dlt, b_fun = _b_schedule(spec, b_kind, delta)
    ell = ell_limit(spec, q) if isinstance(spec, KernelSpec) else math.inf
    sig = _sigma_vec(spec, probes, q)
    decay = np.exp(-beta * probes) * sig**d
    # the kernel family has U_inf = 0, so the flow trace is |U_t x| / sigma(t)
    x0_norm = float(np.linalg.norm(np.atleast_1d(np.asarray(x0, dtype=float))))
    flow = np.array([spec.u_factor(t) for t in probes]) * x0_norm / sig
    cut = np.empty(probes.size)
    for i, t in enumerate(probes):
        s1_sq, _ = sigma_split(spec, t, min(float(b_fun(t)), t), q)
        cut[i] = math.sqrt(s1_sq) / sig[i]
    cut_log = cut * np.sqrt(np.log(probes))
    # lattice schedule t_n = r + n^kappa; term n is e^{-beta b(t_{n-1})} sigma^d(t_n)
    ns = np.arange(1, lattice_n_max + 1, dtype=float)
    tn = r + ns**kappa
    if _sigma_closed_form(spec):
        if spec.drift_mu == 0.0:
            sig_tn = spec.intensity_lambda * tn**spec.hurst
        else:
            lam, mu = spec.intensity_lambda, spec.drift_mu
            sig_tn = np.sqrt(lam**2 * (1.0 - np.exp(2.0 * mu * tn)) / (-2.0 * mu))
    else:
        # diagnostic interpolation from log-spaced quadrature nodes
        anchor = np.geomspace(tn[0], tn[-1], 48)
        sig_tn = np.interp(tn, anchor, _sigma_vec(spec, anchor, q))
    b_prev = b_fun(np.concatenate(([tn[0]], tn[:-1])))
    terms = np.exp(-beta * b_prev) * sig_tn**d
    csum = np.cumsum(terms[1:])  # sum starts from n = 2
    total = float(csum[-1])
    half = csum.size // 2
    tail = total - float(csum[half - 1])
    checkpoints = np.unique(np.geomspace(1, tn.size - 2, 16).astype(int))
    gaps = np.diff(tn)
    gap_idx = checkpoints[checkpoints < gaps.size]
    sig_ratio = sig_tn[gap_idx + 1] / sig_tn[gap_idx]
    report = ConditionReport(
        probes=probes,
        b_kind=kind,
        delta=dlt,
        kappa=kappa,
        ell=ell,
        decay_trace=decay,
        sigma_trace=sig,
        flow_trace=flow,
        memory_cut_trace=cut_log,
        memory_cut_trace_nolog=cut,
        decay_decreasing=_strictly_decreasing(decay),
        memory_cut_decreasing=_strictly_decreasing(cut_log),
        memory_cut_nolog_decreasing=_strictly_decreasing(cut),
        tn_checkpoints=tn[gap_idx],
        tn_gaps=gaps[gap_idx],
        tn_sigma_ratio=sig_ratio,
        lattice_sum_head=float(csum[half - 1]),
        lattice_sum_total=total,
        lattice_tail_fraction=tail / total if total > 0 else 0.0,
        lattice_cauchy=(tail < 1e-6 * total),
    )
    if pmax is not None:
        ns_sel, _, terms_sel, partial = sum_pmax_trace(
            spec,
            r=r,
            kappa=kappa,
            ns=pmax.get("ns", (4, 9, 16, 25, 36, 49)),
            eps=pmax.get("eps", 0.25),
            replicates=pmax.get("replicates", 100),
            dt=pmax.get("dt", 0.01),
            root_seed=pmax.get("seed", 0),
            q=q,
            dim=d,
        )
        report.pmax_ns = ns_sel
        report.pmax_terms = terms_sel
        report.pmax_partial_sums = partial
    return report


def sum_pmax_trace(
    spec: KernelSpec,
    r: float = 0.0,
    kappa: float = 0.5,
    ns=(4, 9, 16, 25, 36, 49),
    eps: float = 0.25,
    replicates: int = 100,
    dt: float = 0.01,
    root_seed: int = 0,
    q: QuadratureConfig | None = None,
    dim: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Empirical terms ``sigma^d(t_n) P(sup-displacement >= eps)`` over the
    windows ``[t_n, t_{n+1}]`` with ``t_n = r + n^kappa``, estimated from
    non-branching replicate paths; the displacement supremum uses the
    grid-point proxy.

    Returns ``(ns, exceedance frequencies, terms, partial sums)``."""
    from .branching import BranchingLaw as _BL
    from .branching import OffspringDistribution as _OD
    from .particles import SimConfig, simulate as _simulate

    q = q or DEFAULT_QUAD
    ns = np.asarray(sorted(ns), dtype=int)

    def snap(t):  # keep windows on the grid
        return round(round(t / dt) * dt, 12)

    windows = [(snap(r + n**kappa), snap(r + (n + 1) ** kappa)) for n in ns]
    horizon = windows[-1][1]
    line = _BL(_OD.deterministic(1), 1.0)
    exceed = np.zeros(len(ns))
    for rep in range(replicates):
        cfg = SimConfig(
            kernel=spec,
            law=line,
            x0=np.zeros(dim),
            grid_dt=dt,
            horizon_T=horizon,
            snapshot_times=(),
            root_seed=root_seed,
            with_positions=False,
            quad=q,
        )
        res = _simulate(cfg, replicate=rep)
        for i, (lo, hi) in enumerate(windows):
            rep_mod = path_modulus(res, lo, hi, eps=eps)
            exceed[i] += rep_mod.exceedance if rep_mod.exceedance is not None else 0.0
    exceed /= replicates
    sig_d = np.array([sigma_sq(spec, lo, q) ** (dim / 2.0) for lo, _ in windows])
    terms = sig_d * exceed
    return ns, exceed, terms, np.cumsum(terms)


@dataclass
class UInfinityDemoReport:
    """Demo of a nonzero flow limit with the exponentially expanding motion."""

    sigma_sq_at_1: float
    probe_times: np.ndarray
    u_ratio_trace: np.ndarray  # e^t / sigma(t), tends to sqrt(2)
    u_infinity_factor: float
    target: float
    beta: float
    beta_warning: bool
    mc_scaled_mean: float | None = None
    mc_scaled_se: float | None = None


def u_infinity_demo(
    x0,
    law: BranchingLaw,
    f: TestFunction,
    probe_times=(1.0, 2.0, 4.0, 8.0, 10.0),
    mc: dict | None = None,
    q: QuadratureConfig | None = None,
) -> UInfinityDemoReport:
    """Report the expanding-flow limit data and (optionally) a small-horizon
    Monte Carlo comparison of the scaled statistic.

    The displayed limit of ``e^t/sigma(t)`` is ``sqrt(2)`` under the spread
    normalization used here, so the weak-law target is
    ``(2 pi)^{-d/2} e^{-|sqrt(2) x0|^2/2} \\int f``; a branching factor at
    most the dimension triggers a warning (the weak law needs ``beta > d``)."""
    q = q or DEFAULT_QUAD
    flow = ExpFlow(dim=np.atleast_1d(np.asarray(x0, dtype=float)).size)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    probe_times = np.asarray(probe_times, dtype=float)
    ratios = np.array([flow.u_factor(t) / math.sqrt(flow.sigma_sq(t)) for t in probe_times])
    u_factor = math.sqrt(2.0)
    target = transform_Tf(f, LimitTarget(math.inf, u_factor * x0, flow.dim), q)
    beta = law.beta
    warn = not (beta > flow.dim)
    mc_mean = mc_se = None
    if mc is not None:
        from .particles import SimConfig, simulate as _simulate

        t = float(mc.get("t", 3.0))
        dt = float(mc.get("dt", 0.01))
        reps = int(mc.get("replicates", 100))
        seed = int(mc.get("seed", 0))
        vals = np.empty(reps)
        sig_d = flow.sigma_sq(t) ** (flow.dim / 2.0)
        cfg = SimConfig(
            kernel=flow,
            law=law,
            x0=x0,
            grid_dt=dt,
            horizon_T=t,
            snapshot_times=(t,),
            root_seed=seed,
            quad=q,
        )
        for rep in range(reps):
            res = _simulate(cfg, replicate=rep)
            snap = res.snapshots[-1]
            xf = float(np.sum(f(snap.positions))) if snap.count else 0.0
            vals[rep] = math.exp(-beta * t) * sig_d * xf
        mc_mean = float(vals.mean())
        mc_se = float(vals.std(ddof=1) / math.sqrt(reps))
    return UInfinityDemoReport(
        sigma_sq_at_1=flow.sigma_sq(1.0),
        probe_times=probe_times,
        u_ratio_trace=ratios,
        u_infinity_factor=u_factor,
        target=target,
        beta=beta,
        beta_warning=warn,
        mc_scaled_mean=mc_mean,
        mc_scaled_se=mc_se,
    )
