"""Analytic moment oracles for the branching system.

For a system started from a memory of length ``r`` the position at horizon
``t`` is Gaussian per coordinate: mean ``U_t x0 + (memory shift)`` and
variance ``sigma2^2(t, r)``.  On the closed-form test-function family
(constants, box indicators, isotropic Gaussian bumps, and the exponential
envelope ``e^{-|x|/a}`` in one dimension) the following are computed without
any nested Monte Carlo:

* first moment:  ``E X_t(f) = e^{beta (t-r)} E f(xi_t)``,
* second moment: ``E X_t(f1) X_t(f2) = e^{beta(t-r)} E[f1 f2 (xi_t)] +
  V psi''(1-) e^{2 beta (t-r)} \\int_r^t E[ E_u f1(xi_t) E_u f2(xi_t) ]
  e^{-beta (u-r)} du`` (the integral decomposes pairs over the death time of
  their last common ancestor),
* the conditional-mean decomposition over the particles alive at ``s``, and
* the conditional variance of ``X_t(f)`` given the time-``s`` field, with an
  explicit dominating bound
  ``C e^{2 beta t - beta s - beta r} sigma2^{-d}(t,r) ||f||_2^2``.

The inner conditional expectation ``E_u f(xi_t)`` is the Gaussian smoothing
of ``f`` by the innovation variance ``sigma2^2(t,u)`` evaluated at the
``u``-measurable part of the position; the outer expectation over that part
is a second Gaussian integral (per coordinate), done by adaptive quadrature
against the exact smoothed factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .branching import BranchingLaw
from .kernels import (
    KernelSpec,
    UnsupportedRegimeError,
    VarianceProfile,
    c1_closed_form,
    ell_limit,
    variance_profile,
)
from .particles import SimResult, _chain_sum, _memory_contribution, _prefix_grid
from .quadrature import (
    DEFAULT_QUAD,
    QuadratureConfig,
    adaptive_gauss_legendre,
    cos_oscillatory_tail,
    integrate_power_endpoints,
)

__all__ = [
    "TestFunction",
    "conditional_mean_decomposition",
    "conditional_variance",
    "fou_second_moment",
    "gaussian_expectation",
    "gaussian_product_expectation",
    "mean_functional",
    "second_moment_functional",
    "variance_bound",
]


@dataclass(frozen=True)
class TestFunction:
    """Closed-form test function family.

    kinds: ``constant(c)``; ``box(lo, hi)`` per coordinate; centered
    isotropic Gaussian bump ``A exp(-|x-c|^2 / (2 w^2))``; exponential decay
    envelope ``exp(-|x|/a)`` (one dimension only).
    """

    __test__ = False  # not a pytest collection target

    kind: str
    value: float = 1.0
    lo: tuple = ()
    hi: tuple = ()
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple = ()
    scale: float = 1.0

    @classmethod
    def constant(cls, c: float = 1.0) -> "TestFunction":
        return cls("constant", value=float(c))

    @classmethod
    def box(cls, lo, hi) -> "TestFunction":
        lo = tuple(float(v) for v in np.atleast_1d(np.asarray(lo, dtype=float)))
        hi = tuple(float(v) for v in np.atleast_1d(np.asarray(hi, dtype=float)))
        if len(lo) != len(hi) or any(l >= h for l, h in zip(lo, hi)):
            raise ValueError("box requires lo < hi componentwise")
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, width: float = 1.0, center=0.0, dim: int = 1) -> "TestFunction":
        if width <= 0.0:
            raise ValueError("width must be positive")
        center = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
        return cls(
            "gaussian",
            amplitude=float(amplitude),
            width=float(width),
            center=tuple(float(v) for v in center),
        )

    @classmethod
    def envelope(cls, scale: float) -> "TestFunction":
        if scale <= 0.0:
            raise ValueError("scale must be positive")
        return cls("envelope", scale=float(scale))

    @property
    def dim(self) -> int | None:
        if self.kind == "box":
            return len(self.lo)
        if self.kind == "gaussian":
            return len(self.center)
        if self.kind == "envelope":
            return 1
        return None  # constant works in any dimension

    @property
    def integrable(self) -> bool:
        return self.kind != "constant"

    def lebesgue_integral(self, dim: int) -> float:
        self._check_dim(dim)
        if self.kind == "constant":
            raise ValueError("constant functions are not integrable")
        if self.kind == "box":
            return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))
        if self.kind == "gaussian":
            return self.amplitude * (2.0 * math.pi * self.width**2) ** (dim / 2.0)
        return 2.0 * self.scale

    def l2_norm_sq(self, dim: int) -> float:
        self._check_dim(dim)
        if self.kind == "constant":
            raise ValueError("constant functions are not square integrable")
        if self.kind == "box":
            return self.lebesgue_integral(dim)
        if self.kind == "gaussian":
            return self.amplitude**2 * (math.pi * self.width**2) ** (dim / 2.0)
        return self.scale

    def _check_dim(self, dim: int) -> None:
        if self.dim is not None and self.dim != dim:
            raise ValueError(f"test function has dimension {self.dim}, expected {dim}")

    def __call__(self, x) -> np.ndarray:
        """Evaluate on an (n, d) array of positions; returns shape (n,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "constant":
            return np.full(x.shape[0], self.value)
        self._check_dim(x.shape[1])
        if self.kind == "box":
            lo = np.asarray(self.lo)
            hi = np.asarray(self.hi)
            return np.all((x >= lo) & (x <= hi), axis=1).astype(float)
        if self.kind == "gaussian":
            c = np.asarray(self.center)
            return self.amplitude * np.exp(-np.sum((x - c) ** 2, axis=1) / (2.0 * self.width**2))
        return np.exp(-np.abs(x[:, 0]) / self.scale)


def _phi_diff(lo, hi, mean, sd):
    return ndtr((hi - mean) / sd) - ndtr((lo - mean) / sd)


def _exp_linear_block(alpha: float, lo: float, hi: float, mean, var: float):
    """E[e^{alpha X} 1_{[lo, hi]}(X)] for X ~ N(mean, var), vectorized in mean."""
    sd = math.sqrt(var)
    shift = mean + alpha * var
    return np.exp(alpha * mean + 0.5 * alpha**2 * var) * _phi_diff(lo, hi, shift, sd)


def _envelope_expectation(a: float, mean, var: float):
    """E[e^{-|X|/a}] for X ~ N(mean, var), vectorized in mean."""
    if var == 0.0:
        return np.exp(-np.abs(mean) / a)
    return _exp_linear_block(-1.0 / a, 0.0, np.inf, mean, var) + _exp_linear_block(
        1.0 / a, -np.inf, 0.0, mean, var
    )


def gaussian_expectation(f: TestFunction, mean, var: float) -> float:
    """E f(X) in closed form, X ~ N(mean, var * I) per coordinate."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.size
    f._check_dim(d)
    if var < 0.0:
        raise ValueError("variance must be nonnegative")
    if var == 0.0:
        if f.kind == "box":
            # boundary convention irrelevant for the oracles (null sets)
            return float(f(mean[None, :])[0])
        return float(f(mean[None, :])[0])
    if f.kind == "constant":
        return f.value
    sd = math.sqrt(var)
    if f.kind == "box":
        return float(np.prod(_phi_diff(np.asarray(f.lo), np.asarray(f.hi), mean, sd)))
    if f.kind == "gaussian":
        w2 = f.width**2
        c = np.asarray(f.center)
        coeff = (w2 / (w2 + var)) ** (d / 2.0)
        return f.amplitude * coeff * float(np.exp(-np.sum((mean - c) ** 2) / (2.0 * (w2 + var))))
    return float(_envelope_expectation(f.scale, mean[0], var))


def _merge_gaussians(f1: TestFunction, f2: TestFunction) -> tuple[float, TestFunction]:
    """Product of two bumps is a bump: returns (scalar factor, merged bump)."""
    w1s, w2s = f1.width**2, f2.width**2
    c1v, c2v = np.asarray(f1.center), np.asarray(f2.center)
    wm = w1s * w2s / (w1s + w2s)
    cm = (c1v * w2s + c2v * w1s) / (w1s + w2s)
    factor = f1.amplitude * f2.amplitude * float(np.exp(-np.sum((c1v - c2v) ** 2) / (2.0 * (w1s + w2s))))
    merged = TestFunction("gaussian", amplitude=1.0, width=math.sqrt(wm), center=tuple(cm))
    return factor, merged


def gaussian_product_expectation(f1: TestFunction, f2: TestFunction, mean, var: float) -> float:
    """E[f1(X) f2(X)] in closed form for the supported pairs."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.size
    if var == 0.0:
        return float(f1(mean[None, :])[0] * f2(mean[None, :])[0])
    kinds = {f1.kind, f2.kind}
    if f1.kind == "constant":
        return f1.value * gaussian_expectation(f2, mean, var)
    if f2.kind == "constant":
        return f2.value * gaussian_expectation(f1, mean, var)
    if kinds == {"box"}:
        lo = np.maximum(np.asarray(f1.lo), np.asarray(f2.lo))
        hi = np.minimum(np.asarray(f1.hi), np.asarray(f2.hi))
        if np.any(lo >= hi):
            return 0.0
        return gaussian_expectation(TestFunction("box", lo=tuple(lo), hi=tuple(hi)), mean, var)
    if kinds == {"gaussian"}:
        factor, merged = _merge_gaussians(f1, f2)
        return factor * gaussian_expectation(merged, mean, var)
    if kinds == {"box", "gaussian"}:
        box, bump = (f1, f2) if f1.kind == "box" else (f2, f1)
        # fold the bump into the measure coordinate by coordinate
        w2 = bump.width**2
        c = np.asarray(bump.center)
        sd = math.sqrt(var)
        tilt_var = var * w2 / (var + w2)
        tilt_mean = (mean * w2 + c * var) / (var + w2)
        coeff = bump.amplitude * (w2 / (w2 + var)) ** (d / 2.0)
        coeff *= float(np.exp(-np.sum((mean - c) ** 2) / (2.0 * (w2 + var))))
        probs = _phi_diff(np.asarray(box.lo), np.asarray(box.hi), tilt_mean, math.sqrt(tilt_var))
        return coeff * float(np.prod(probs))
    if kinds == {"envelope"}:
        merged_scale = f1.scale * f2.scale / (f1.scale + f2.scale)
        return gaussian_expectation(TestFunction.envelope(merged_scale), mean, var)
    if kinds == {"envelope", "box"}:
        env, box = (f1, f2) if f1.kind == "envelope" else (f2, f1)
        lo, hi = box.lo[0], box.hi[0]
        a, m = env.scale, mean[0]
        val = 0.0
        if hi > 0.0:
            val += float(_exp_linear_block(-1.0 / a, max(lo, 0.0), hi, m, var))
        if lo < 0.0:
            val += float(_exp_linear_block(1.0 / a, lo, min(hi, 0.0), m, var))
        return val
    raise NotImplementedError(f"no closed form for the pair ({f1.kind}, {f2.kind})")


def _smoothed_factors(f: TestFunction, var: float, d: int):
    """Per-coordinate closed forms of x -> E f(x + N(0, var I)); the product
    over coordinates is the smoothed function (f must factor, which every
    supported kind does)."""
    sd = math.sqrt(var) if var > 0.0 else 0.0
    if f.kind == "constant":
        return [lambda x, i=i: np.full_like(np.asarray(x, dtype=float), f.value if i == 0 else 1.0) for i in range(d)]
    if f.kind == "box":
        def factor(i):
            lo, hi = f.lo[i], f.hi[i]
            if sd == 0.0:
                return lambda x: ((np.asarray(x) >= lo) & (np.asarray(x) <= hi)).astype(float)
            return lambda x: _phi_diff(lo, hi, np.asarray(x, dtype=float), sd)
        return [factor(i) for i in range(d)]
    if f.kind == "gaussian":
        w2 = f.width**2
        coeff = (w2 / (w2 + var)) ** 0.5
        def factor(i):
            c = f.center[i]
            amp = f.amplitude * coeff if i == 0 else coeff
            return lambda x: amp * np.exp(-((np.asarray(x, dtype=float) - c) ** 2) / (2.0 * (w2 + var)))
        return [factor(i) for i in range(d)]
    if f.kind == "envelope":
        if d != 1:
            raise NotImplementedError("envelope test functions support dimension 1 only")
        return [lambda x: _envelope_expectation(f.scale, np.asarray(x, dtype=float), var)]
    raise ValueError(f.kind)


def _outer_product_expectation(f1, f2, mean, s1_sq: float, inner_var: float, q: QuadratureConfig) -> float:
    """E[ h1(m + G) h2(m + G) ] with G ~ N(0, s1_sq I) and h_i the smoothing
    of f_i by ``inner_var``; factorizes per coordinate."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.size
    h1 = _smoothed_factors(f1, inner_var, d)
    h2 = _smoothed_factors(f2, inner_var, d)
    if s1_sq <= 0.0:
        return float(np.prod([h1[i](mean[i]) * h2[i](mean[i]) for i in range(d)]))
    sd = math.sqrt(s1_sq)
    total = 1.0
    for i in range(d):
        def integrand(z, i=i):
            x = mean[i] + z
            return h1[i](x) * h2[i](x) * np.exp(-(z**2) / (2.0 * s1_sq)) / (sd * math.sqrt(2.0 * math.pi))
        total *= adaptive_gauss_legendre(integrand, -8.5 * sd, 8.5 * sd, q)
    return total


def mean_functional(
    spec: KernelSpec,
    law: BranchingLaw,
    f: TestFunction,
    t: float,
    r: float = 0.0,
    memory_shift=0.0,
    x0=0.0,
    q: QuadratureConfig | None = None,
    profile: VarianceProfile | None = None,
) -> float:
    """First-moment oracle ``E X_t(f) = e^{beta (t-r)} E f(xi_t)`` with the
    Gaussian expectation in closed form.

    ``memory_shift`` is the kernel-weighted memory integral at horizon ``t``
    (a d-vector; zero for empty memories)."""
    if t < r:
        raise ValueError("requires t >= r")
    q = q or DEFAULT_QUAD
    prof = profile or variance_profile(spec, q)
    d = spec.dim
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    shift = np.broadcast_to(np.asarray(memory_shift, dtype=float), (d,))
    mean = spec.u_factor(t) * x0 + shift
    var = prof.sigma2_sq(t, r) if t > r else 0.0
    return math.exp(law.beta * (t - r)) * gaussian_expectation(f, mean, var)


def _genealogical_integral(prof, law, f1, f2, mean, t, lo, hi, r, q) -> float:
    """``\\int_lo^hi E[E_u f1 * E_u f2] e^{-beta (u-r)} du`` with the
    square-root endpoint behaviour at ``u = t`` absorbed by substitution."""
    beta = law.beta
    s1_r = prof.sigma1_sq(t, r)

    def value_at(u: float) -> float:
        s1 = max(prof.sigma1_sq(t, u) - s1_r, 0.0)
        inner = prof.sigma2_sq(t, u) if u < t else 0.0
        return _outer_product_expectation(f1, f2, mean, s1, inner, q) * math.exp(-beta * (u - r))

    def integrand(us):
        us = np.atleast_1d(np.asarray(us, dtype=float))
        return np.array([value_at(u) for u in us])

    mid = 0.5 * (lo + hi) if hi == t else hi
    total = adaptive_gauss_legendre(integrand, lo, mid, q) if mid > lo else 0.0
    if hi == t and hi > mid:
        def tail(ws):  # u = t - w^2 smooths the sqrt(t-u) endpoint behaviour
            ws = np.atleast_1d(np.asarray(ws, dtype=float))
            return np.array([2.0 * w * value_at(t - w * w) for w in ws])
        total += adaptive_gauss_legendre(tail, 0.0, math.sqrt(hi - mid), q)
    return total


def second_moment_functional(
    spec: KernelSpec,
    law: BranchingLaw,
    f1: TestFunction,
    f2: TestFunction,
    t: float,
    r: float = 0.0,
    memory_shift=0.0,
    x0=0.0,
    q: QuadratureConfig | None = None,
    profile: VarianceProfile | None = None,
) -> float:
    """Second-moment oracle ``E[X_t(f1) X_t(f2)]``: closed-form diagonal term
    plus the genealogical integral over the last-common-ancestor death time."""
    if t < r:
        raise ValueError("requires t >= r")
    q = q or DEFAULT_QUAD
    prof = profile or variance_profile(spec, q)
    d = spec.dim
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    shift = np.broadcast_to(np.asarray(memory_shift, dtype=float), (d,))
    mean = spec.u_factor(t) * x0 + shift
    beta = law.beta
    var_r = prof.sigma2_sq(t, r) if t > r else 0.0
    diag = math.exp(beta * (t - r)) * gaussian_product_expectation(f1, f2, mean, var_r)
    if t == r:
        return diag
    psi2 = law.offspring.psi_double_prime1
    gen = law.rate_V * psi2 * math.exp(2.0 * beta * (t - r))
    gen *= _genealogical_integral(prof, law, f1, f2, mean, t, r, t, r, q)
    return diag + gen


def conditional_mean_decomposition(
    result: SimResult,
    f: TestFunction,
    t: float,
    s: float,
    q: QuadratureConfig | None = None,
    profile: VarianceProfile | None = None,
) -> float:
    """``E(X_t(f) | F_s) = e^{beta (t-s)} sum_alpha E(f(xi_t^alpha) | G_s^alpha)``
    computed from the alive particles' discrete memories at ``s``.

    Each conditional expectation is Gaussian with mean ``U_t x0`` plus the
    horizon-``t`` kernel weights applied to the particle's increment chain on
    [0, s), and variance ``sigma2^2(t, s)``."""
    config = result.config
    spec, law = config.kernel, config.law
    r = config.memory_length_r
    if not (r <= s <= t):
        raise ValueError("requires r <= s <= t")
    q = q or config.quad
    prof = profile or variance_profile(spec, q)
    tree = result.tree
    grid = _prefix_grid(s, config.grid_dt)
    w = spec.cell_weights(t, grid, q) if grid.size > 1 and s > 0 else np.empty(0)
    alive = tree.alive_at(s)
    base = _memory_contribution(tree, w) if w.size else np.zeros(tree.dim)
    var = prof.sigma2_sq(t, s) if t > s else 0.0
    u_t_x0 = spec.u_factor(t) * config.x0
    memo: dict[int, np.ndarray] = {}
    total = 0.0
    for node in alive:
        mean = u_t_x0 + (_chain_sum(tree, node, w, s, memo, base) if w.size else np.zeros(tree.dim))
        total += gaussian_expectation(f, mean, var)
    return math.exp(law.beta * (t - s)) * total


def conditional_variance(
    spec: KernelSpec,
    law: BranchingLaw,
    f: TestFunction,
    t: float,
    s: float,
    r: float = 0.0,
    memory_shift=0.0,
    x0=0.0,
    q: QuadratureConfig | None = None,
    profile: VarianceProfile | None = None,
) -> float:
    """``E[(X_t(f) - E(X_t(f)|F_s))^2]`` via the three-term closed form:
    ``e^{beta(t-r)} E f^2 - e^{2 beta t - beta s - beta r} E[(E_s f)^2]
    + V psi'' e^{2 beta t - beta r} \\int_s^t E[(E_u f)^2] e^{-beta u} du``."""
    if not (r <= s <= t):
        raise ValueError("requires r <= s <= t")
    q = q or DEFAULT_QUAD
    prof = profile or variance_profile(spec, q)
    d = spec.dim
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    shift = np.broadcast_to(np.asarray(memory_shift, dtype=float), (d,))
    mean = spec.u_factor(t) * x0 + shift
    beta = law.beta
    if s == t:
        return 0.0
    var_r = prof.sigma2_sq(t, r) if t > r else 0.0
    term1 = math.exp(beta * (t - r)) * gaussian_product_expectation(f, f, mean, var_r)
    s1_s = max(prof.sigma1_sq(t, s) - prof.sigma1_sq(t, r), 0.0)
    inner_s = prof.sigma2_sq(t, s)
    e_sq_s = _outer_product_expectation(f, f, mean, s1_s, inner_s, q)
    term2 = math.exp(2.0 * beta * t - beta * s - beta * r) * e_sq_s
    psi2 = law.offspring.psi_double_prime1
    # e^{2bt-br} \int_s^t (..) e^{-bu} du  =  e^{2b(t-r)} \int_s^t (..) e^{-b(u-r)} du
    integral = _genealogical_integral(prof, law, f, f, mean, t, s, t, r, q)
    term3 = law.rate_V * psi2 * math.exp(2.0 * beta * (t - r)) * integral
    return term1 - term2 + term3


def variance_bound(
    spec: KernelSpec,
    law: BranchingLaw,
    f: TestFunction,
    t: float,
    s: float,
    r: float = 0.0,
    q: QuadratureConfig | None = None,
    profile: VarianceProfile | None = None,
) -> float:
    """Dominating bound ``C e^{2 beta t - beta s - beta r} sigma2^{-d}(t, r)
    ||f||_2^2`` with ``C = max(1, V psi''(1-)/beta) (2 pi)^{-d/2}``.

    Why this constant dominates: with ``M = (2 pi)^{-d/2} e^{2 beta t -
    beta s - beta r} sigma2^{-d}(t,r) ||f||^2`` and ``x = V psi''/beta``,
    the first term of the three-term formula is at most ``e^{-beta(t-s)} M``
    (Gaussian density sup bound plus ``t >= s``), the subtracted term is
    nonnegative, and the genealogical term is at most
    ``x (1 - e^{-beta(t-s)}) M``; the total is ``<= (x - (x-1)
    e^{-beta(t-s)}) M <= max(1, x) M`` because ``psi'' >= psi' - 1`` forces
    ``x >= 1`` whenever ``beta > 0``."""
    if not (r <= s <= t):
        raise ValueError("requires r <= s <= t")
    q = q or DEFAULT_QUAD
    prof = profile or variance_profile(spec, q)
    d = spec.dim
    beta = law.beta
    if beta <= 0.0:
        raise UnsupportedRegimeError("variance bound requires beta > 0")
    c = max(1.0, law.rate_V * law.offspring.psi_double_prime1 / beta) * (2.0 * math.pi) ** (-d / 2.0)
    sig2 = prof.sigma2_sq(t, r)
    return c * math.exp(2.0 * beta * t - beta * s - beta * r) * sig2 ** (-d / 2.0) * f.l2_norm_sq(d)


def fou_second_moment(
    spec: KernelSpec, t: float, q: QuadratureConfig | None = None
) -> tuple[float, float]:
    """Spectral evaluation of the per-coordinate variance of the
    mean-reverting motion at time ``t`` (empty memory), plus its limit.

    Returns ``(value, limit)`` where, for ``mu < 0``,

        value = c1(H) lambda^2 \\int_R (1 - 2 e^{mu t} cos(x t) + e^{2 mu t})
                    / (mu^2 + x^2) |x|^{1-2H} dx,
        limit = ell_H^2.

    Independent of the time-domain quadrature of ``\\int_0^t |K|^2``; the two
    representations cross-check each other in the tests."""
    q = q or DEFAULT_QUAD
    h, mu, lam = spec.hurst, spec.drift_mu, spec.intensity_lambda
    if mu >= 0.0:
        raise UnsupportedRegimeError("spectral variance requires mu < 0")
    if t < 0.0:
        raise ValueError("requires t >= 0")
    if t == 0.0:
        return 0.0, ell_limit(spec, q) ** 2
    emu = math.exp(mu * t)
    cutoff = max(64.0, 8.0 * math.pi / t)
    # 1 - 2 e^{mu t} cos(xt) + e^{2 mu t} = (1-e^{mu t})^2 + 4 e^{mu t} sin^2(xt/2)

    def steady(x):
        return (1.0 + emu**2) * x ** (1.0 - 2.0 * h) / (mu**2 + x**2)

    # non-oscillatory part on [0, cutoff] + folded tail (x -> 1/x)
    body = integrate_power_endpoints(steady, 0.0, cutoff, q, p_left=1.0 - 2.0 * h)

    def folded(y):
        return (1.0 + emu**2) * y ** (2.0 * h - 1.0) / (1.0 + (mu * y) ** 2)

    body += integrate_power_endpoints(folded, 0.0, 1.0 / cutoff, q, p_left=2.0 * h - 1.0)

    def osc_body(x):
        return np.cos(x * t) * x ** (1.0 - 2.0 * h) / (mu**2 + x**2)

    osc = integrate_power_endpoints(osc_body, 0.0, cutoff, q, p_left=1.0 - 2.0 * h)
    osc += cos_oscillatory_tail(lambda x: x ** (1.0 - 2.0 * h) / (mu**2 + x**2), cutoff, t, q)
    integral = 2.0 * (body - 2.0 * emu * osc)  # symmetric in x
    value = c1_closed_form(h) * lam**2 * integral
    return value, ell_limit(spec, q) ** 2
