"""Volterra kernels for fractional Brownian / fractional Ornstein-Uhlenbeck
motion, their variance profiles, and discretization weights.

The kernel family ``K_H^mu(t, s)`` represents the solution of
``d xi = mu xi dt + lambda dB^H`` as ``xi_t = e^{mu t} xi_0 +
lambda \\int_0^t K_H^mu(t,s) dW_s`` against an ordinary Brownian motion ``W``
generating the same filtration.  Two equivalent displays are implemented:

* difference form (valid for every ``H != 1/2``)::

      K_H^mu(t,s) = c2(H) [ (t/s)^{H-1/2} (t-s)^{H-1/2}
          - s^{1/2-H} \\int_s^t e^{mu(t-u)} (H-1/2-mu u) u^{H-3/2} (u-s)^{H-1/2} du ]

* integrated form (valid for ``H > 1/2``, obtained by parts)::

      K_H^mu(t,s) = (H-1/2) c2(H) s^{1/2-H}
          \\int_s^t e^{mu(t-u)} u^{H-1/2} (u-s)^{H-3/2} du

and ``K_{1/2}^mu(t,s) = e^{mu(t-s)}``.  All inner integrals carry an
algebraic endpoint factor ``(u-s)^{g-1}`` with ``g in (0, 3/2)``; they are
computed after the substitution ``u = s + v^{1/g}`` which removes the
singularity exactly (see :mod:`branching_volterra.quadrature`).

Variance profile per coordinate: ``sigma^2(t) = \\int_0^t |lambda K(t,s)|^2 ds``
with the split ``sigma1^2(t,s) = \\int_0^s``, ``sigma2^2(t,s) = \\int_s^t``.
Known closed forms (``mu = 0``: ``lambda^2 t^{2H}``; ``H = 1/2``: exponential
integrals) are used as fast paths and as test oracles against the quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import (
    DEFAULT_QUAD,
    QuadratureConfig,
    adaptive_gauss_legendre,
    cos_oscillatory_tail,
    integrate_power_endpoints,
)

__all__ = [
    "KernelSpec",
    "UnsupportedRegimeError",
    "VarianceProfile",
    "c1",
    "c1_closed_form",
    "c2",
    "cell_weights",
    "ell_limit",
    "eval_kernel",
    "kernel_limit_checks",
    "sigma_split",
    "sigma_sq",
    "variance_profile",
]


class UnsupportedRegimeError(ValueError):
    """Parameter regime outside what the analysis supports (e.g. mu > 0)."""


def _check_hurst(h: float) -> None:
    if not (0.0 < h < 1.0):
        raise ValueError(f"hurst must lie in (0, 1), got {h}")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family parameters: Hurst index, drift of the exponential flow
    ``U_t x = e^{mu t} x``, noise intensity, and spatial dimension."""

    hurst: float
    drift_mu: float = 0.0
    intensity_lambda: float = 1.0
    dim: int = 1

    def __post_init__(self):
        _check_hurst(self.hurst)
        if self.intensity_lambda <= 0.0:
            raise ValueError("intensity_lambda must be positive")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    def u_factor(self, t: float) -> float:
        """Scalar flow factor: ``U_t x = u_factor(t) * x``."""
        return math.exp(self.drift_mu * t)

    def cell_weights(self, t, grid, q: QuadratureConfig | None = None) -> np.ndarray:
        return cell_weights(self, t, grid, q)

    def sigma_sq(self, t, q: QuadratureConfig | None = None) -> float:
        return sigma_sq(self, t, q)


def c2(h: float) -> float:
    """Normalizing constant ``sqrt(2H G(3/2-H) / (G(H+1/2) G(2-2H)))`` of the
    fractional kernel, evaluated through log-Gamma."""
    _check_hurst(h)
    log_val = (
        math.log(2.0 * h)
        + math.lgamma(1.5 - h)
        - math.lgamma(h + 0.5)
        - math.lgamma(2.0 - 2.0 * h)
    )
    return math.exp(0.5 * log_val)


def c1_closed_form(h: float) -> float:
    """Closed form ``Gamma(2H+1) sin(pi H) / (2 pi)`` for the reciprocal of
    twice the integral ``\\int_R (1 - cos x)/|x|^{2H+1} dx``."""
    _check_hurst(h)
    return math.exp(math.lgamma(2.0 * h + 1.0)) * math.sin(math.pi * h) / (2.0 * math.pi)


def c1(h: float, q: QuadratureConfig | None = None) -> float:
    """Spectral normalization of fractional Gaussian integrals:
    ``(2 \\int_R (1-cos x)/|x|^{2H+1} dx)^{-1}``, by quadrature.

    The body over [0, 4 pi] is handled with the endpoint substitution (the
    integrand behaves like ``x^{1-2H}/2`` at zero); the tail splits into an
    exact power integral and an accelerated oscillatory cosine tail.
    """
    _check_hurst(h)
    q = q or DEFAULT_QUAD
    cutoff = 4.0 * math.pi
    p = 2.0 * h + 1.0

    def body(x):
        # 1 - cos x = 2 sin^2(x/2), stable for small x
        return 2.0 * np.sin(0.5 * x) ** 2 * x ** (-p)

    half_line = integrate_power_endpoints(body, 0.0, cutoff, q, p_left=1.0 - 2.0 * h)
    half_line += cutoff ** (-2.0 * h) / (2.0 * h)
    half_line -= cos_oscillatory_tail(lambda x: x ** (-p), cutoff, 1.0, q)
    return 1.0 / (4.0 * half_line)


def _check_ts(t: float, s: float) -> None:
    if not (0.0 < s < t):
        raise ValueError(f"requires 0 < s < t, got s={s}, t={t}")


def _inner_integrated(spec, t: float, s: float, gap: float, q: QuadratureConfig) -> float:
    # \int_s^t e^{mu(t-u)} u^{H-1/2} (u-s)^{H-3/2} du for H > 1/2
    h, mu = spec.hurst, spec.drift_mu
    g = h - 0.5  # singular exponent gamma: (u-s)^{gamma-1}
    beta = 1.0 / g

    def integrand(v):
        off = v**beta
        return np.exp(mu * (gap - off)) * (s + off) ** (h - 0.5) / g

    return adaptive_gauss_legendre(integrand, 0.0, gap**g, q)


def _inner_difference(spec, t: float, s: float, gap: float, q: QuadratureConfig) -> float:
    # \int_s^t e^{mu(t-u)} (H-1/2-mu u) u^{H-3/2} (u-s)^{H-1/2} du
    h, mu = spec.hurst, spec.drift_mu
    g = h + 0.5  # (u-s)^{g-1} with g in (1/2, 3/2)
    beta = 1.0 / g

    def integrand(v):
        off = v**beta
        u = s + off
        return np.exp(mu * (gap - off)) * (h - 0.5 - mu * u) * u ** (h - 1.5) / g

    return adaptive_gauss_legendre(integrand, 0.0, gap**g, q)


def _kernel_at_gap(
    spec: KernelSpec,
    t: float,
    gap: float,
    q: QuadratureConfig,
    form: str = "auto",
    s: float | None = None,
) -> float:
    """``lambda K_H^mu(t, s)`` with the time gap ``t - s`` supplied exactly.

    Near the ``s -> t`` singularity the gap falls below the floating-point
    resolution of ``t - s``, and near ``s -> 0`` the subtraction ``t - gap``
    cannot recover ``s``; each singular factor therefore uses whichever of
    ``s`` and ``gap`` is exact, and the other only in smooth factors.
    """
    if s is None:
        s = t - gap
    if not (gap > 0.0 and s > 0.0):
        raise ValueError(f"requires 0 < s < t, got s={s}, t={t}")
    h, mu, lam = spec.hurst, spec.drift_mu, spec.intensity_lambda
    if h == 0.5:
        return lam * math.exp(mu * gap)
    if form == "auto":
        form = "integrated" if h > 0.5 else "difference"
    if form == "integrated":
        if h <= 0.5:
            raise ValueError("integrated form requires hurst > 1/2")
        return lam * (h - 0.5) * c2(h) * s ** (0.5 - h) * _inner_integrated(spec, t, s, gap, q)
    if form == "difference":
        lead = (t / s) ** (h - 0.5) * gap ** (h - 0.5)
        return lam * c2(h) * (lead - s ** (0.5 - h) * _inner_difference(spec, t, s, gap, q))
    raise ValueError(f"unknown kernel form {form!r}")


def eval_kernel(
    spec: KernelSpec,
    t: float,
    s: float,
    q: QuadratureConfig | None = None,
    form: str = "auto",
) -> float:
    """Evaluate ``lambda * K_H^mu(t, s)`` for ``0 < s < t``.

    ``form`` selects the display: ``"integrated"`` (H > 1/2 only),
    ``"difference"`` (any H != 1/2), or ``"auto"`` which uses the integrated
    form for H > 1/2 and the difference form for H < 1/2.
    """
    q = q or DEFAULT_QUAD
    _check_ts(t, s)
    return _kernel_at_gap(spec, t, t - s, q, form, s=s)


def _inner_cfg(q: QuadratureConfig) -> QuadratureConfig:
    # kernel evaluations nested inside an outer quadrature need headroom,
    # otherwise their tolerance becomes the outer error estimator's noise floor
    return QuadratureConfig(q.rel_tol / 256.0, q.abs_tol / 256.0, q.max_subdivisions)


def _sq_integrand(spec: KernelSpec, t: float, q: QuadratureConfig):
    inner = _inner_cfg(q)

    def f(us):
        us = np.atleast_1d(np.asarray(us, dtype=float))
        return np.array([eval_kernel(spec, t, u, inner) ** 2 for u in us])

    return f


def _offset_integral(fgap, width: float, p: float, q: QuadratureConfig) -> float:
    """``\\int_0^width fgap(delta) d delta`` where ``fgap ~ C delta^p`` at zero,
    in offset coordinates so the singular point never suffers cancellation."""
    beta = 1.0 / (1.0 + p)

    def transformed(v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return np.array([fgap(vv**beta) for vv in v]) * beta * v ** (beta - 1.0)

    return adaptive_gauss_legendre(transformed, 0.0, width ** (1.0 + p), q)


def _sigma_sq_quad(spec: KernelSpec, a: float, b: float, t: float, q: QuadratureConfig) -> float:
    if b <= a:
        return 0.0
    h = spec.hurst
    p_left = -2.0 * abs(h - 0.5) if a == 0.0 else 0.0
    if h < 0.5 and b == t:
        # |K|^2 ~ (t-s)^{2H-1} at s = t: integrate the tail half in offset
        # coordinates (gap = t - s passed exactly to the kernel)
        mid = 0.5 * (a + b)
        inner = _inner_cfg(q)
        head = integrate_power_endpoints(_sq_integrand(spec, t, q), a, mid, q, p_left, 0.0)
        tail = _offset_integral(
            lambda gap: _kernel_at_gap(spec, t, gap, inner) ** 2, b - mid, 2.0 * h - 1.0, q
        )
        return head + tail
    return integrate_power_endpoints(_sq_integrand(spec, t, q), a, b, q, p_left, 0.0)


def sigma_sq(spec: KernelSpec, t: float, q: QuadratureConfig | None = None) -> float:
    """Per-coordinate variance ``\\int_0^t |lambda K(t,s)|^2 ds``.

    Fast paths: ``mu = 0`` gives ``lambda^2 t^{2H}`` exactly; ``H = 1/2``
    gives the exponential closed form.  Otherwise singularity-aware
    quadrature of the squared kernel.
    """
    q = q or DEFAULT_QUAD
    if t <= 0.0:
        raise ValueError(f"requires t > 0, got {t}")
    h, mu, lam = spec.hurst, spec.drift_mu, spec.intensity_lambda
    if mu == 0.0:
        return lam**2 * t ** (2.0 * h)
    if h == 0.5:
        return lam**2 * (1.0 - math.exp(2.0 * mu * t)) / (-2.0 * mu)
    return lam**2 * _sigma_sq_quad(spec, 0.0, t, t, q)


def sigma_split(
    spec: KernelSpec, t: float, s: float, q: QuadratureConfig | None = None
) -> tuple[float, float]:
    """Partial variances ``(\\int_0^s, \\int_s^t)`` of ``|lambda K(t,u)|^2``."""
    q = q or DEFAULT_QUAD
    if t <= 0.0 or not (0.0 <= s <= t):
        raise ValueError(f"requires 0 <= s <= t with t > 0, got s={s}, t={t}")
    total = sigma_sq(spec, t, q)
    if s == 0.0:
        return 0.0, total
    if s == t:
        return total, 0.0
    h, mu, lam = spec.hurst, spec.drift_mu, spec.intensity_lambda
    if h == 0.5:
        if mu == 0.0:
            return lam**2 * s, lam**2 * (t - s)
        # direct forms; subtracting from the total would cancel catastrophically
        s1 = lam**2 * math.exp(2.0 * mu * (t - s)) * (1.0 - math.exp(2.0 * mu * s)) / (-2.0 * mu)
        s2 = lam**2 * (1.0 - math.exp(2.0 * mu * (t - s))) / (-2.0 * mu)
        return s1, s2
    s1 = lam**2 * _sigma_sq_quad(spec, 0.0, s, t, q)
    s2 = lam**2 * _sigma_sq_quad(spec, s, t, t, q)
    return s1, s2


def _abs_power_cauchy_integral(h: float, q: QuadratureConfig) -> float:
    # \int_R |x|^{1-2H} / (1+x^2) dx by quadrature, folding [1, inf) back onto
    # (0, 1] with x -> 1/x:  = 2 \int_0^1 (x^{1-2H} + x^{2H-1})/(1+x^2) dx
    def f(x):
        return (x ** (1.0 - 2.0 * h) + x ** (2.0 * h - 1.0)) / (1.0 + x**2)

    p = 1.0 - 2.0 * abs(h - 0.5) - 1.0  # dominant endpoint exponent at 0
    return 2.0 * integrate_power_endpoints(f, 0.0, 1.0, q, p_left=p)


def ell_limit(spec: KernelSpec, q: QuadratureConfig | None = None) -> float:
    """Long-run standard deviation ``ell = lim_t sigma(t)``.

    ``mu = 0``: infinite.  ``mu < 0``: evaluates
    ``ell^2 = c1(H) lambda^2 |mu|^{-2H} \\int_R |x|^{1-2H}/(1+x^2) dx``
    with both the normalization and the integral obtained by quadrature.
    """
    q = q or DEFAULT_QUAD
    mu = spec.drift_mu
    if mu > 0.0:
        raise UnsupportedRegimeError("mu > 0 has exponentially growing variance; no finite limit")
    if mu == 0.0:
        return math.inf
    h, lam = spec.hurst, spec.intensity_lambda
    ell_sq = c1(h, q) * lam**2 * abs(mu) ** (-2.0 * h) * _abs_power_cauchy_integral(h, q)
    return math.sqrt(ell_sq)


def cell_weights(
    spec: KernelSpec, t: float, grid, q: QuadratureConfig | None = None
) -> np.ndarray:
    """Mean value of ``lambda K(t, .)`` over each grid cell.

    ``grid`` is strictly increasing with ``grid[0] = 0`` and ``grid[-1] <= t``.
    Weight ``k_j = (1/D_j) \\int_{s_j}^{s_{j+1}} lambda K(t,s) ds`` is the
    L2 projection of the kernel onto piecewise constants, so
    ``sum_j k_j^2 D_j <= sigma^2(t)`` with equality in the refinement limit.
    Integrable endpoint singularities (at ``s = 0`` for every ``H != 1/2``,
    and at ``s = t`` for ``H < 1/2``) use the same substitution as
    :func:`eval_kernel`.
    """
    q = q or DEFAULT_QUAD
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must contain at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if not np.all(np.diff(grid) > 0.0):
        raise ValueError("grid must be strictly increasing")
    if grid[-1] > t * (1.0 + 1e-12):
        raise ValueError("grid must not extend past t")
    h, mu, lam = spec.hurst, spec.drift_mu, spec.intensity_lambda
    lo, hi = grid[:-1], grid[1:]
    widths = hi - lo
    if h == 0.5:
        if mu == 0.0:
            return np.full(lo.size, lam)
        # exact cell means of e^{mu(t-s)}
        return lam * (np.exp(mu * (t - lo)) - np.exp(mu * (t - hi))) / (mu * widths)

    inner = _inner_cfg(q)

    def f(ss):
        ss = np.atleast_1d(np.asarray(ss, dtype=float))
        return np.array([eval_kernel(spec, t, s, inner) for s in ss])

    gamma = abs(h - 0.5)
    out = np.empty(lo.size)
    for j in range(lo.size):
        p_left = -gamma if lo[j] == 0.0 else 0.0
        if h < 0.5 and hi[j] >= t * (1.0 - 1e-12):
            # K ~ (t-s)^{H-1/2} at the final cell: offset-coordinate tail
            mid = 0.5 * (lo[j] + hi[j])
            head = integrate_power_endpoints(f, lo[j], mid, q, p_left, 0.0)
            tail = _offset_integral(
                lambda gap: _kernel_at_gap(spec, t, gap, inner), t - mid, h - 0.5, q
            )
            out[j] = (head + tail) / widths[j]
        else:
            out[j] = integrate_power_endpoints(f, lo[j], hi[j], q, p_left, 0.0) / widths[j]
    return out


@dataclass(frozen=True)
class KernelLimitReport:
    """Small-s limit diagnostics of the driftless kernel at t = 1."""

    hurst: float
    target: float
    probes: tuple[float, ...]
    scaled_values: tuple[float, ...]
    converged: bool


def kernel_limit_checks(
    spec: KernelSpec,
    q: QuadratureConfig | None = None,
    probes: tuple[float, ...] = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7),
    rel_tol: float = 1e-3,
) -> KernelLimitReport:
    """Check the small-s behaviour of the driftless kernel at ``t = 1``:
    ``s^{H-1/2} K -> c2(H)/2`` for ``H > 1/2`` and
    ``s^{1/2-H} K -> H/c2(H)`` for ``H < 1/2`` (trivial for ``H = 1/2``)."""
    if spec.drift_mu != 0.0:
        raise UnsupportedRegimeError("small-s limit checks require mu = 0")
    q = q or DEFAULT_QUAD
    h, lam = spec.hurst, spec.intensity_lambda
    if h == 0.5:
        target = 1.0
        values = tuple(eval_kernel(spec, 1.0, s, q) / lam for s in probes)
    elif h > 0.5:
        target = c2(h) / 2.0
        values = tuple(s ** (h - 0.5) * eval_kernel(spec, 1.0, s, q) / lam for s in probes)
    else:
        target = h / c2(h)
        values = tuple(s ** (0.5 - h) * eval_kernel(spec, 1.0, s, q) / lam for s in probes)
    converged = abs(values[-1] - target) <= rel_tol * abs(target)
    return KernelLimitReport(h, target, tuple(probes), values, converged)


class VarianceProfile:
    """Bundle of per-coordinate variance functions for one kernel spec, with
    closed-form fast paths where available."""

    def __init__(self, spec: KernelSpec, q: QuadratureConfig | None = None):
        self.spec = spec
        self.q = q or DEFAULT_QUAD

    def sigma_sq(self, t: float) -> float:
        return sigma_sq(self.spec, t, self.q)

    def sigma1_sq(self, t: float, s: float) -> float:
        if s <= 0.0:
            return 0.0
        return sigma_split(self.spec, t, s, self.q)[0]

    def sigma2_sq(self, t: float, s: float) -> float:
        if s <= 0.0:
            return self.sigma_sq(t)
        return sigma_split(self.spec, t, s, self.q)[1]

    @property
    def ell(self) -> float:
        return ell_limit(self.spec, self.q)


def variance_profile(spec: KernelSpec, q: QuadratureConfig | None = None) -> VarianceProfile:
    return VarianceProfile(spec, q)
