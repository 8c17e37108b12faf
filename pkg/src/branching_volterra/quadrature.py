"""Adaptive quadrature tuned for kernels with algebraic endpoint singularities.

Three building blocks used throughout the package:

* a globally adaptive Gauss-Legendre integrator for smooth (vectorized)
  integrands,
* a wrapper that removes an algebraic endpoint behaviour ``(x-a)^p`` or
  ``(b-x)^p`` with ``p > -1`` exactly, via the substitution
  ``x = a + v^{1/(1+p)}`` before handing the smooth remainder to the
  adaptive rule,
* a tail integrator for ``\\int_a^\\infty cos(w x) h(x) dx`` with a positive
  decreasing envelope ``h``, based on half-period sums accelerated by
  iterated averaging of the partial sums.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    rule = _GL_CACHE.get(n)
    if rule is None:
        rule = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = rule
    return rule


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and the subdivision budget for the adaptive integrators."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")


DEFAULT_QUAD = QuadratureConfig()


class QuadratureError(RuntimeError):
    """Raised when the subdivision budget is exhausted before convergence.

    Carries the tolerance actually achieved in ``achieved_tol``.
    """

    def __init__(self, message: str, achieved_tol: float = float("nan")):
        super().__init__(f"{message} (achieved tolerance {achieved_tol:.3e})")
        self.achieved_tol = achieved_tol


def _panel(f, lo: float, hi: float) -> tuple[float, float]:
    # paired 10/20 point Gauss-Legendre estimates; their gap is the error proxy
    x10, w10 = _gl_rule(10)
    x20, w20 = _gl_rule(20)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    xs = np.concatenate((mid + half * x10, mid + half * x20))
    ys = np.asarray(f(xs), dtype=float)
    if not np.all(np.isfinite(ys)):
        raise QuadratureError(f"non-finite integrand on [{lo:g}, {hi:g}]")
    i10 = half * float(np.dot(w10, ys[:10]))
    i20 = half * float(np.dot(w20, ys[10:]))
    return i20, abs(i20 - i10)


def adaptive_gauss_legendre(f, a: float, b: float, q: QuadratureConfig | None = None) -> float:
    """Integrate a vectorized integrand over [a, b], splitting the worst panel
    until the summed error estimate meets ``max(abs_tol, rel_tol * |I|)``."""
    q = q or DEFAULT_QUAD
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    est, err = _panel(f, a, b)
    # heap entries: (-err, lo, hi, est, err); ties broken by interval bounds
    heap = [(-err, a, b, est, err)]
    total, total_err = est, err
    min_width = 1e-14 * (b - a)
    for _ in range(q.max_subdivisions):
        if total_err <= max(q.abs_tol, q.rel_tol * abs(total)):
            return sign * total
        neg_err, lo, hi, est_i, err_i = heapq.heappop(heap)
        if hi - lo <= min_width:
            # cannot refine further; treat as converged at this width
            heapq.heappush(heap, (0.0, lo, hi, est_i, 0.0))
            total_err -= err_i
            continue
        mid = 0.5 * (lo + hi)
        est_l, err_l = _panel(f, lo, mid)
        est_r, err_r = _panel(f, mid, hi)
        total += est_l + est_r - est_i
        total_err += err_l + err_r - err_i
        heapq.heappush(heap, (-err_l, lo, mid, est_l, err_l))
        heapq.heappush(heap, (-err_r, mid, hi, est_r, err_r))
    if total_err <= max(q.abs_tol, q.rel_tol * abs(total)):
        return sign * total
    achieved = total_err / max(abs(total), 1e-300)
    raise QuadratureError("adaptive quadrature did not converge", achieved_tol=achieved)


def _power_transform_left(f, a: float, p: float):
    # x = a + v^beta maps (x-a)^p * dx onto a bounded density; beta = 1/(1+p).
    # The offset is clamped so a + offset stays strictly above a in floating
    # point (deep panels would otherwise evaluate f at its singular endpoint).
    beta = 1.0 / (1.0 + p)
    floor = 4.0 * np.finfo(float).eps * abs(a)

    def g(v):
        v = np.asarray(v, dtype=float)
        return f(a + np.maximum(v**beta, floor)) * beta * v ** (beta - 1.0)

    return g


def _power_transform_right(f, b: float, p: float):
    beta = 1.0 / (1.0 + p)
    floor = 4.0 * np.finfo(float).eps * abs(b)

    def g(v):
        v = np.asarray(v, dtype=float)
        return f(b - np.maximum(v**beta, floor)) * beta * v ** (beta - 1.0)

    return g


def integrate_power_endpoints(
    f,
    a: float,
    b: float,
    q: QuadratureConfig | None = None,
    p_left: float = 0.0,
    p_right: float = 0.0,
) -> float:
    """Integrate ``f`` over [a, b] where ``f ~ C (x-a)^{p_left}`` near ``a``
    and ``f ~ C (b-x)^{p_right}`` near ``b`` (each exponent > -1).

    The substitution ``x = a + v^{1/(1+p)}`` turns the algebraic factor into a
    constant, so the adaptive rule sees a bounded integrand.
    """
    q = q or DEFAULT_QUAD
    if not (p_left > -1.0 and p_right > -1.0):
        raise ValueError("endpoint exponents must exceed -1")
    if a == b:
        return 0.0
    if a > b:
        raise ValueError("requires a <= b")
    if p_left == 0.0 and p_right == 0.0:
        return adaptive_gauss_legendre(f, a, b, q)
    mid = 0.5 * (a + b)
    total = 0.0
    if p_left != 0.0:
        g = _power_transform_left(f, a, p_left)
        total += adaptive_gauss_legendre(g, 0.0, (mid - a) ** (1.0 + p_left), q)
    else:
        total += adaptive_gauss_legendre(f, a, mid, q)
    if p_right != 0.0:
        g = _power_transform_right(f, b, p_right)
        total += adaptive_gauss_legendre(g, 0.0, (b - mid) ** (1.0 + p_right), q)
    else:
        total += adaptive_gauss_legendre(f, mid, b, q)
    return total


def _accelerate_alternating(partial_sums: np.ndarray) -> tuple[float, float]:
    # iterated averaging (Euler-style) of the partial sums of an eventually
    # alternating series; the error proxy is the gap between the last two
    # diagonal values of the averaging triangle
    arr = np.asarray(partial_sums, dtype=float)
    prev = arr[-1]
    err = math.inf
    while arr.size > 1:
        arr = 0.5 * (arr[:-1] + arr[1:])
        err = abs(arr[-1] - prev)
        prev = arr[-1]
    return float(prev), float(err)


def cos_oscillatory_tail(
    h,
    a: float,
    omega: float = 1.0,
    q: QuadratureConfig | None = None,
    max_half_periods: int = 96,
) -> float:
    """Compute ``\\int_a^\\infty cos(omega x) h(x) dx`` for a smooth, positive,
    decreasing envelope ``h``: sum over half-periods, then accelerate."""
    q = q or DEFAULT_QUAD
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    half = np.pi / omega

    def integrand(x):
        return np.cos(omega * x) * h(x)

    sums = np.empty(max_half_periods)
    running = 0.0
    panel_q = QuadratureConfig(q.rel_tol, q.abs_tol, 200)
    for k in range(max_half_periods):
        lo = a + k * half
        running += adaptive_gauss_legendre(integrand, lo, lo + half, panel_q)
        sums[k] = running
    value, err = _accelerate_alternating(sums)
    if err > max(q.abs_tol, 10.0 * q.rel_tol * max(abs(value), 1.0)) and err > 1e-11:
        raise QuadratureError("oscillatory tail did not converge", achieved_tol=err)
    return value
