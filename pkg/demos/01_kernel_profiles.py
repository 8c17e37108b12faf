"""Volterra kernels of fractional motions: evaluation, scaling, variance.

Walks through the kernel family K_H^mu(t, s): the two equivalent displays,
the self-similar scaling law, the small-s limits, the variance profile
sigma^2(t) with its memory/innovation split, and the long-run spread ell.
Runs in a few seconds.
"""

import math

from branching_volterra import (
    KernelSpec,
    c1,
    c1_closed_form,
    c2,
    ell_limit,
    eval_kernel,
    kernel_limit_checks,
    sigma_split,
    sigma_sq,
)

print("== Normalizing constants ==")
for h in (0.25, 0.5, 0.75):
    print(
        f"H={h}: c1 (defining integral) = {c1(h):.12f}, closed form = "
        f"{c1_closed_form(h):.12f}, c2 = {c2(h):.12f}"
    )
print("c1(1/2) equals 1/(2 pi):", abs(c1(0.5) - 1 / (2 * math.pi)) < 1e-12)

print("\n== Kernel displays agree (H > 1/2) ==")
spec = KernelSpec(hurst=0.7, drift_mu=0.0)
for t, s in ((2.0, 0.5), (1.0, 0.9)):
    a = eval_kernel(spec, t, s, form="integrated")
    b = eval_kernel(spec, t, s, form="difference")
    print(f"K(t={t}, s={s}) = {a:.10f}  (difference form: {b:.10f})")

print("\n== Self-similar scaling: K(kt, ks) = k^(H-1/2) K(t, s) for mu = 0 ==")
for kappa in (0.5, 2.0, 3.0):
    lhs = eval_kernel(spec, kappa * 2.0, kappa * 0.5)
    rhs = kappa ** (0.7 - 0.5) * eval_kernel(spec, 2.0, 0.5)
    print(f"kappa={kappa}: {lhs:.10f} vs {rhs:.10f}")

print("\n== Small-s limits of the driftless kernel at t = 1 ==")
for h in (0.25, 0.75):
    rep = kernel_limit_checks(KernelSpec(h))
    print(f"H={h}: target {rep.target:.8f}, trace {[f'{v:.8f}' for v in rep.scaled_values]}")

print("\n== Variance profile ==")
for h in (0.3, 0.5, 0.7):
    spec = KernelSpec(h, 0.0)
    print(f"H={h}, mu=0: sigma^2(2) = {sigma_sq(spec, 2.0):.8f}  (closed form {2.0 ** (2 * h):.8f})")
ou = KernelSpec(0.5, -1.0)
s1, s2 = sigma_split(ou, 4.0, 1.0)
print(f"mean-reverting H=0.5: sigma1^2(4,1) = {s1:.8f}, sigma2^2(4,1) = {s2:.8f}, "
      f"sum = {s1 + s2:.8f} = sigma^2(4) = {sigma_sq(ou, 4.0):.8f}")

print("\n== Long-run spread ==")
print(f"driftless (H=0.3): ell = {ell_limit(KernelSpec(0.3)):.6g} (grows like t^H)")
for mu in (-0.5, -1.0, -2.0):
    spec = KernelSpec(0.5, mu)
    print(f"mu={mu}: ell^2 = {ell_limit(spec) ** 2:.8f}  (classical value {1 / (2 * abs(mu)):.8f})")
