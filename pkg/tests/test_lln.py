import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad as scipy_quad

from branching_volterra.branching import BranchingLaw, OffspringDistribution
from branching_volterra.kernels import KernelSpec
from branching_volterra.lln import (
    ExpFlow,
    LimitTarget,
    check_conditions,
    default_delta,
    default_probes,
    limit_target,
    lln_statistics,
    sum_pmax_trace,
    transform_Tf,
    u_infinity_demo,
)
from branching_volterra.moments import TestFunction
from branching_volterra.runner import EnsemblePlan, MotionTask, run_ensemble

ALWAYS_TWO = BranchingLaw(OffspringDistribution.deterministic(2), 1.0)
FBOX = TestFunction.box([-1.0], [1.0])


# -- limit functional ----------------------------------------------------------


def test_transform_constant_finite_spread():
    tgt = LimitTarget(math.sqrt(0.5), np.zeros(1), 1)
    assert transform_Tf(TestFunction.constant(1.0), tgt) == pytest.approx(math.sqrt(0.5))
    tgt3 = LimitTarget(2.0, np.zeros(3), 3)
    assert transform_Tf(TestFunction.constant(1.0), tgt3) == pytest.approx(8.0)


def test_transform_infinite_spread_box():
    tgt = LimitTarget(math.inf, np.zeros(1), 1)
    assert transform_Tf(FBOX, tgt) == pytest.approx(2.0 / math.sqrt(2.0 * math.pi))


def test_transform_constant_infinite_spread_diverges():
    tgt = LimitTarget(math.inf, np.zeros(1), 1)
    with pytest.raises(ValueError):
        transform_Tf(TestFunction.constant(1.0), tgt)


def test_transform_finite_spread_against_quadrature():
    ell = math.sqrt(0.5)
    tgt = LimitTarget(ell, np.zeros(1), 1)
    ref, _ = scipy_quad(
        lambda y: math.exp(-0.5 * (y / ell) ** 2) * FBOX(np.array([[y]]))[0], -1.0, 1.0
    )
    ref /= math.sqrt(2.0 * math.pi)
    assert transform_Tf(FBOX, tgt) == pytest.approx(ref, rel=1e-9)


def test_transform_nonzero_flow_limit():
    # shifted Gaussian weight against a quadrature oracle
    z = np.array([0.7])
    tgt = LimitTarget(1.5, z, 1)
    ref, _ = scipy_quad(
        lambda y: math.exp(-0.5 * (z[0] - y / 1.5) ** 2) * FBOX(np.array([[y]]))[0], -1.0, 1.0
    )
    ref /= math.sqrt(2.0 * math.pi)
    assert transform_Tf(FBOX, tgt) == pytest.approx(ref, rel=1e-9)


@given(
    width=st.floats(min_value=0.2, max_value=3.0),
    amp=st.floats(min_value=0.2, max_value=3.0),
)
@settings(max_examples=15, deadline=None)
def test_transform_infinite_spread_is_scaled_lebesgue(width, amp):
    tgt = LimitTarget(math.inf, np.zeros(1), 1)
    pref = (2.0 * math.pi) ** -0.5
    f1 = TestFunction.box([-width], [width])
    assert transform_Tf(f1, tgt) == pytest.approx(pref * f1.lebesgue_integral(1), rel=1e-12)
    f2 = TestFunction.gaussian(amp, width)
    assert transform_Tf(f2, tgt) == pytest.approx(pref * f2.lebesgue_integral(1), rel=1e-12)


def test_limit_target_of_kernel_family():
    tgt = limit_target(KernelSpec(0.5, -1.0), x0=2.0)
    assert tgt.ell == pytest.approx(math.sqrt(0.5), rel=1e-9)
    assert np.all(tgt.u_infinity_x0 == 0.0)
    assert math.isinf(limit_target(KernelSpec(0.3, 0.0)).ell)


# -- ensemble statistics --------------------------------------------------------


def _fake_samples():
    times = np.array([1.0, 2.0])
    return [
        (times, np.array([2.0, 5.0]), np.array([1.0, 2.5])),
        (times, np.array([1.0, 0.0]), np.array([0.5, 0.0])),  # extinct at horizon
        (times, np.array([3.0, 7.0]), np.array([2.0, 3.0])),
    ]


def test_ratio_is_arithmetic_quotient_of_scaled_pair():
    spec = KernelSpec(0.5, 0.0)
    rep = lln_statistics(_fake_samples(), spec, ALWAYS_TWO, FBOX)
    # survivors: replicates 0 and 2; check the F-cancellation identity
    times = rep.times
    sig = np.sqrt(times)
    beta = 1.0
    for i, (counts, xf) in enumerate([(np.array([2.0, 5.0]), np.array([1.0, 2.5])),
                                      (np.array([3.0, 7.0]), np.array([2.0, 3.0]))]):
        scaled_f = np.exp(-beta * times) * sig * xf
        scaled_n = np.exp(-beta * times) * counts
        ratio = sig * xf / counts
        assert np.allclose(ratio, scaled_f / scaled_n)
    assert rep.n_surviving == 2
    assert rep.n_replicates == 3


def test_degenerate_report_when_all_extinct():
    times = np.array([1.0])
    samples = [(times, np.array([0.0]), np.array([0.0]))] * 3
    rep = lln_statistics(samples, KernelSpec(0.5), ALWAYS_TWO, FBOX)
    assert rep.degenerate
    assert rep.n_surviving == 0


def test_lln_statistics_requires_supercritical():
    crit = BranchingLaw(OffspringDistribution.deterministic(1), 1.0)
    with pytest.raises(Exception):
        lln_statistics(_fake_samples(), KernelSpec(0.5), crit, FBOX)


def test_small_ensemble_ratio_near_target():
    plan = EnsemblePlan(
        law=ALWAYS_TWO, r=0.0, horizon=5.0, dt=0.02, dim=1, root_seed=202,
        tasks=(MotionTask("bm", KernelSpec(0.5), (0.0,), (5.0,)),), fs=(FBOX,),
    )
    result = run_ensemble(plan, 48, workers=1)
    rep = lln_statistics(result.samples("bm"), KernelSpec(0.5), ALWAYS_TWO, FBOX)
    assert rep.n_surviving == 48
    assert rep.ratio_mean[-1] == pytest.approx(rep.ratio_target, rel=0.08)


# -- condition checkers ----------------------------------------------------------


def test_default_schedules():
    assert default_delta(0.5) == pytest.approx(0.45)
    assert default_delta(0.3) == pytest.approx(0.9 * 2 * 0.2 / 1.4)
    assert default_delta(0.7) == pytest.approx(default_delta(0.3))
    assert default_probes(KernelSpec(0.5)) == (32.0, 64.0, 128.0, 256.0)
    assert default_probes(KernelSpec(0.5, -1.0)) == (4.0, 8.0, 16.0, 32.0, 64.0)


def test_driftless_condition_traces():
    rep = check_conditions(KernelSpec(0.5), ALWAYS_TWO, x0=1.0, lattice_n_max=2**12)
    assert rep.b_kind == "sqrt"
    assert rep.decay_decreasing
    assert rep.memory_cut_decreasing and rep.memory_cut_nolog_decreasing
    assert math.isinf(rep.ell)
    # closed-form value of the memory-cut trace at t = 1e4
    rep2 = check_conditions(
        KernelSpec(0.5), ALWAYS_TWO, x0=1.0, probes=(1e4, 2e4), lattice_n_max=64
    )
    assert rep2.memory_cut_trace[0] == pytest.approx(10 * math.sqrt(math.log(1e4)) / 100, rel=1e-9)


def test_exponential_beats_polynomial_decay():
    rep = check_conditions(
        KernelSpec(0.7), ALWAYS_TWO, x0=1.0, probes=(5.0, 10.0, 20.0), lattice_n_max=64
    )
    expected = [math.exp(-t) * t**0.7 for t in (5.0, 10.0, 20.0)]
    assert np.allclose(rep.decay_trace, expected, rtol=1e-10)
    assert rep.decay_decreasing


def test_reverting_condition_traces():
    rep = check_conditions(KernelSpec(0.5, -1.0), ALWAYS_TWO, x0=1.0, lattice_n_max=2**12)
    assert rep.b_kind == "power" and rep.delta == pytest.approx(0.45)
    assert rep.decay_decreasing
    assert rep.memory_cut_decreasing and rep.memory_cut_nolog_decreasing
    assert rep.ell == pytest.approx(math.sqrt(0.5), rel=1e-9)
    # flow trace tends to zero (U_inf = 0)
    assert rep.flow_trace[-1] < rep.flow_trace[0]
    assert rep.flow_trace[-1] < 1e-10


def test_lattice_gap_and_spread_ratio_traces():
    rep = check_conditions(KernelSpec(0.5), ALWAYS_TWO, x0=1.0, lattice_n_max=2**14)
    assert rep.tn_gaps[-1] < rep.tn_gaps[0]  # t_{n+1} - t_n -> 0
    assert abs(rep.tn_sigma_ratio[-1] - 1.0) < abs(rep.tn_sigma_ratio[0] - 1.0)


def test_path_modulus_exceedance_decreases():
    ns, exc, terms, partial = sum_pmax_trace(
        KernelSpec(0.5), ns=(4, 16, 36, 64, 100), eps=0.25, replicates=200, dt=0.02, root_seed=3
    )
    assert exc[0] > exc[-1]
    assert all(b <= a + 0.05 for a, b in zip(exc, exc[1:]))  # monotone within MC noise
    assert np.all(np.diff(partial) >= 0.0)


# -- expanding-flow demo ----------------------------------------------------------


def test_exp_flow_weights_and_variance():
    flow = ExpFlow(1)
    grid = np.array([0.0, 0.5, 1.0])
    w = flow.cell_weights(2.0, grid)
    assert w[0] == pytest.approx((math.exp(0.5) - 1.0) / 0.5)
    assert flow.sigma_sq(1.0) == pytest.approx((math.e**2 - 1.0) / 2.0)


def test_u_infinity_demo_report():
    law = BranchingLaw(OffspringDistribution.deterministic(2), 2.0)  # beta = 2 > d = 1
    demo = u_infinity_demo([0.0], law, FBOX)
    assert demo.sigma_sq_at_1 == pytest.approx((math.e**2 - 1.0) / 2.0, rel=1e-12)
    assert demo.u_ratio_trace[-1] == pytest.approx(math.sqrt(2.0), abs=1e-4)
    assert demo.target == pytest.approx(2.0 / math.sqrt(2.0 * math.pi), rel=1e-12)
    assert not demo.beta_warning
    weak = u_infinity_demo([0.0], ALWAYS_TWO, FBOX)  # beta = 1 = d
    assert weak.beta_warning


def test_u_infinity_demo_monte_carlo():
    law = BranchingLaw(OffspringDistribution.deterministic(2), 2.0)
    demo = u_infinity_demo(
        [0.0], law, FBOX, mc={"t": 3.0, "dt": 0.02, "replicates": 80, "seed": 4}
    )
    assert abs(demo.mc_scaled_mean - demo.target) < 3 * demo.mc_scaled_se


# -- runner ------------------------------------------------------------------------


def test_run_ensemble_worker_invariance_and_common_randomness():
    tasks = (
        MotionTask("h03", KernelSpec(0.3), (0.0,), (2.0,)),
        MotionTask("h07", KernelSpec(0.7), (0.0,), (2.0,)),
        MotionTask("h07c", KernelSpec(0.7), (0.0,), (2.0,), weight_expand=2),
    )
    plan = EnsemblePlan(
        law=ALWAYS_TWO, r=0.0, horizon=2.0, dt=0.02, dim=1, root_seed=11,
        tasks=tasks, fs=(FBOX, TestFunction.constant(1.0)),
    )
    serial = run_ensemble(plan, 16, workers=1)
    pooled = run_ensemble(plan, 16, workers=3)
    for key in serial.counts:
        assert np.array_equal(serial.counts[key], pooled.counts[key])
    for key in serial.xf:
        assert np.array_equal(serial.xf[key], pooled.xf[key])
    # one genealogy per replicate, shared across motions
    assert np.array_equal(serial.counts["h03"], serial.counts["h07"])
    # constant test function just counts particles
    assert np.array_equal(serial.xf[("h07", 1)], serial.counts["h07"])
    # coarse weights on the same fine increments: strongly coupled
    fine = serial.xf[("h07", 0)][:, 0]
    coarse = serial.xf[("h07c", 0)][:, 0]
    assert np.corrcoef(fine, coarse)[0, 1] > 0.99


def test_counts_only_ensemble_skips_weights():
    plan = EnsemblePlan(
        law=ALWAYS_TWO, r=0.0, horizon=3.0, dt=0.1, dim=1, root_seed=5,
        tasks=(MotionTask("count", KernelSpec(0.5), (0.0,), (1.5, 3.0)),), fs=(),
    )
    result = run_ensemble(plan, 32, workers=1)
    counts = result.counts["count"]
    assert counts.shape == (32, 2)
    assert counts.min() >= 1  # always-two never dies out
