"""Reproducible parallel replicate execution.

Replicates are the unit of parallelism.  Every replicate's randomness is
derived from ``(root_seed, replicate_index)`` alone, results are keyed by
replicate index and reduced in index order, so any worker count (including
serial execution) produces identical numbers.

Because the genealogy is independent of the spatial motion, one tree per
replicate is evaluated under every requested motion; motions share the same
underlying driving increments (common random numbers), which is what makes
Hurst-universality and grid-refinement comparisons sharp.  A coarse
discretization is evaluated on the same fine-grid increments by expanding
the coarse cell weights (each coarse weight applied to the fine increments
it covers), so a refinement study measures the pure discretization effect.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .branching import BranchingLaw
from .particles import Memory, grow_tree, positions_at
from .quadrature import DEFAULT_QUAD, QuadratureConfig

__all__ = ["EnsemblePlan", "EnsembleResult", "MotionTask", "resolve_workers", "run_ensemble"]

_PAYLOAD = None


@dataclass(frozen=True)
class MotionTask:
    """One spatial motion to evaluate on the shared trees.

    ``weight_expand`` > 1 evaluates the motion at a coarser grid step
    ``weight_expand * dt`` by expanding the coarse cell weights over the fine
    increments (times must be multiples of the coarse step)."""

    name: str
    motion: object  # KernelSpec or any object with cell_weights/u_factor/dim
    x0: tuple
    times: tuple
    weight_expand: int = 1


@dataclass(frozen=True)
class EnsemblePlan:
    """Everything a worker needs, fully picklable."""

    law: BranchingLaw
    r: float
    horizon: float
    dt: float
    dim: int
    root_seed: int
    tasks: tuple
    fs: tuple
    max_particles: int = 2_000_000
    memory: Memory | None = None
    quad: QuadratureConfig = field(default_factory=lambda: DEFAULT_QUAD)
    weights: dict = field(default_factory=dict)  # (task_name, time) -> np.ndarray


def _task_weight(plan: EnsemblePlan, task: MotionTask, t: float) -> np.ndarray:
    n_fine = int(round(t / plan.dt))
    if task.weight_expand == 1:
        grid = np.arange(n_fine + 1, dtype=float) * plan.dt
        return task.motion.cell_weights(t, grid, plan.quad)
    k = task.weight_expand
    if n_fine % k:
        raise ValueError(f"time {t} is not on the coarse grid (expand={k})")
    coarse = np.arange(n_fine // k + 1, dtype=float) * (plan.dt * k)
    w = task.motion.cell_weights(t, coarse, plan.quad)
    return np.repeat(w, k)


def build_weights(plan: EnsemblePlan) -> EnsemblePlan:
    """Precompute all weight vectors once (they are motion data, shared by
    every particle and replicate).  Without test functions the run is
    counts-only and needs no weights."""
    weights = {}
    if plan.fs:
        for task in plan.tasks:
            for t in task.times:
                weights[(task.name, t)] = _task_weight(plan, task, t)
    return EnsemblePlan(
        law=plan.law,
        r=plan.r,
        horizon=plan.horizon,
        dt=plan.dt,
        dim=plan.dim,
        root_seed=plan.root_seed,
        tasks=plan.tasks,
        fs=plan.fs,
        max_particles=plan.max_particles,
        memory=plan.memory,
        quad=plan.quad,
        weights=weights,
    )


def _evaluate_replicate(plan: EnsemblePlan, rep: int):
    tree = grow_tree(
        plan.law,
        plan.r,
        plan.horizon,
        plan.dt,
        plan.dim,
        plan.root_seed,
        rep,
        plan.max_particles,
        plan.memory,
    )
    all_times = sorted({t for task in plan.tasks for t in task.times})
    alive_by_time = {t: tree.alive_indices(t) for t in all_times}
    out = {}
    for task in plan.tasks:
        x0 = np.asarray(task.x0, dtype=float)
        for t in task.times:
            alive = alive_by_time[t]
            count = int(alive.size)
            if count and plan.fs:
                w = plan.weights[(task.name, t)]
                pos = positions_at(tree, w, t, task.motion.u_factor(t) * x0, alive)
                xf = tuple(float(np.sum(f(pos))) for f in plan.fs)
            else:
                xf = tuple(0.0 for _ in plan.fs)
            out[(task.name, t)] = (count, xf)
    return rep, out


def _init_pool(plan):
    global _PAYLOAD
    _PAYLOAD = plan


def _pool_chunk(reps):
    return [_evaluate_replicate(_PAYLOAD, rep) for rep in reps]


@dataclass
class EnsembleResult:
    """Counts and test-function sums, arrays indexed (replicate, time)."""

    plan: EnsemblePlan
    counts: dict  # task name -> (n_reps, n_times)
    xf: dict  # (task name, f index) -> (n_reps, n_times)
    times: dict  # task name -> tuple of times

    def samples(self, task_name: str, f_index: int = 0):
        """Reduced per-replicate triples consumable by ``lln_statistics``."""
        ts = np.asarray(self.times[task_name], dtype=float)
        cs = self.counts[task_name]
        xs = self.xf[(task_name, f_index)]
        return [(ts, cs[i], xs[i]) for i in range(cs.shape[0])]


def resolve_workers(requested, env_var: str = "BVSIM_THREADS") -> int:
    """Worker count: explicit request, else env override, else cpu count."""
    env = os.environ.get(env_var)
    if requested in (None, "auto"):
        if env is not None:
            return max(1, int(env))
        return max(1, min(os.cpu_count() or 1, 8))
    return max(1, int(requested))


def run_ensemble(plan: EnsemblePlan, replicates: int, workers: int = 1, chunk: int = 8) -> EnsembleResult:
    """Evaluate ``replicates`` independent trees under every motion task.

    Results are identical for any ``workers`` value: replicate randomness is
    index-derived and the reduction is done in index order."""
    plan = build_weights(plan) if not plan.weights else plan
    reps = list(range(replicates))
    results: dict[int, dict] = {}
    if workers <= 1:
        for rep in reps:
            rep_i, data = _evaluate_replicate(plan, rep)
            results[rep_i] = data
    else:
        chunks = [reps[i : i + chunk] for i in range(0, len(reps), chunk)]
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_pool, initargs=(plan,)) as ex:
            for batch in ex.map(_pool_chunk, chunks):
                for rep_i, data in batch:
                    results[rep_i] = data
    counts: dict = {}
    xf: dict = {}
    times: dict = {}
    for task in plan.tasks:
        times[task.name] = task.times
        c = np.empty((replicates, len(task.times)))
        xs = [np.empty((replicates, len(task.times))) for _ in plan.fs]
        for i in range(replicates):
            for j, t in enumerate(task.times):
                count, vals = results[i][(task.name, t)]
                c[i, j] = count
                for k, v in enumerate(vals):
                    xs[k][i, j] = v
        counts[task.name] = c
        for k in range(len(plan.fs)):
            xf[(task.name, k)] = xs[k]
    return EnsembleResult(plan, counts, xf, times)
