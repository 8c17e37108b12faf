"""Event-driven simulation of branching particles with Volterra-Gaussian motion.

The driving noise of the whole system lives on one global uniform grid of
width ``dt``.  Each particle owns an immutable segment of Gaussian
increments covering its lifetime ``[birth, death)``; branch times are not
snapped to the grid, so a segment's first and last grid cells are partial
pieces, and the increments of one cell are split between parent and child as
independent Gaussians with variances proportional to the sub-lengths (their
sum is a full-variance cell increment, so the concatenated ancestor chain is
a standard Brownian path on the grid).

A particle's position at time ``t`` is the discretized kernel integral

    xi_t = U_t x0 + sum_j k_j(t) * DW_j

where ``k_j(t)`` are the cell-mean kernel weights (one vector per evaluation
time, shared by every particle) and ``DW_j`` is the total increment of cell
``j`` accumulated along the particle's ancestor chain.  Shared ancestry is
summed once per evaluation time through a per-node cache.

Reproducibility: the branching draws come from one per-replicate stream
consumed in deterministic event order, and every particle's motion increments
come from a private stream derived from ``(root_seed, replicate, path)`` via
``numpy.random.SeedSequence``, so results are independent of scheduling and
of which positions are ever evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .branching import BranchingLaw, estimate_F, sample_lifetime, sample_offspring
from .kernels import KernelSpec, sigma_sq
from .quadrature import DEFAULT_QUAD, QuadratureConfig

__all__ = [
    "CappedRunError",
    "Memory",
    "ParticleTree",
    "PathSegment",
    "SimConfig",
    "SimResult",
    "Snapshot",
    "grow_tree",
    "load_memory",
    "path_modulus",
    "position_of",
    "positions_at",
    "simulate",
    "typical_memory_check",
]


class CappedRunError(RuntimeError):
    """Raised when the alive population exceeds the configured cap.

    ``time`` is when the cap was hit; ``tree`` holds the partial genealogy
    grown so far (usable for partial artifacts).
    """

    def __init__(self, time: float, tree: "ParticleTree"):
        super().__init__(
            f"population exceeded max_particles={tree.max_particles} at t={time:.6g}"
        )
        self.time = time
        self.tree = tree


def _piece_layout(b: float, e: float, dt: float):
    """Cut [b, e) at grid-cell edges; returns (cells, ends, lengths)."""
    if e <= b:
        empty_i = np.empty(0, dtype=np.int64)
        empty_f = np.empty(0, dtype=float)
        return empty_i, empty_f, empty_f
    eps = 1e-9 * dt
    c0 = int(math.floor(b / dt + eps))
    c1 = int(math.ceil(e / dt - eps))
    edges = np.arange(c0, c1 + 1, dtype=np.int64) * dt
    starts = np.maximum(edges[:-1], b)
    ends = np.minimum(edges[1:], e)
    cells = np.arange(c0, c1, dtype=np.int64)
    keep = ends - starts > eps
    return cells[keep], ends[keep], (ends - starts)[keep]


class PathSegment:
    """One particle's lifetime worth of grid increments; immutable once the
    draws exist.  ``path`` is the child-ordinal chain from the root."""

    __slots__ = ("index", "parent", "path", "birth", "death", "cells", "ends", "lengths", "draws")

    def __init__(self, index, parent, path, birth, death, dt, horizon):
        self.index = index
        self.parent = parent  # parent node index, -1 for the root
        self.path = path
        self.birth = birth
        self.death = death
        self.cells, self.ends, self.lengths = _piece_layout(birth, min(death, horizon), dt)
        self.draws = None

    @property
    def label(self) -> str:
        """Multi-index label: root ``1``, children append 1-based ordinals."""
        return ".".join(["1"] + [str(o + 1) for o in self.path])

    @property
    def generation(self) -> int:
        return len(self.path)

    def ensure_draws(self, entropy: int, replicate: int, dim: int) -> np.ndarray:
        if self.draws is None:
            ss = np.random.SeedSequence(entropy, spawn_key=(replicate, 2, *self.path))
            z = np.random.default_rng(ss).standard_normal((self.cells.size, dim))
            self.draws = z * np.sqrt(self.lengths)[:, None]
        return self.draws


@dataclass(frozen=True)
class Memory:
    """Fixed driving increments for the initial trajectory piece [0, r)."""

    r: float
    dt: float
    cells: np.ndarray
    draws: np.ndarray  # (n_cells, d)


def load_memory(increments, r: float, dt: float) -> Memory:
    """Install a fixed memory from per-cell increments on the global grid
    restricted to [0, r).  The number of rows must match ``r / dt``."""
    increments = np.atleast_2d(np.asarray(increments, dtype=float))
    n = int(round(r / dt))
    if abs(n * dt - r) > 1e-9 * max(dt, 1.0):
        raise ValueError(f"memory length r={r} is not a multiple of the grid step {dt}")
    cells = np.arange(n, dtype=np.int64)
    if n == 0:
        return Memory(r, dt, cells, np.empty((0, max(increments.shape[1], 1))))
    if increments.shape[0] != n:
        raise ValueError(
            f"grid mismatch: expected {n} increments for [0, {r}) at dt={dt}, "
            f"got {increments.shape[0]}"
        )
    return Memory(r, dt, cells, increments)


def _draw_memory(r: float, dt: float, dim: int, entropy: int, replicate: int) -> Memory:
    n = int(round(r / dt))
    ss = np.random.SeedSequence(entropy, spawn_key=(replicate, 1))
    z = np.random.default_rng(ss).standard_normal((n, dim))
    return Memory(r, dt, np.arange(n, dtype=np.int64), z * math.sqrt(dt))


@dataclass
class ParticleTree:
    """Immutable genealogy of path segments for one replicate.

    The tree depends only on the branching law and seeds, never on the
    kernel, so one tree can be evaluated under several spatial motions."""

    nodes: list
    memory: Memory | None
    r: float
    dt: float
    horizon: float
    dim: int
    entropy: int
    replicate: int
    max_particles: int
    _flat: tuple | None = None
    _bd: tuple | None = None

    def alive_at(self, t: float):
        return [self.nodes[i] for i in self.alive_indices(t)]

    def alive_indices(self, t: float) -> np.ndarray:
        if t < self.r or t > self.horizon:
            raise ValueError(f"time {t} outside [{self.r}, {self.horizon}]")
        births, deaths = self._birth_death()
        return np.nonzero((births <= t) & (t < deaths))[0]

    def _birth_death(self):
        if self._bd is None or self._bd[0].size != len(self.nodes):
            births = np.array([n.birth for n in self.nodes])
            deaths = np.array([n.death for n in self.nodes])
            self._bd = (births, deaths)
        return self._bd

    def ensure_flat(self):
        """Concatenated per-piece arrays for vectorized position passes.

        Increments are drawn from the same per-particle streams as
        :meth:`PathSegment.ensure_draws`, so both evaluation paths produce
        bit-identical values."""
        if self._flat is None:
            n = len(self.nodes)
            offsets = np.zeros(n + 1, dtype=np.int64)
            for i, node in enumerate(self.nodes):
                offsets[i + 1] = offsets[i] + node.cells.size
            total = int(offsets[-1])
            cells = np.empty(total, dtype=np.int64)
            ends = np.empty(total)
            draws = np.empty((total, self.dim))
            for i, node in enumerate(self.nodes):
                lo, hi = offsets[i], offsets[i + 1]
                cells[lo:hi] = node.cells
                ends[lo:hi] = node.ends
                if node.draws is not None:
                    draws[lo:hi] = node.draws
                elif hi > lo:
                    ss = np.random.SeedSequence(
                        self.entropy, spawn_key=(self.replicate, 2, *node.path)
                    )
                    z = np.random.default_rng(ss).standard_normal((hi - lo, self.dim))
                    draws[lo:hi] = z * np.sqrt(node.lengths)[:, None]
            parent = np.array([node.parent for node in self.nodes], dtype=np.int64)
            gen = np.array([len(node.path) for node in self.nodes], dtype=np.int64)
            self._flat = (offsets, cells, ends, draws, parent, gen)
        return self._flat

    def count_at(self, t: float) -> int:
        return len(self.alive_at(t))

    def node_by_label(self, label: str) -> PathSegment:
        for n in self.nodes:
            if n.label == label:
                return n
        raise KeyError(label)

    def events(self):
        """Birth/death records in time order (deaths beyond the horizon are
        not reported)."""
        recs = []
        for n in self.nodes:
            parent = self.nodes[n.parent].label if n.parent >= 0 else None
            recs.append((n.birth, 0, {"type": "birth", "t": n.birth, "id": n.label, "parent": parent}))
            if n.death <= self.horizon:
                k = sum(1 for m in self.nodes if m.parent == n.index)
                recs.append((n.death, 1, {"type": "death", "t": n.death, "id": n.label, "offspring": k}))
        recs.sort(key=lambda r: (r[0], r[1], r[2]["id"]))
        return [r[2] for r in recs]


def grow_tree(
    law: BranchingLaw,
    r: float,
    horizon: float,
    dt: float,
    dim: int,
    entropy: int,
    replicate: int = 0,
    max_particles: int = 2_000_000,
    memory: Memory | None = None,
) -> ParticleTree:
    """Run the branching event loop; spatial increments stay undrawn.

    The per-replicate branching stream is consumed in deterministic event
    order (deaths sorted by time, ties by insertion), so the count process is
    reproducible and independent of any spatial evaluation.
    """
    if dt <= 0.0 or horizon <= r:
        raise ValueError("requires dt > 0 and horizon > r")
    if max_particles < 1:
        raise ValueError("max_particles must be at least 1")
    if memory is not None and (memory.r != r or memory.dt != dt):
        raise ValueError("memory handle does not match (r, dt)")
    if memory is None and r > 0.0:
        memory = _draw_memory(r, dt, dim, entropy, replicate)
    rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(replicate, 0)))
    root = PathSegment(0, -1, (), r, r + float(sample_lifetime(law, rng)), dt, horizon)
    nodes = [root]
    heap = []
    counter = 0
    heappush(heap, (root.death, counter, 0))
    alive = 1
    tree = ParticleTree(nodes, memory, r, dt, horizon, dim, entropy, replicate, max_particles)
    while heap:
        death, _, idx = heappop(heap)
        if death > horizon:
            break
        k = int(sample_offspring(law.offspring, rng))
        alive += k - 1
        if alive > max_particles:
            raise CappedRunError(death, tree)
        for i in range(k):
            child_path = nodes[idx].path + (i,)
            life = float(sample_lifetime(law, rng))
            child = PathSegment(len(nodes), idx, child_path, death, death + life, dt, horizon)
            nodes.append(child)
            counter += 1
            heappush(heap, (child.death, counter, child.index))
    return tree


def _memory_contribution(tree: ParticleTree, weights: np.ndarray) -> np.ndarray:
    if tree.memory is None or tree.memory.cells.size == 0:
        return np.zeros(tree.dim)
    m = tree.memory
    return m.draws.T @ weights[m.cells]


def _own_contribution(tree: ParticleTree, node: PathSegment, weights: np.ndarray, t: float) -> np.ndarray:
    if node.cells.size == 0:
        return np.zeros(tree.dim)
    draws = node.ensure_draws(tree.entropy, tree.replicate, tree.dim)
    m = int(np.searchsorted(node.ends, t + 1e-9 * tree.dt, side="right"))
    if m == 0:
        return np.zeros(tree.dim)
    return draws[:m].T @ weights[node.cells[:m]]


def _chain_sum(tree, node, weights, t, memo, base) -> np.ndarray:
    """Weighted-increment sum along the ancestor chain of ``node`` for pieces
    ending at or before ``t``; ancestors are cached in ``memo`` (their pieces
    all end before the child's birth, hence before ``t``)."""
    pending = []
    idx = node.parent
    while idx >= 0 and idx not in memo:
        pending.append(idx)
        idx = tree.nodes[idx].parent
    acc = base if idx < 0 else memo[idx]
    for j in reversed(pending):
        acc = acc + _own_contribution(tree, tree.nodes[j], weights, t)
        memo[j] = acc
    return acc + _own_contribution(tree, node, weights, t)


def positions_at(
    tree: ParticleTree,
    weights: np.ndarray,
    t: float,
    u_t_x0: np.ndarray,
    alive=None,
) -> np.ndarray:
    """Positions of every alive particle at ``t`` given the weight vector for
    the grid prefix [0, t); shared ancestor prefixes are summed once.

    Vectorized over the whole tree: per-node contributions come from one
    cumulative sum over the concatenated pieces, and the ancestor chain is
    accumulated generation by generation.  ``alive`` may be a node list or an
    index array."""
    if alive is None:
        alive = tree.alive_indices(t)
    if isinstance(alive, np.ndarray):
        indices = alive.astype(np.int64)
    else:
        indices = np.array([node.index for node in alive], dtype=np.int64)
    if indices.size == 0:
        return np.empty((0, tree.dim))
    offsets, cells, ends, draws, parent, gen = tree.ensure_flat()
    base = _memory_contribution(tree, weights)
    # pieces beyond the snapshot time are masked out; their cells may lie
    # past the end of the weight vector, so clip before the lookup
    mask = ends <= t + 1e-9 * tree.dt
    if weights.size:
        w_eff = np.where(mask, weights[np.minimum(cells, weights.size - 1)], 0.0)
    else:
        w_eff = np.zeros(cells.size)
    weighted = draws * w_eff[:, None]
    prefix = np.vstack([np.zeros((1, tree.dim)), np.cumsum(weighted, axis=0)])
    sums = prefix[offsets[1:]] - prefix[offsets[:-1]]
    sums[parent < 0] += base
    for g in range(1, int(gen.max()) + 1 if gen.size else 1):
        idx = np.nonzero(gen == g)[0]
        if idx.size == 0:
            break
        sums[idx] += sums[parent[idx]]
    return u_t_x0 + sums[indices]


def _prefix_grid(t: float, dt: float) -> np.ndarray:
    """Grid covering [0, t): uniform cells plus a partial last cell when ``t``
    is off-grid (used for evaluation at branch times)."""
    n = int(math.floor(t / dt + 1e-9))
    grid = np.arange(n + 1, dtype=float) * dt
    if t - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, t)
    return grid


@dataclass(frozen=True)
class Snapshot:
    """Atomic-measure view at one time: labels, positions, alive count."""

    t: float
    labels: tuple
    positions: np.ndarray | None
    count: int


@dataclass(frozen=True)
class SimConfig:
    """Full specification of one simulation run."""

    kernel: KernelSpec
    law: BranchingLaw
    x0: np.ndarray
    grid_dt: float
    horizon_T: float
    snapshot_times: tuple
    memory_length_r: float = 0.0
    max_particles: int = 2_000_000
    root_seed: int = 0
    with_positions: bool = True
    memory: Memory | None = None
    quad: QuadratureConfig = field(default_factory=lambda: DEFAULT_QUAD)

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if self.x0.size != self.kernel.dim:
            raise ValueError(f"x0 must have dimension {self.kernel.dim}")
        if self.grid_dt <= 0.0:
            raise ValueError("grid_dt must be positive")
        if self.horizon_T <= self.memory_length_r:
            raise ValueError("horizon_T must exceed memory_length_r")
        if self.max_particles < 1:
            raise ValueError("max_particles must be at least 1")
        times = tuple(float(t) for t in self.snapshot_times)
        if any(t < self.memory_length_r or t > self.horizon_T for t in times):
            raise ValueError("snapshot_times must lie in [memory_length_r, horizon_T]")
        if list(times) != sorted(times):
            raise ValueError("snapshot_times must be increasing")
        for t in times:
            if abs(t / self.grid_dt - round(t / self.grid_dt)) > 1e-6:
                raise ValueError(f"snapshot time {t} is not on the grid (dt={self.grid_dt})")
        r = self.memory_length_r
        if abs(r / self.grid_dt - round(r / self.grid_dt)) > 1e-6:
            raise ValueError(f"memory length {r} is not on the grid (dt={self.grid_dt})")
        object.__setattr__(self, "snapshot_times", times)


@dataclass
class SimResult:
    """Snapshots, genealogy, and the count-martingale estimate of one run."""

    config: SimConfig
    replicate: int
    tree: ParticleTree
    snapshots: list
    f_estimate: float | None

    def events(self):
        return self.tree.events()

    def position_of(self, particle, t: float) -> np.ndarray:
        return position_of(self, particle, t)


def _snapshot_weights(config: SimConfig, t: float, weight_table=None) -> np.ndarray:
    key = int(round(t / config.grid_dt))
    if weight_table is not None and key in weight_table:
        return weight_table[key]
    grid = _prefix_grid(t, config.grid_dt)
    w = config.kernel.cell_weights(t, grid, config.quad) if grid.size > 1 else np.empty(0)
    if weight_table is not None:
        weight_table[key] = w
    return w


def simulate(config: SimConfig, replicate: int = 0, weight_table=None) -> SimResult:
    """Run one replicate: grow the genealogy, then take snapshots.

    Raises :class:`CappedRunError` (with the partial tree attached) when the
    alive population exceeds ``max_particles``.
    """
    tree = grow_tree(
        config.law,
        config.memory_length_r,
        config.horizon_T,
        config.grid_dt,
        config.kernel.dim,
        config.root_seed,
        replicate,
        config.max_particles,
        config.memory,
    )
    snapshots = []
    for t in config.snapshot_times:
        alive = tree.alive_at(t)
        labels = tuple(n.label for n in alive)
        positions = None
        if config.with_positions:
            w = _snapshot_weights(config, t, weight_table)
            u_t_x0 = config.kernel.u_factor(t) * config.x0
            positions = positions_at(tree, w, t, u_t_x0, alive)
        snapshots.append(Snapshot(t, labels, positions, len(alive)))
    f_est = None
    if config.law.beta > 0.0 and snapshots:
        counts = [(s.t, s.count) for s in snapshots]
        f_est = estimate_F(counts, config.law.beta, config.memory_length_r).value
    return SimResult(config, replicate, tree, snapshots, f_est)


def position_of(result: SimResult, particle, t: float) -> np.ndarray:
    """Position of one particle at ``t``; ``t`` must be on the grid or be a
    branch time of the particle's chain (then the history is fully drawn).

    Deterministic function of the ancestor increment chain: two particles
    sharing their ancestry up to ``t`` get identical values.  For ``t``
    before the particle's birth this evaluates the combined ancestral
    trajectory (so siblings agree at their birth time, and any two particles
    agree up to the death of their last common ancestor); a dead particle is
    a domain error.
    """
    tree = result.tree
    config = result.config
    node = tree.node_by_label(particle) if isinstance(particle, str) else particle
    if not (0.0 < t < node.death):
        raise ValueError(f"particle {node.label} has no trajectory at t={t}")
    grid = _prefix_grid(t, config.grid_dt)
    w = config.kernel.cell_weights(t, grid, config.quad) if grid.size > 1 else np.empty(0)
    # the chain must cover [0, t) exactly with fully drawn pieces
    covered = tree.memory.r if tree.memory is not None else 0.0
    idx = node.index
    while idx >= 0:
        n = tree.nodes[idx]
        m = int(np.searchsorted(n.ends, t + 1e-9 * tree.dt, side="right"))
        covered += float(np.sum(n.lengths[:m]))
        idx = n.parent
    if abs(covered - t) > 1e-6 * max(t, 1.0):
        raise ValueError(
            f"time {t} falls inside an undrawn increment piece; evaluate on the "
            f"grid or at a branch time of the particle"
        )
    base = _memory_contribution(tree, w)
    value = _chain_sum(tree, node, w, t, {}, base)
    return config.kernel.u_factor(t) * config.x0 + value


@dataclass(frozen=True)
class TypicalMemoryReport:
    """Trace of |∫_0^r K(t,u) dW_u| / sigma(t) over probe horizons."""

    probe_times: tuple
    ratios: tuple
    decreasing: bool


def typical_memory_check(
    memory: Memory,
    spec: KernelSpec,
    probe_times=(10.0, 100.0, 1000.0),
    q: QuadratureConfig | None = None,
) -> TypicalMemoryReport:
    """Evaluate the discrete memory-to-spread ratio at increasing horizons.

    A memory is typical when the ratio tends to zero; empty memories give an
    identically zero trace.
    """
    q = q or DEFAULT_QUAD
    ratios = []
    for t in probe_times:
        if t <= memory.r:
            raise ValueError("probe times must exceed the memory length")
        if memory.cells.size == 0:
            ratios.append(0.0)
            continue
        grid = np.arange(memory.cells.size + 1, dtype=float) * memory.dt
        w = spec.cell_weights(t, grid, q)
        num = float(np.linalg.norm(memory.draws.T @ w))
        ratios.append(num / math.sqrt(sigma_sq(spec, t, q)))
    ratios = tuple(ratios)
    decreasing = all(b < a or a == 0.0 for a, b in zip(ratios, ratios[1:]))
    return TypicalMemoryReport(tuple(probe_times), ratios, decreasing)


@dataclass(frozen=True)
class PathModulusReport:
    """Grid-point proxy for the path modulus over one time window."""

    t_lo: float
    t_hi: float
    labels: tuple
    displacements: np.ndarray
    exceedance: float | None


def path_modulus(result: SimResult, t_lo: float, t_hi: float, eps: float | None = None) -> PathModulusReport:
    """Max displacement over grid points in [t_lo, t_hi] per ancestral-chain
    path, plus the exceedance frequency for ``eps``.

    Each particle alive at ``t_hi`` contributes the trajectory of its
    ancestor chain across the window (the chain is a realization of the
    generic particle path, so for non-branching configurations this is the
    single particle's path).  The supremum over continuous time is
    approximated by the grid-point maximum; the proxy is biased low.
    """
    config, tree = result.config, result.tree
    dt = config.grid_dt
    for t in (t_lo, t_hi):
        if abs(t / dt - round(t / dt)) > 1e-6:
            raise ValueError(f"window endpoint {t} is not on the grid")
    if t_hi < t_lo:
        raise ValueError("requires t_lo <= t_hi")
    survivors = tree.alive_at(t_hi)
    labels = tuple(n.label for n in survivors)
    if t_hi == t_lo or not survivors:
        disp = np.zeros(len(survivors))
        exc = float(np.mean(disp >= eps)) if (eps is not None and survivors) else None
        return PathModulusReport(t_lo, t_hi, labels, disp, exc)
    n_lo, n_hi = int(round(t_lo / dt)), int(round(t_hi / dt))
    ts = np.arange(n_lo, n_hi + 1) * dt
    paths = np.empty((len(survivors), ts.size, tree.dim))
    for k, t in enumerate(ts):
        grid = _prefix_grid(t, dt)
        w = config.kernel.cell_weights(t, grid, config.quad) if grid.size > 1 else np.empty(0)
        u_t_x0 = config.kernel.u_factor(t) * config.x0
        paths[:, k, :] = positions_at(tree, w, t, u_t_x0, survivors)
    if tree.dim == 1:
        disp = paths[:, :, 0].max(axis=1) - paths[:, :, 0].min(axis=1)
    else:
        diffs = paths[:, :, None, :] - paths[:, None, :, :]
        disp = np.linalg.norm(diffs, axis=-1).max(axis=(1, 2))
    exc = float(np.mean(disp >= eps)) if eps is not None else None
    return PathModulusReport(t_lo, t_hi, labels, disp, exc)
