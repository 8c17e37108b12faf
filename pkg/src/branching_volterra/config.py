"""Experiment configuration: a flat key-value file with sections.

Files are the reproducibility unit; command-line flags override single keys.
The format is INI with sections [kernel], [branching], [simulation], [lln],
[moments], [kernel_table], [output], [quadrature].  Every artifact embeds
the fully resolved configuration, and a configuration round-trips through
``to_ini`` / ``from_ini`` losslessly (floats are written with ``repr``).

Offspring laws and test functions use a compact call syntax::

    offspring = binary(0.25, 0.75)      # also deterministic(k), geometric(q),
                                        # poisson(m), table(p0, p1, ...)
    test_functions = box(-1, 1); constant(1)
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field

from .branching import BranchingLaw, OffspringDistribution
from .kernels import KernelSpec
from .moments import TestFunction
from .quadrature import QuadratureConfig

__all__ = ["ConfigError", "ExperimentConfig", "parse_offspring", "parse_test_function"]


class ConfigError(ValueError):
    """Invalid configuration; carries the dotted key path that failed."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_CALL_RE = re.compile(r"^\s*([a-zA-Z_][a-zA-Z0-9_]*)\s*\(([^)]*)\)\s*$")


def _parse_call(text: str, key: str) -> tuple[str, list[float]]:
    m = _CALL_RE.match(text)
    if not m:
        raise ConfigError(key, f"expected name(args), got {text!r}")
    name = m.group(1).lower()
    args = [a.strip() for a in m.group(2).split(",") if a.strip()]
    try:
        return name, [float(a) for a in args]
    except ValueError as exc:
        raise ConfigError(key, f"non-numeric argument in {text!r}") from exc


def parse_offspring(text: str, key: str = "branching.offspring") -> OffspringDistribution:
    name, args = _parse_call(text, key)
    try:
        if name == "deterministic":
            return OffspringDistribution.deterministic(int(args[0]))
        if name == "binary":
            return OffspringDistribution.binary(args[0], args[1])
        if name == "geometric":
            return OffspringDistribution.geometric(args[0])
        if name == "poisson":
            return OffspringDistribution.poisson(args[0])
        if name == "table":
            return OffspringDistribution.from_table(args)
    except (ValueError, IndexError) as exc:
        raise ConfigError(key, str(exc)) from exc
    raise ConfigError(key, f"unknown offspring law {name!r}")


def offspring_to_text(dist: OffspringDistribution) -> str:
    if dist.kind == "deterministic":
        return f"deterministic({int(dist.params[0])})"
    if dist.kind == "binary":
        return f"binary({dist.params[0]!r}, {dist.params[1]!r})"
    if dist.kind == "geometric":
        return f"geometric({dist.params[0]!r})"
    if dist.kind == "poisson":
        return f"poisson({dist.params[0]!r})"
    return "table(" + ", ".join(repr(p) for p in dist.table) + ")"


def parse_test_function(text: str, dim: int, key: str = "lln.test_functions") -> TestFunction:
    name, args = _parse_call(text, key)
    try:
        if name == "constant":
            return TestFunction.constant(args[0] if args else 1.0)
        if name == "box":
            lo, hi = args[0], args[1]
            return TestFunction.box([lo] * dim, [hi] * dim)
        if name == "gaussian":
            amp = args[0] if args else 1.0
            width = args[1] if len(args) > 1 else 1.0
            center = args[2] if len(args) > 2 else 0.0
            return TestFunction.gaussian(amp, width, center, dim)
        if name == "envelope":
            return TestFunction.envelope(args[0])
    except (ValueError, IndexError) as exc:
        raise ConfigError(key, str(exc)) from exc
    raise ConfigError(key, f"unknown test function {name!r}")


def test_function_to_text(f: TestFunction) -> str:
    if f.kind == "constant":
        return f"constant({f.value!r})"
    if f.kind == "box":
        return f"box({f.lo[0]!r}, {f.hi[0]!r})"
    if f.kind == "gaussian":
        return f"gaussian({f.amplitude!r}, {f.width!r}, {f.center[0]!r})"
    return f"envelope({f.scale!r})"


@dataclass
class ExperimentConfig:
    """Everything one experiment needs, resolved and validated."""

    kernel: KernelSpec
    law: BranchingLaw
    x0: tuple = (0.0,)
    grid_dt: float = 0.01
    horizon_t: float = 4.0
    snapshot_times: tuple = ()
    memory_length_r: float = 0.0
    max_particles: int = 2_000_000
    root_seed: int = 0
    replicates: int = 1
    threads: object = "auto"
    with_positions: bool = True
    test_functions: tuple = (TestFunction.box([-1.0], [1.0]),)
    b_schedule: str | None = None
    delta: float | None = None
    kappa: float = 0.5
    probe_times: tuple = ()  # empty selects the kernel-aware default grid
    ratio_rel_tol: float = 0.05
    moments_t: float | None = None
    moments_s: float | None = None
    table_times: tuple = (1.0, 2.0, 4.0)
    table_s_count: int = 8
    output_dir: str = "out"
    output_prefix: str = "run"
    dump_snapshots: bool = False
    dump_events: bool = False
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("simulation.replicates", "must be at least 1")
        if not self.snapshot_times:
            self.snapshot_times = (self.horizon_t,)

    # -- parsing ----------------------------------------------------------

    @classmethod
    def from_ini(cls, text_or_path, overrides=()) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            if "\n" in str(text_or_path):
                parser.read_string(str(text_or_path))
            else:
                with open(text_or_path) as fh:
                    parser.read_file(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {text_or_path!r}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError("config", f"parse error: {exc}") from exc
        for item in overrides:
            if "=" not in item:
                raise ConfigError("--set", f"expected section.key=value, got {item!r}")
            path, value = item.split("=", 1)
            if "." not in path:
                raise ConfigError("--set", f"expected section.key=value, got {item!r}")
            section, key = path.strip().split(".", 1)
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, key.strip(), value.strip())
        return cls._from_parser(parser)

    @classmethod
    def _from_parser(cls, p: configparser.ConfigParser) -> "ExperimentConfig":
        def get(section, key, conv, default, check=None):
            if not p.has_option(section, key):
                if default is _REQUIRED:
                    raise ConfigError(f"{section}.{key}", "missing required key")
                return default
            raw = p.get(section, key)
            try:
                value = conv(raw)
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from exc
            if check is not None:
                msg = check(value)
                if msg:
                    raise ConfigError(f"{section}.{key}", f"{msg}, got {raw}")
            return value

        _REQUIRED = object()
        hurst = get("kernel", "hurst", float, _REQUIRED, lambda v: None if 0 < v < 1 else "must lie in (0, 1)")
        mu = get("kernel", "drift_mu", float, 0.0)
        lam = get("kernel", "intensity_lambda", float, 1.0, lambda v: None if v > 0 else "must be positive")
        dim = get("kernel", "dim", int, 1, lambda v: None if v >= 1 else "must be a positive integer")
        kernel = KernelSpec(hurst, mu, lam, dim)
        offspring = get("branching", "offspring", lambda s: parse_offspring(s), _REQUIRED)
        rate_v = get("branching", "rate_v", float, 1.0, lambda v: None if v > 0 else "must be positive")
        law = BranchingLaw(offspring, rate_v)
        floats_list = lambda s: tuple(float(x) for x in re.split(r"[,\s]+", s.strip()) if x)
        x0 = get("simulation", "x0", floats_list, tuple([0.0] * dim))
        if len(x0) == 1 and dim > 1:
            x0 = tuple([x0[0]] * dim)
        if len(x0) != dim:
            raise ConfigError("simulation.x0", f"needs {dim} components")
        grid_dt = get("simulation", "grid_dt", float, 0.01, lambda v: None if v > 0 else "must be positive")
        horizon = get("simulation", "horizon_t", float, 4.0, lambda v: None if v > 0 else "must be positive")
        snaps = get("simulation", "snapshot_times", floats_list, ())
        mem_r = get("simulation", "memory_length_r", float, 0.0, lambda v: None if v >= 0 else "must be nonnegative")
        max_particles = get("simulation", "max_particles", int, 2_000_000, lambda v: None if v >= 1 else "must be at least 1")
        seed = get("simulation", "root_seed", int, 0)
        replicates = get("simulation", "replicates", int, 1, lambda v: None if v >= 1 else "must be at least 1")
        threads_raw = get("simulation", "threads", str, "auto")
        threads = "auto" if str(threads_raw).strip() == "auto" else int(threads_raw)
        with_positions = get("simulation", "with_positions", _parse_bool, True)
        tf_text = get("lln", "test_functions", str, "box(-1, 1)")
        test_functions = tuple(
            parse_test_function(part, dim) for part in tf_text.split(";") if part.strip()
        )
        b_schedule = get("lln", "b_schedule", lambda s: s.strip() or None, None)
        delta = get("lln", "delta", float, None)
        kappa = get("lln", "kappa", float, 0.5, lambda v: None if 0 < v < 1 else "must lie in (0, 1)")
        probe_times = get("lln", "probe_times", floats_list, ())
        ratio_tol = get("lln", "ratio_rel_tol", float, 0.05, lambda v: None if v > 0 else "must be positive")
        moments_t = get("moments", "t", float, None)
        moments_s = get("moments", "s", float, None)
        table_times = get("kernel_table", "times", floats_list, (1.0, 2.0, 4.0))
        table_s_count = get("kernel_table", "s_count", int, 8, lambda v: None if v >= 1 else "must be at least 1")
        output_dir = get("output", "dir", str, "out")
        prefix = get("output", "prefix", str, "run")
        dump_snapshots = get("output", "dump_snapshots", _parse_bool, False)
        dump_events = get("output", "dump_events", _parse_bool, False)
        rel = get("quadrature", "rel_tol", float, 1e-10, lambda v: None if v > 0 else "must be positive")
        abst = get("quadrature", "abs_tol", float, 1e-12, lambda v: None if v > 0 else "must be positive")
        subdiv = get("quadrature", "max_subdivisions", int, 4000, lambda v: None if v >= 1 else "must be at least 1")
        return cls(
            kernel=kernel,
            law=law,
            x0=x0,
            grid_dt=grid_dt,
            horizon_t=horizon,
            snapshot_times=snaps,
            memory_length_r=mem_r,
            max_particles=max_particles,
            root_seed=seed,
            replicates=replicates,
            threads=threads,
            with_positions=with_positions,
            test_functions=test_functions,
            b_schedule=b_schedule,
            delta=delta,
            kappa=kappa,
            probe_times=probe_times,
            ratio_rel_tol=ratio_tol,
            moments_t=moments_t,
            moments_s=moments_s,
            table_times=table_times,
            table_s_count=table_s_count,
            output_dir=output_dir,
            output_prefix=prefix,
            dump_snapshots=dump_snapshots,
            dump_events=dump_events,
            quad=QuadratureConfig(rel, abst, subdiv),
        )

    # -- serialization ----------------------------------------------------

    def to_ini(self) -> str:
        p = configparser.ConfigParser()
        p["kernel"] = {
            "hurst": repr(self.kernel.hurst),
            "drift_mu": repr(self.kernel.drift_mu),
            "intensity_lambda": repr(self.kernel.intensity_lambda),
            "dim": str(self.kernel.dim),
        }
        p["branching"] = {
            "offspring": offspring_to_text(self.law.offspring),
            "rate_v": repr(self.law.rate_V),
        }
        p["simulation"] = {
            "x0": ", ".join(repr(v) for v in self.x0),
            "grid_dt": repr(self.grid_dt),
            "horizon_t": repr(self.horizon_t),
            "snapshot_times": ", ".join(repr(v) for v in self.snapshot_times),
            "memory_length_r": repr(self.memory_length_r),
            "max_particles": str(self.max_particles),
            "root_seed": str(self.root_seed),
            "replicates": str(self.replicates),
            "threads": str(self.threads),
            "with_positions": str(self.with_positions).lower(),
        }
        lln = {
            "test_functions": "; ".join(test_function_to_text(f) for f in self.test_functions),
            "kappa": repr(self.kappa),
            "probe_times": ", ".join(repr(v) for v in self.probe_times),
            "ratio_rel_tol": repr(self.ratio_rel_tol),
        }
        if self.b_schedule is not None:
            lln["b_schedule"] = self.b_schedule
        if self.delta is not None:
            lln["delta"] = repr(self.delta)
        p["lln"] = lln
        moments = {}
        if self.moments_t is not None:
            moments["t"] = repr(self.moments_t)
        if self.moments_s is not None:
            moments["s"] = repr(self.moments_s)
        if moments:
            p["moments"] = moments
        p["kernel_table"] = {
            "times": ", ".join(repr(v) for v in self.table_times),
            "s_count": str(self.table_s_count),
        }
        p["output"] = {
            "dir": self.output_dir,
            "prefix": self.output_prefix,
            "dump_snapshots": str(self.dump_snapshots).lower(),
            "dump_events": str(self.dump_events).lower(),
        }
        p["quadrature"] = {
            "rel_tol": repr(self.quad.rel_tol),
            "abs_tol": repr(self.quad.abs_tol),
            "max_subdivisions": str(self.quad.max_subdivisions),
        }
        buf = io.StringIO()
        p.write(buf)
        return buf.getvalue()

    def resolved_dict(self) -> dict:
        """JSON-serializable echo of the full configuration (artifact embed)."""
        parser = configparser.ConfigParser()
        parser.read_string(self.to_ini())
        return {section: dict(parser.items(section)) for section in parser.sections()}


def _parse_bool(raw: str) -> bool:
    val = str(raw).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")
