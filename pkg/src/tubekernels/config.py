"""Experiment configuration: typed sections, strict TOML loading, round-trip."""

from __future__ import annotations

import dataclasses
import json
import math
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .geometry import GroupAction, TorusModel
from .spectra import Cutoff, Isotype

LADDER = [100.0, 141.0, 200.0, 283.0, 400.0]


@dataclass
class ModelConfig:
    d: int = 2
    tau: float = 0.5
    action: str = "trivial"
    generators: list[list[int]] = field(default_factory=list)
    m: int = 1
    nu: list[int] = field(default_factory=lambda: [0])

    def build(self) -> TorusModel:
        if self.action == "trivial":
            act = GroupAction.trivial(self.d)
        elif self.action in ("subtorus", "finite-cyclic"):
            gens = self.generators or [[int(i == 0) for i in range(self.d)]]
            act = GroupAction(self.action, tuple(tuple(g) for g in gens), self.m)
        else:
            raise ConfigError(f"model.action must be trivial, subtorus or finite-cyclic, got {self.action!r}")
        return TorusModel(self.d, self.tau, act)

    def isotype(self) -> Isotype:
        model = self.build()
        nu = tuple(self.nu) if model.action.kind == "subtorus" else self.nu[0]
        if model.action.kind == "subtorus" and len(self.nu) != model.d_G:
            raise ConfigError(f"nu needs {model.d_G} entries for this action, got {len(self.nu)}")
        return Isotype(model.action, nu)


@dataclass
class CutoffConfig:
    family: str = "autocorrelated-bump"
    epsilon: float = 0.4
    t0: float = 0.0
    trunc_tol: float = 1e-10

    def build(self) -> Cutoff:
        return Cutoff(self.family, self.epsilon, self.t0, self.trunc_tol)


def _circle2() -> ModelConfig:
    return ModelConfig(d=2, tau=0.5, action="subtorus", generators=[[1, 0]])


def _cyclic3() -> ModelConfig:
    return ModelConfig(d=2, tau=0.5, action="finite-cyclic", generators=[[1, 0]], m=3)


@dataclass
class SymplecticCheckConfig:
    n_matrices: int = 100
    n_max: int = 4
    n_vectors: int = 100
    tol: float = 1e-10


@dataclass
class GaussianCheckConfig:
    n_instances: int = 50
    m_max: int = 6
    tol: float = 1e-8
    a_chi_dims: list[int] = field(default_factory=lambda: [2, 3, 4])
    a_chi_tol: float = 1e-10
    reproducing_tol: float = 1e-6
    shear: float = 0.7
    rotation: float = 0.9


@dataclass
class PointConfig:
    x: list[float] = field(default_factory=lambda: [0.1, 0.2])
    p: list[float] = field(default_factory=lambda: [math.cos(0.37), math.sin(0.37)])


@dataclass
class KernelConfig:
    model: ModelConfig = field(default_factory=_cyclic3)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    lambdas: list[float] = field(default_factory=lambda: list(LADDER))
    points: list[list[PointConfig]] = field(default_factory=lambda: [[PointConfig(), PointConfig()]])


@dataclass
class DiagonalConfig:
    model: ModelConfig = field(default_factory=_cyclic3)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    point: PointConfig = field(default_factory=PointConfig)
    ladder: list[float] = field(default_factory=lambda: list(LADDER))
    ratio_tol: float = 0.05
    residual_order: list[float] = field(default_factory=lambda: [-0.8, -0.3])


@dataclass
class TransverseConfig:
    model: ModelConfig = field(default_factory=_circle2)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    point: PointConfig = field(default_factory=lambda: PointConfig([0.3, 0.1], [0.0, 1.0]))
    lam: float = 400.0
    v_values: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    slope_rel_tol: float = 0.1


@dataclass
class OscillationConfig:
    model: ModelConfig = field(default_factory=_cyclic3)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    point: PointConfig = field(default_factory=PointConfig)
    lam: float = 400.0
    theta_max: float = 0.5
    n_theta: int = 41
    freq_rel_tol: float = 0.02


@dataclass
class NearGraphConfig:
    model: ModelConfig = field(default_factory=lambda: ModelConfig(d=2, tau=0.5))
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    point: PointConfig = field(default_factory=PointConfig)
    t1: float = 0.3
    lam: float = 400.0
    n_pairs: int = 10
    radius: float = 2.0
    ratio_tol: float = 0.1


@dataclass
class ScalingConfig:
    validity_C: float = 4.0
    validity_eps_prime: float = 0.15
    diagonal: DiagonalConfig = field(default_factory=DiagonalConfig)
    transverse: TransverseConfig = field(default_factory=TransverseConfig)
    oscillation: OscillationConfig = field(default_factory=OscillationConfig)
    near_graph: NearGraphConfig = field(default_factory=NearGraphConfig)


@dataclass
class RapidDecayConfig:
    model: ModelConfig = field(default_factory=_circle2)
    cutoff: CutoffConfig = field(default_factory=lambda: CutoffConfig(trunc_tol=1e-16))
    point: PointConfig = field(default_factory=lambda: PointConfig([0.3, 0.1], [0.0, 1.0]))
    ladder: list[float] = field(default_factory=lambda: list(LADDER))
    distance_constants: list[float] = field(default_factory=lambda: [0.5, 1.0, 1.5])
    reference_constant: float = 1.0
    distance_exponent: float = -1.0 / 3.0
    max_decay_order: float = -5.0
    min_control_order: float = -1.0


@dataclass
class WeylConfig:
    model: ModelConfig = field(default_factory=lambda: ModelConfig(d=3, tau=0.5, action="subtorus",
                                                                    generators=[[1, 0, 0]]))
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    ladder: list[float] = field(default_factory=lambda: list(LADDER))
    exponent_tol: float = 0.1
    coefficient_tol: float = 0.15


@dataclass
class HusimiCase:
    model: ModelConfig = field(default_factory=_circle2)
    direction: list[int] = field(default_factory=lambda: [0, 1])


def _husimi_cases() -> list[HusimiCase]:
    return [HusimiCase(ModelConfig(d=2, tau=0.5), [1, 0]), HusimiCase(_circle2(), [0, 1])]


@dataclass
class HusimiConfig:
    cases: list[HusimiCase] = field(default_factory=_husimi_cases)
    mu_ladder: list[int] = field(default_factory=lambda: [50, 100, 200, 400])
    n_grid: int = 720
    exponent_tol: float = 0.15


@dataclass
class QSymbolConfig:
    model: ModelConfig = field(default_factory=lambda: ModelConfig(d=2, tau=0.5))
    k_ladder: list[float] = field(default_factory=lambda: [50.0, 100.0, 200.0])
    tol: float = 0.02
    d3_k: float = 200.0
    d3_tol: float = 0.05


@dataclass
class ExperimentConfig:
    seed: int = 12345
    output_dir: str = "out"
    workers: int = 1
    symplectic_check: SymplecticCheckConfig = field(default_factory=SymplecticCheckConfig)
    gaussian_check: GaussianCheckConfig = field(default_factory=GaussianCheckConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    rapid_decay: RapidDecayConfig = field(default_factory=RapidDecayConfig)
    weyl: WeylConfig = field(default_factory=WeylConfig)
    husimi: HusimiConfig = field(default_factory=HusimiConfig)
    qsymbol: QSymbolConfig = field(default_factory=QSymbolConfig)


# --- conversion -------------------------------------------------------------------

def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a table, got {type(value).__name__}")
        return from_dict(tp, value, path)
    if origin is list:
        (inner,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        return [_convert(inner, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type {tp}")  # pragma: no cover


def from_dict(cls, data: dict, path: str = ""):
    """Build a config dataclass from nested dicts, rejecting unknown keys."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = path or "top level"
        raise ConfigError(f"unknown key(s) at {where}: {', '.join(unknown)}")
    kwargs = {k: _convert(hints[k], v, f"{path}.{k}" if path else k) for k, v in data.items()}
    return cls(**kwargs)


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def validate(cfg: ExperimentConfig) -> None:
    """Check hypothesis guards and build every model once.

    Raises
    ------
    ConfigError
        With a message naming the offending key.
    """
    from .errors import TubeKernelsError

    def guard(cond: bool, msg: str):
        if not cond:
            raise ConfigError(msg)

    sections = {
        "kernel": cfg.kernel, "scaling.diagonal": cfg.scaling.diagonal,
        "scaling.transverse": cfg.scaling.transverse, "scaling.oscillation": cfg.scaling.oscillation,
        "scaling.near_graph": cfg.scaling.near_graph, "rapid_decay": cfg.rapid_decay,
        "weyl": cfg.weyl,
    }
    for name, sec in sections.items():
        try:
            model = sec.model.build()
            sec.model.isotype()
            cut = sec.cutoff.build()
        except TubeKernelsError as exc:
            raise ConfigError(f"{name}: {exc}") from exc
        lo, hi = cut.support
        guard(hi - lo < model.injectivity_threshold(),
              f"{name}.cutoff: support length {hi - lo:.3g} violates the small-support hypothesis "
              f"(must be below {model.injectivity_threshold():.3g})")
    for i, case in enumerate(cfg.husimi.cases):
        try:
            case.model.build()
        except TubeKernelsError as exc:
            raise ConfigError(f"husimi.cases[{i}]: {exc}") from exc
    guard(0 < cfg.scaling.validity_eps_prime < 1 / 6,
          "scaling.validity_eps_prime must lie in (0, 1/6)")
    ng = cfg.scaling.near_graph
    lo, hi = ng.cutoff.build().support
    guard(lo < ng.t1 < hi, f"scaling.near_graph.t1={ng.t1} lies outside the cutoff support ({lo:.3g}, {hi:.3g})")
    guard(ng.model.build().d_G == 0 and ng.model.build().action.m == 1,
          "scaling.near_graph.model must carry the trivial action")
    w = cfg.weyl.model.build()
    guard(w.d >= 2 * w.d_G, f"weyl.model: need d >= 2 d_G, got d={w.d}, d_G={w.d_G}")
    guard(w.action.kind == "subtorus" and w.action.stabilizer_order == 1,
          "weyl.model: the quotient-volume prediction needs a free subtorus action")
    rd = cfg.rapid_decay
    guard(rd.distance_exponent < 0, "rapid_decay.distance_exponent must be negative")
    guard(rd.model.build().action.kind == "subtorus", "rapid_decay.model needs a subtorus action")
    for name, ladder in (("scaling.diagonal.ladder", cfg.scaling.diagonal.ladder),
                         ("rapid_decay.ladder", rd.ladder), ("weyl.ladder", cfg.weyl.ladder)):
        guard(len(ladder) >= 2 and all(x > 0 for x in ladder) and ladder == sorted(ladder),
              f"{name} must be an increasing list of at least two positive values")
    guard(cfg.workers >= 1, "workers must be at least 1")


def load(path: str | Path) -> ExperimentConfig:
    """Read and validate a TOML config file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = from_dict(ExperimentConfig, data)
    validate(cfg)
    return cfg


def snapshot(cfg: ExperimentConfig) -> str:
    """Canonical JSON text of the config; :func:`from_snapshot` inverts it."""
    return json.dumps(to_dict(cfg), sort_keys=True)


def from_snapshot(text: str) -> ExperimentConfig:
    return from_dict(ExperimentConfig, json.loads(text))
