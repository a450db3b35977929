"""TOML experiment configuration."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .models import (
    PhysicalParams,
    PotentialProfile,
    TailData,
    compact_well,
    constant_profile,
    gaussian_well,
    log_oscillation,
)
from .symbols import WeightSpec, linear_weight, radial_weight, subexponential_weight

MODELS = ("schrodinger", "dirac", "klein_gordon")
PROFILE_KINDS = ("zero", "constant", "delta_well", "compact_well", "log_oscillation", "gaussian_well")
WEIGHT_KINDS = ("none", "radial", "linear", "subexponential")
KG_MODES = ("as_stated", "criterion_derived")
SOLVERS = ("auto", "dense", "sparse")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class Physical:
    hbar: float = 1.0
    c: float = 1.0
    m: float = 1.0
    e: float = 1.0


@dataclass
class Profile:
    kind: str = "zero"
    depth: float = 0.0
    width: float = 1.0
    value: list = field(default_factory=list)  # scalar as [v], matrix as rows
    sites: list = field(default_factory=list)  # [{point = [...], value = v}]
    A: float = 0.0
    B: float = 0.0
    gamma: float = 1.0


@dataclass
class Weight:
    kind: str = "none"
    slope: float = 0.0
    slopes: list = field(default_factory=list)
    alpha: float = 1.0
    beta: float = 0.5


@dataclass
class Grid:
    sweep: int = 512
    dirac_audit: int = 64
    kg_coeffs: int = 512
    criterion: int = 64


@dataclass
class Boxes:
    L_list: list = field(default_factory=lambda: [40, 60])
    solver: str = "auto"
    shell_lo: int = 0  # 0 selects the default fit range
    shell_hi: int = 0


@dataclass
class Tolerances:
    stab_tol: float = 1e-3
    interior: float = 0.5
    slack: float = 0.02
    containment: float = 1e-6
    bisection: float = 1e-4
    band_tol: float = 1e-8
    merge_factor: float = 4.0


@dataclass
class Output:
    directory: str = "out"
    stem: str = "report"


@dataclass
class ExperimentConfig:
    model: str = "schrodinger"
    n: int = 1
    N: int = 1
    kg_mode: str = "as_stated"
    max_band: int = 40
    physical: Physical = field(default_factory=Physical)
    profile: Profile = field(default_factory=Profile)
    weight: Weight = field(default_factory=Weight)
    grid: Grid = field(default_factory=Grid)
    box: Boxes = field(default_factory=Boxes)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: Output = field(default_factory=Output)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.n < 1 or self.N < 1:
            raise ConfigError("n and N must be positive")
        if self.model == "dirac" and (self.n, self.N) != (3, 8):
            raise ConfigError("the Dirac model needs n = 3, N = 8")
        if self.model == "klein_gordon" and self.N != 1:
            raise ConfigError("the Klein-Gordon model needs N = 1")
        if self.kg_mode not in KG_MODES:
            raise ConfigError(f"kg_mode must be one of {KG_MODES}")
        for name, v in asdict(self.physical).items():
            if not v > 0:
                raise ConfigError(f"physical.{name} must be positive")
        for name, v in asdict(self.tolerances).items():
            if not v > 0:
                raise ConfigError(f"tolerances.{name} must be positive")
        if self.profile.kind not in PROFILE_KINDS:
            raise ConfigError(f"profile.kind must be one of {PROFILE_KINDS}")
        if self.weight.kind not in WEIGHT_KINDS:
            raise ConfigError(f"weight.kind must be one of {WEIGHT_KINDS}")
        if self.box.solver not in SOLVERS:
            raise ConfigError(f"box.solver must be one of {SOLVERS}")
        if len(self.box.L_list) < 2 or any(int(L) < 1 for L in self.box.L_list):
            raise ConfigError("box.L_list needs at least two positive sizes")
        g = self.grid
        if min(g.sweep, g.dirac_audit, g.kg_coeffs, g.criterion) < 1:
            raise ConfigError("grid sizes must be positive")
        if g.criterion % 2:
            raise ConfigError("grid.criterion must be even")

    # --- derived objects ----------------------------------------------------

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams(**asdict(self.physical))

    @property
    def profile_dims(self) -> tuple[int, int]:
        """Lattice dimension and fiber of the potential (scalar for Dirac and Klein-Gordon)."""
        return self.n, (self.N if self.model == "schrodinger" else 1)

    def potential(self) -> Optional[PotentialProfile]:
        pr = self.profile
        n, N = self.profile_dims
        try:
            if pr.kind == "zero":
                return None
            if pr.kind == "constant":
                val = np.asarray(pr.value, dtype=float)
                if val.size == 1:
                    val = val.reshape(()) * np.eye(N)
                if val.shape != (N, N):
                    raise ConfigError(f"profile.value must be a scalar or {N}x{N} matrix")
                return constant_profile(val, n)
            if pr.kind == "delta_well":
                return compact_well({(0,) * n: -pr.depth}, n, N)
            if pr.kind == "compact_well":
                sites = {tuple(s["point"]): s["value"] for s in pr.sites}
                if any(len(p) != n for p in sites):
                    raise ConfigError(f"profile.sites points must have {n} coordinates")
                return compact_well(sites, n, N)
            if pr.kind == "log_oscillation":
                return log_oscillation(pr.A, pr.B, pr.gamma, n, N)
            if N != 1:
                raise ConfigError("gaussian_well is scalar")
            return gaussian_well(pr.depth, n, pr.width)
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid profile: {exc}") from exc

    def tail(self) -> TailData:
        prof = self.potential()
        if prof is None:
            _, N = self.profile_dims
            return TailData((0.0,) * N, (0.0,) * N)
        return prof.tail

    def weight_spec(self) -> Optional[WeightSpec]:
        w = self.weight
        if w.kind == "none":
            return None
        if w.kind == "radial":
            return radial_weight(self.n, w.slope)
        if w.kind == "linear":
            if len(w.slopes) != self.n:
                raise ConfigError(f"weight.slopes needs {self.n} entries")
            return linear_weight(w.slopes)
        return subexponential_weight(self.n, w.alpha, w.beta)

    # --- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        sections = {f.name: f.type for f in fields(cls)}
        nested = {"physical": Physical, "profile": Profile, "weight": Weight, "grid": Grid,
                  "box": Boxes, "tolerances": Tolerances, "output": Output}
        kwargs = {}
        for key, value in data.items():
            if key not in sections:
                raise ConfigError(f"unknown key {key!r}")
            if key in nested:
                if not isinstance(value, dict):
                    raise ConfigError(f"[{key}] must be a table")
                try:
                    kwargs[key] = nested[key](**value)
                except TypeError as exc:
                    raise ConfigError(f"[{key}]: {exc}") from exc
            else:
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML parse error: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                text = fh.read().decode()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.loads(text)
