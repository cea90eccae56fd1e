"""Experiment configuration: a JSON file plus ``--set key=value`` overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ValidationError
from .fields import PROFILES, SCHEMES
from .transport import SolverConfig

MAP_ROUTES = ("potential_gradient", "barycentric")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 2
    N: int = 2000
    scheme: str = "fibonacci"
    seed: int = 0
    k_neighbors: int = 12
    rho: float = 0.8
    profile: str = "p1"
    eps: float = 0.02
    eps_list: tuple = (0.1, 0.05, 0.02, 0.01)
    alpha: float = 0.5
    alpha_prime: float = 0.3
    map_route: str = "potential_gradient"
    samples: int = 1000
    cut_margin: float = 0.3
    solver: SolverConfig = field(default_factory=SolverConfig)
    out: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}")
        if self.profile not in PROFILES:
            raise ValidationError(f"profile must be one of {sorted(PROFILES)}")
        if self.map_route not in MAP_ROUTES:
            raise ValidationError(f"map_route must be one of {MAP_ROUTES}")
        if self.n < 1 or self.N < self.n + 2:
            raise ValidationError("need n >= 1 and N >= n + 2")
        if not 0 < self.rho <= 1:
            raise ValidationError("rho must lie in (0, 1]")
        if self.eps < 0 or any(e < 0 for e in self.eps_list):
            raise ValidationError("perturbation sizes must be nonnegative")
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ValidationError("eps_list must be strictly decreasing")
        if not 0 < self.alpha_prime < self.alpha < 1:
            raise ValidationError("need 0 < alpha' < alpha < 1")
        if self.samples < 1:
            raise ValidationError("samples must be >= 1")
        if self.cut_margin < 0.2:
            raise ValidationError("cut_margin must be >= 0.2")

    def as_dict(self):
        d = asdict(self)
        d["eps_list"] = list(self.eps_list)
        sched = d["solver"]["eps_schedule"]
        d["solver"]["eps_schedule"] = None if sched is None else list(sched)
        return d


def _coerce(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    solver = d.pop("solver", None) or {}
    if isinstance(solver, dict):
        sknown = {f.name for f in fields(SolverConfig)}
        bad = set(solver) - sknown
        if bad:
            raise ValidationError(f"unknown solver keys: {sorted(bad)}")
        try:
            solver = SolverConfig(**solver)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None
    try:
        return ExperimentConfig(solver=solver, **d)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def apply_overrides(base: dict, pairs) -> dict:
    """Apply ``key=value`` strings; dotted keys address the solver section."""
    out = json.loads(json.dumps(base))
    for pair in pairs or ():
        if "=" not in pair:
            raise ValidationError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        node = out
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValidationError(f"cannot set {key}")
        node[parts[-1]] = _coerce(value.strip())
    return out


def load(path=None, overrides=(), **flags) -> ExperimentConfig:
    from .io import read_json

    base = ExperimentConfig().as_dict()
    if path is not None:
        user = read_json(path)
        if not isinstance(user, dict):
            raise ValidationError("config file must hold a JSON object")
        solver = user.pop("solver", {}) or {}
        base.update(user)
        base["solver"].update(solver)
    base = apply_overrides(base, overrides)
    for key, value in flags.items():
        if value is not None:
            base[key] = value
    return from_dict(base)


def with_updates(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw)
