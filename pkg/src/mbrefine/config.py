"""Pipeline parameters, dataset profiles and ``key = value`` config files."""

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .maps import IsmParams
from .refine import RefineParams

PROFILES = {
    "sintel": {"theta_md": 1.0, "theta_ism": 0.2},
    "kitti": {"theta_md": 3.0, "theta_ism": 0.6},
}


@dataclass(frozen=True)
class PipelineParams:
    profile: str = "sintel"
    sigma: float = 5.0
    theta_md: float = 1.0
    theta_ism: float = 0.2
    tau: float = 0.2
    alpha: float = 0.2
    d_max: int = 20
    grad_eps: float = 1e-3
    edge_low: float = 0.04
    edge_high: float = 0.08
    edge_smoothing: float = 1.0
    edge_tie_tol: float = 0.05
    f1_rel_tol: float = 0.0075
    max_dist: int = 20
    c_max: int = 20

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if not self.theta_md > 0:
            raise ValueError("theta_md must be positive")
        if not 0 <= self.edge_low <= self.edge_high:
            raise ValueError("need 0 <= edge_low <= edge_high")
        if self.edge_smoothing < 0 or self.edge_tie_tol < 0:
            raise ValueError("edge_smoothing and edge_tie_tol must be non-negative")
        if not 0 < self.f1_rel_tol < 1:
            raise ValueError("f1_rel_tol must lie in (0, 1)")
        if self.max_dist < 1 or self.c_max < 0:
            raise ValueError("max_dist must be >= 1 and c_max >= 0")
        # Delegate the remaining range checks.
        self.ism_params()
        self.refine_params()

    @classmethod
    def for_profile(cls, profile="sintel", **overrides):
        values = dict(PROFILES[profile]) if profile in PROFILES else {}
        values.update(overrides)
        return cls(profile=profile, **values)

    def ism_params(self):
        return IsmParams(sigma=self.sigma, theta_ism=self.theta_ism, grad_eps=self.grad_eps)

    def refine_params(self):
        return RefineParams(tau=self.tau, alpha=self.alpha, d_max=self.d_max, grad_eps=self.grad_eps)

    def as_dict(self):
        return dataclasses.asdict(self)


PARAM_TYPES = {f.name: f.type for f in fields(PipelineParams)}


def coerce(name, value):
    """Convert a textual or JSON value to the declared type of parameter ``name``."""
    if name not in PARAM_TYPES:
        raise KeyError(f"unknown parameter {name!r}")
    typ = PARAM_TYPES[name]
    if typ in ("int", int):
        as_float = float(value)
        if as_float != int(as_float):
            raise ValueError(f"{name} must be an integer, got {value!r}")
        return int(as_float)
    if typ in ("float", float):
        return float(value)
    return str(value)


def read_config(path):
    """Parse a ``key = value`` file; ``#`` starts a comment, dashes in keys are allowed."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            values[key] = coerce(key, value)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return values


def resolve_params(*layers):
    """Merge override dicts (later wins) on top of the selected profile's defaults."""
    merged = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if k in PARAM_TYPES})
    profile = merged.pop("profile", "sintel")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    return PipelineParams.for_profile(profile, **{k: coerce(k, v) for k, v in merged.items()})
