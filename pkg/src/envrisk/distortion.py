"""Distortion functions and rules that assign one to each environment state."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, EnvRiskError

FAMILIES = ("identity", "avar", "var", "power", "pwl")
DOMAIN_TOL = 1e-12
CONCAVITY_TOL = 1e-10
# survival levels within this distance of a ``var`` jump count as sitting on
# it (closed branch); matches the breakpoint snap of the quantile functions
JUMP_TOL = 1e-12


@dataclass(frozen=True)
class DistortionFn:
    """A non-decreasing map g of [0, 1] onto itself with g(0)=0 and g(1)=1.

    Families:

    * ``identity``: g(u) = u
    * ``avar``: g(u) = min(u / (1 - level), 1)
    * ``var``: left-continuous indicator, 0 on [0, 1 - level], 1 above
      (levels within 1e-12 of the jump count as on it)
    * ``power``: g(u) = u**p with 0 < p <= 1
    * ``pwl``: linear interpolation through ``knots`` (must contain (0,0) and (1,1))
    """

    family: str
    level: float | None = None
    p: float | None = None
    knots: tuple[tuple[float, float], ...] | None = field(default=None)

    def __post_init__(self):
        fam = self.family
        if fam not in FAMILIES:
            raise EnvRiskError(f"unknown distortion family {fam!r}")
        if fam in ("avar", "var"):
            if self.level is None or not 0.0 < float(self.level) < 1.0:
                raise DomainError(f"{fam} level must lie in (0, 1), got {self.level!r}")
            object.__setattr__(self, "level", float(self.level))
        if fam == "power":
            if self.p is None or not 0.0 < float(self.p) <= 1.0:
                raise DomainError(f"power exponent must lie in (0, 1], got {self.p!r}")
            object.__setattr__(self, "p", float(self.p))
        if fam == "pwl":
            knots = tuple((float(u), float(g)) for u, g in (self.knots or ()))
            us = np.array([k[0] for k in knots])
            gs = np.array([k[1] for k in knots])
            if len(knots) < 2 or knots[0] != (0.0, 0.0) or knots[-1] != (1.0, 1.0):
                raise DomainError("pwl knots must start at (0,0) and end at (1,1)")
            if np.any(np.diff(us) <= 0):
                raise DomainError("pwl knot abscissae must be strictly increasing")
            if np.any(np.diff(gs) < 0):
                raise DomainError("pwl knot ordinates must be non-decreasing")
            object.__setattr__(self, "knots", knots)

    # constructors -------------------------------------------------------

    @classmethod
    def identity(cls) -> "DistortionFn":
        return cls("identity")

    @classmethod
    def avar(cls, level: float) -> "DistortionFn":
        return cls("avar", level=level)

    @classmethod
    def var(cls, level: float) -> "DistortionFn":
        return cls("var", level=level)

    @classmethod
    def power(cls, p: float) -> "DistortionFn":
        return cls("power", p=p)

    @classmethod
    def pwl(cls, knots) -> "DistortionFn":
        return cls("pwl", knots=tuple(tuple(k) for k in knots))

    # evaluation ---------------------------------------------------------

    def __call__(self, u):
        return eval_distortion(self, u)

    def to_json(self) -> dict[str, Any]:
        if self.family == "identity":
            return {"family": "identity"}
        if self.family in ("avar", "var"):
            return {"family": self.family, "level": self.level}
        if self.family == "power":
            return {"family": "power", "p": self.p}
        return {"family": "pwl", "knots": [list(k) for k in self.knots]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "DistortionFn":
        if not isinstance(obj, dict) or "family" not in obj:
            raise EnvRiskError(f"distortion must be an object with a 'family' key, got {obj!r}")
        fam = obj["family"]
        if fam == "identity":
            return cls.identity()
        if fam in ("avar", "var"):
            return cls(fam, level=obj.get("level"))
        if fam == "power":
            return cls.power(obj.get("p"))
        if fam == "pwl":
            return cls.pwl(obj.get("knots") or ())
        raise EnvRiskError(f"unknown distortion family {fam!r}")


def eval_distortion(d: DistortionFn, u):
    """Evaluate ``d`` at ``u`` (scalar or array).

    Inputs within 1e-12 outside [0, 1] are clamped; anything further out is a
    DomainError.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < -DOMAIN_TOL) or np.any(arr > 1 + DOMAIN_TOL) or np.any(np.isnan(arr)):
        raise DomainError("distortion argument outside [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    fam = d.family
    if fam == "identity":
        out = arr
    elif fam == "avar":
        out = np.minimum(arr / (1.0 - d.level), 1.0)
    elif fam == "var":
        out = np.where(arr > 1.0 - d.level + JUMP_TOL, 1.0, 0.0)
    elif fam == "power":
        out = np.power(arr, d.p)
    else:
        us, gs = zip(*d.knots)
        out = np.interp(arr, us, gs)
    if np.ndim(u) == 0:
        return float(out)
    return out


def is_concave(d: DistortionFn, grid_n: int = 101) -> bool:
    """Concavity test.

    Piecewise-linear distortions are decided exactly from knot slopes. The
    ``var`` family is never concave (its jump sits strictly inside (0, 1) and
    a concave g with g(0)=0, g(1)=1 must dominate the diagonal). Everything
    else is checked by midpoint concavity on a uniform grid.
    """
    if grid_n < 3:
        raise DomainError("grid_n must be at least 3")
    if d.family == "var":
        return False
    if d.family == "pwl":
        us = np.array([k[0] for k in d.knots])
        gs = np.array([k[1] for k in d.knots])
        slopes = np.diff(gs) / np.diff(us)
        return bool(np.all(np.diff(slopes) <= CONCAVITY_TOL))
    grid = np.linspace(0.0, 1.0, grid_n)
    g = eval_distortion(d, grid)
    return bool(np.all(g[1:-1] + CONCAVITY_TOL >= 0.5 * (g[:-2] + g[2:])))


RULES = ("constant", "table", "level-from-state")


@dataclass(frozen=True)
class StateFamilyRule:
    """Assigns a distortion to every environment state.

    * ``constant``: the same ``distortion`` everywhere
    * ``table``: exact-match lookup in ``entries`` with a ``default`` fallback
    * ``level-from-state``: the state value, clamped to ``clamp``, is used as
      the level of an ``avar`` or ``var`` distortion
    """

    rule: str
    distortion: DistortionFn | None = None
    entries: tuple[tuple[float, DistortionFn], ...] = ()
    default: DistortionFn | None = None
    family: str | None = None
    clamp: tuple[float, float] | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise EnvRiskError(f"unknown state rule {self.rule!r}")
        if self.rule == "constant" and self.distortion is None:
            raise EnvRiskError("constant rule needs a distortion")
        if self.rule == "table":
            if self.default is None:
                raise EnvRiskError("table rule needs a default distortion")
            object.__setattr__(self, "entries", tuple((float(z), d) for z, d in self.entries))
        if self.rule == "level-from-state":
            if self.family not in ("avar", "var"):
                raise EnvRiskError("level-from-state supports the avar and var families")
            if self.clamp is None:
                raise EnvRiskError("level-from-state rule needs a clamp interval")
            lo, hi = (float(c) for c in self.clamp)
            if not 0.0 < lo <= hi < 1.0:
                raise DomainError(f"clamp interval must be a non-empty subset of (0, 1), got {self.clamp!r}")
            object.__setattr__(self, "clamp", (lo, hi))

    @classmethod
    def constant(cls, d: DistortionFn) -> "StateFamilyRule":
        return cls("constant", distortion=d)

    @classmethod
    def table(cls, entries, default: DistortionFn) -> "StateFamilyRule":
        if isinstance(entries, dict):
            entries = entries.items()
        return cls("table", entries=tuple(entries), default=default)

    @classmethod
    def level_from_state(cls, family: str, clamp=(0.01, 0.99)) -> "StateFamilyRule":
        return cls("level-from-state", family=family, clamp=tuple(clamp))

    def distortions(self) -> list[DistortionFn]:
        """Every distortion the rule can hand out, for families that are
        enumerable (level-from-state is represented by its clamp endpoints)."""
        if self.rule == "constant":
            return [self.distortion]
        if self.rule == "table":
            return [d for _, d in self.entries] + [self.default]
        return [DistortionFn(self.family, level=c) for c in self.clamp]

    def to_json(self) -> dict[str, Any]:
        if self.rule == "constant":
            return {"rule": "constant", "distortion": self.distortion.to_json()}
        if self.rule == "table":
            return {
                "rule": "table",
                "entries": [[z, d.to_json()] for z, d in self.entries],
                "default": self.default.to_json(),
            }
        return {"rule": "level-from-state", "family": self.family, "clamp": list(self.clamp)}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "StateFamilyRule":
        if not isinstance(obj, dict) or "rule" not in obj:
            raise EnvRiskError(f"state rule must be an object with a 'rule' key, got {obj!r}")
        rule = obj["rule"]
        if rule == "constant":
            return cls.constant(DistortionFn.from_json(obj.get("distortion")))
        if rule == "table":
            entries = [(z, DistortionFn.from_json(d)) for z, d in obj.get("entries", [])]
            return cls.table(entries, DistortionFn.from_json(obj.get("default")))
        if rule == "level-from-state":
            return cls.level_from_state(obj.get("family"), obj.get("clamp", (0.01, 0.99)))
        raise EnvRiskError(f"unknown state rule {rule!r}")


def resolve_state(rule: StateFamilyRule, z: float) -> DistortionFn:
    """The distortion that ``rule`` assigns to environment state ``z``."""
    if rule.rule == "constant":
        return rule.distortion
    if rule.rule == "table":
        for key, d in rule.entries:
            if abs(key - z) <= 1e-12 * max(1.0, abs(key)):
                return d
        return rule.default
    lo, hi = rule.clamp
    return DistortionFn(rule.family, level=min(max(float(z), lo), hi))
