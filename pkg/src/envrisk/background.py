"""Risk of a loss X measured in the environment Z = X + Y of a background loss Y.

Inner distortions are the identity, so the state-wise risk is
phi(z) = E[X | Z = z]. Two outer distortions h_L and h_R are built from the
distorted environment law s(z) = 1 - g(P(Z > z)); the resulting measures
sandwich the Tsanakas allocation Gamma(X; Y) = E[X g'(P(Z > Z))].

On a finite model Z has atoms, so the survival level P(Z > Z) is not uniform.
Gamma is evaluated with the randomized survival level, uniform on
[P(Z > z), P(Z >= z)] given Z = z; the average of g' over that interval is the
difference quotient (g(P(Z >= z)) - g(P(Z > z))) / P(Z = z), which is exactly
the jump of s at z. The literal point evaluation g'(P(Z > z)) is available as
``pit="right"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DomainError, EnvRiskError, StateNotInSupport
from .model import (
    MERGE_RTOL,
    DiscreteDistribution,
    ScenarioTable,
    _frozen,
    build_distribution,
    group_values,
)

SANDWICH_TOL = 1e-9


@dataclass(frozen=True)
class SmoothConcaveG:
    """Increasing concave distortion with a closed-form derivative.

    ``power`` is u**p for 0 < p <= 1 (p = 1 is the identity); ``quadratic``
    is 1 - (1 - u)**2.
    """

    family: str
    p: float | None = None

    def __post_init__(self):
        if self.family == "identity":
            object.__setattr__(self, "family", "power")
            object.__setattr__(self, "p", 1.0)
        elif self.family == "power":
            if self.p is None or not 0.0 < float(self.p) <= 1.0:
                raise DomainError(f"power exponent must lie in (0, 1], got {self.p!r}")
            object.__setattr__(self, "p", float(self.p))
        elif self.family != "quadratic":
            raise EnvRiskError(f"unsupported smooth distortion {self.family!r}")

    @classmethod
    def identity(cls) -> "SmoothConcaveG":
        return cls("power", 1.0)

    @classmethod
    def quadratic(cls) -> "SmoothConcaveG":
        return cls("quadratic")

    @classmethod
    def power(cls, p: float) -> "SmoothConcaveG":
        return cls("power", p)

    def __call__(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.family == "quadratic":
            out = 1.0 - (1.0 - u) ** 2
        else:
            out = u**self.p
        return float(out) if out.ndim == 0 else out

    def derivative(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.family == "quadratic":
            out = 2.0 * (1.0 - u)
        elif self.p == 1.0:
            out = np.ones_like(u)
        else:
            with np.errstate(divide="ignore"):
                out = self.p * u ** (self.p - 1.0)
        return float(out) if out.ndim == 0 else out

    def to_json(self) -> dict[str, Any]:
        if self.family == "quadratic":
            return {"family": "quadratic"}
        return {"family": "power", "p": self.p}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SmoothConcaveG":
        return cls(obj.get("family"), obj.get("p"))


@dataclass(frozen=True, eq=False)
class JointLossModel:
    """Weighted atoms of (X, Y) with the derived environment Z = X + Y.

    Values of Z closer than the usual merge tolerance are treated as one
    state.
    """

    weights: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        w, x, y = _frozen(self.weights), _frozen(self.x), _frozen(self.y)
        if w.size == 0 or not (w.shape == x.shape == y.shape) or w.ndim != 1:
            raise EnvRiskError("joint model needs aligned, non-empty weight/x/y vectors")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise EnvRiskError("joint model entries must be finite")
        if np.any(w < 0) or w.sum() <= 0:
            raise EnvRiskError("weights must be non-negative with a positive total")
        keep = w > 0
        w, x, y = w[keep], x[keep], y[keep]
        zs, labels = group_values(x + y)
        zw = np.bincount(labels, weights=w, minlength=zs.size)
        zx = np.bincount(labels, weights=w * x, minlength=zs.size)
        for name, val in (
            ("weights", w),
            ("x", x),
            ("y", y),
            ("_labels", labels),
            ("z_support", _frozen(zs)),
            ("z_probs", _frozen(zw / zw.sum())),
            ("phi_values", _frozen(zx / zw)),
        ):
            object.__setattr__(self, name, val)

    @classmethod
    def from_atoms(cls, atoms) -> "JointLossModel":
        w, x, y = zip(*atoms)
        return cls(w, x, y)

    @classmethod
    def from_table(cls, table: ScenarioTable) -> "JointLossModel":
        if table.y is None:
            raise EnvRiskError("scenario table has no background loss column y")
        return cls(table.weights, table.x, table.y)

    @property
    def z_marginal(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.z_support, self.z_probs)

    def mean_x(self) -> float:
        return float(np.dot(self.weights, self.x) / self.weights.sum())

    def survival_z(self) -> tuple[np.ndarray, np.ndarray]:
        """(P(Z > z_k), P(Z >= z_k)) for every support point z_k."""
        tail = np.cumsum(self.z_probs[::-1])[::-1]
        at_or_above = np.minimum(tail, 1.0)
        above = np.concatenate([tail[1:], [0.0]])
        return above, at_or_above


def phi(model: JointLossModel, z: float) -> float:
    """E[X | Z = z] for a support point z."""
    k = int(np.searchsorted(model.z_support, z))
    for cand in (k - 1, k):
        if 0 <= cand < model.z_support.size:
            ref = model.z_support[cand]
            if abs(ref - z) <= MERGE_RTOL * max(1.0, abs(ref)):
                return float(model.phi_values[cand])
    raise StateNotInSupport(f"{z} is not in the support of Z")


def _ls_masses(model: JointLossModel, g: SmoothConcaveG) -> np.ndarray:
    above, at_or_above = model.survival_z()
    return np.asarray(g(at_or_above)) - np.asarray(g(above))


def ls_measure(model: JointLossModel, g: SmoothConcaveG) -> DiscreteDistribution:
    """Atomic measure induced by s(z) = 1 - g(P(Z > z)) on the support of Z.

    The mass at z is the jump s(z) - s(z-) = g(P(Z >= z)) - g(P(Z > z)).
    """
    masses = _ls_masses(model, g)
    total = masses.sum()
    if abs(total - 1.0) > 1e-12:
        raise EnvRiskError(f"induced measure has total mass {total}, expected 1")
    return build_distribution(model.z_support, masses)


@dataclass(frozen=True, eq=False)
class PhiLevels:
    """Distinct values c_1 < ... < c_m of phi with their environment and
    induced-measure masses."""

    values: np.ndarray
    pz: np.ndarray
    ls: np.ndarray

    def u_levels(self) -> np.ndarray:
        """U_j = P_Z(phi > c_j) for j = 0..m, with U_0 = 1 below the support."""
        tail = np.cumsum(self.pz[::-1])[::-1]
        return np.concatenate([[1.0], tail[1:], [0.0]])

    def v_levels(self) -> np.ndarray:
        """V_j = L_s(phi > c_j) for j = 0..m, with V_0 the total mass."""
        tail = np.cumsum(self.ls[::-1])[::-1]
        return np.concatenate([[tail[0]], tail[1:], [0.0]])


def phi_levels(model: JointLossModel, g: SmoothConcaveG) -> PhiLevels:
    vals, labels = group_values(model.phi_values)
    pz = np.bincount(labels, weights=model.z_probs, minlength=vals.size)
    ls = np.bincount(labels, weights=_ls_masses(model, g), minlength=vals.size)
    return PhiLevels(vals, pz, ls)


@dataclass(frozen=True, eq=False)
class HLHR:
    """h_L and h_R sampled at every attainable level p in range(u), ascending."""

    levels: np.ndarray
    h_left: np.ndarray
    h_right: np.ndarray

    def as_rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.levels.tolist(), self.h_left.tolist(), self.h_right.tolist()))


def build_hL_hR(model: JointLossModel, g: SmoothConcaveG) -> HLHR:
    """Compose v(x) = L_s(phi > x) with the left and right inverses of
    u(x) = P_Z(phi > x).

    On the step function u, the level U_j (attained on [c_j, c_{j+1})) has
    left inverse c_j and right inverse c_{j+1}. By convention the inverses at
    level 0 are +inf (so v = 0) and at level 1 are -inf (so v = total mass).
    """
    lev = phi_levels(model, g)
    U, V = lev.u_levels(), lev.v_levels()
    m = lev.values.size
    hl = np.empty(m + 1)
    hr = np.empty(m + 1)
    hl[0] = hr[0] = V[0]
    hl[m] = hr[m] = 0.0
    for j in range(1, m):
        hl[j] = V[j]
        hr[j] = V[j + 1]
    # range(u) is listed from 1 down to 0; flip to ascending
    return HLHR(U[::-1].copy(), hl[::-1].copy(), hr[::-1].copy())


def _step_choquet(values: np.ndarray, weights_above: np.ndarray) -> float:
    """c_1 + sum_j (c_{j+1} - c_j) * w_j for an increasing step support."""
    if values.size == 1:
        return float(values[0])
    return float(values[0] + np.dot(np.diff(values), weights_above[: values.size - 1]))


def rho_background(model: JointLossModel, g: SmoothConcaveG, side: str = "L") -> float:
    """Choquet integral of phi(Z) under h∘P_Z, with h = h_L or h_R."""
    if side not in ("L", "R"):
        raise EnvRiskError(f"side must be 'L' or 'R', got {side!r}")
    lev = phi_levels(model, g)
    m = lev.values.size
    table = build_hL_hR(model, g)
    # table is ascending in level; level U_j (j=1..m-1) sits at index m - j
    h = table.h_left if side == "L" else table.h_right
    w = np.array([h[m - j] for j in range(1, m)])
    return _step_choquet(lev.values, w)


def tsanakas_gamma(model: JointLossModel, g: SmoothConcaveG, pit: str = "randomized") -> float:
    """Gamma(X; Y) = E[X g'(survival level of Z)], summed atom by atom.

    ``pit="randomized"`` averages g' over each atom's survival interval;
    ``pit="right"`` evaluates g'(P(Z > z)) at the atom (literal form, not
    normalized when Z has atoms).
    """
    above, at_or_above = model.survival_z()
    if pit == "randomized":
        jump = at_or_above - above
        factor = (np.asarray(g(at_or_above)) - np.asarray(g(above))) / jump
    elif pit == "right":
        factor = np.asarray(g.derivative(above), dtype=float)
    else:
        raise EnvRiskError(f"unknown pit mode {pit!r}")
    per_atom = factor[model._labels]
    return float(np.dot(model.weights, model.x * per_atom) / model.weights.sum())


def gamma_ls(model: JointLossModel, g: SmoothConcaveG) -> float:
    """Gamma as the survival integral of phi against the induced measure L_s."""
    ls_measure(model, g)  # asserts unit total mass
    pushed = build_distribution(model.phi_values, _ls_masses(model, g))
    return _step_choquet(pushed.values, pushed.survival_levels())


@dataclass(frozen=True)
class SandwichReport:
    rho_r: float
    gamma: float
    gamma_ls: float
    rho_l: float

    @property
    def ok(self) -> bool:
        return (
            self.rho_r <= self.gamma + SANDWICH_TOL
            and self.gamma <= self.rho_l + SANDWICH_TOL
            and abs(self.gamma - self.gamma_ls) <= SANDWICH_TOL
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "rho_R": self.rho_r,
            "gamma": self.gamma,
            "gamma_ls": self.gamma_ls,
            "rho_L": self.rho_l,
            "ok": self.ok,
        }


def sandwich_check(model: JointLossModel, g: SmoothConcaveG) -> SandwichReport:
    return SandwichReport(
        rho_r=rho_background(model, g, "R"),
        gamma=tsanakas_gamma(model, g),
        gamma_ls=gamma_ls(model, g),
        rho_l=rho_background(model, g, "L"),
    )


def random_joint_model(rng: np.random.Generator, n_atoms: int | None = None) -> JointLossModel:
    """Random joint model; integer-valued draws make ties in Z and phi common."""
    n = int(n_atoms or rng.integers(1, 15))
    w = rng.uniform(0.1, 1.0, size=n)
    if rng.random() < 0.5:
        x = rng.integers(-3, 6, size=n).astype(float)
        y = rng.integers(-3, 6, size=n).astype(float)
    else:
        x = rng.normal(1.0, 2.0, size=n)
        y = rng.normal(0.0, 2.0, size=n)
    return JointLossModel(w, x, y)
