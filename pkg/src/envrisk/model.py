"""Discrete laws, scenario tables and the state-conditional decomposition.

Everything here is immutable after construction. Arrays stored on the
dataclasses are flagged read-only so that distributions can be shared freely
between threads and cached computations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BinningInfeasible,
    EmptyInput,
    EnvRiskError,
    LengthMismatch,
    MalformedInput,
    NegativeWeight,
    NonFiniteValue,
    ZeroTotalWeight,
)

MERGE_RTOL = 1e-12
PROB_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """A finite law: strictly increasing ``values`` with positive ``probs``.

    Use :func:`build_distribution` to construct one from raw data; the
    constructor assumes canonical input and only validates it.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        p = _frozen(self.probs)
        if v.ndim != 1 or v.shape != p.shape or v.size == 0:
            raise LengthMismatch("values and probs must be equal-length, non-empty 1-d arrays")
        if np.any(p < 0):
            raise NegativeWeight("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ZeroTotalWeight(f"probabilities sum to {p.sum()!r}, not 1")
        if np.any(np.diff(v) <= 0):
            raise EnvRiskError("values must be strictly increasing; use build_distribution")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(self.probs, other.probs)

    __hash__ = None

    def survival_levels(self) -> np.ndarray:
        """P(X > x_k) for every atom x_k, computed as reverse cumulative sums."""
        tail = np.cumsum(self.probs[::-1])[::-1]
        out = np.empty_like(tail)
        out[:-1] = tail[1:]
        out[-1] = 0.0
        return out

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def shift(self, c: float) -> "DiscreteDistribution":
        return build_distribution(self.values + c, self.probs)

    def scale(self, c: float) -> "DiscreteDistribution":
        return build_distribution(self.values * c, self.probs)

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.values.tolist(), self.probs.tolist()))


def group_values(v) -> tuple[np.ndarray, np.ndarray]:
    """Merge near-equal values.

    Returns the sorted group representatives (the smallest member of each
    group) and, for every input, the index of its group. A new group starts
    when a value exceeds the current group's anchor by more than
    ``MERGE_RTOL * max(1, |anchor|)``.
    """
    v = np.asarray(v, dtype=float).ravel()
    order = np.argsort(v, kind="stable")
    sv = v[order]
    labels = np.empty(v.size, dtype=int)
    tol = MERGE_RTOL * np.maximum(1.0, np.abs(sv[:-1]))
    if np.all(np.diff(sv) > tol):
        labels[order] = np.arange(sv.size)
        return sv, labels
    group_sorted = np.empty(sv.size, dtype=int)
    g = 0
    anchor = sv[0]
    reps = [anchor]
    for i in range(sv.size):
        if sv[i] - anchor > MERGE_RTOL * max(1.0, abs(anchor)):
            g += 1
            anchor = sv[i]
            reps.append(anchor)
        group_sorted[i] = g
    labels[order] = group_sorted
    return np.asarray(reps), labels


def build_distribution(values: Sequence[float], weights: Sequence[float]) -> DiscreteDistribution:
    """Canonicalize weighted atoms: sort, merge near-equal values, normalize.

    >>> build_distribution([1, 3, 1], [1, 1, 2]).as_dict()
    {1.0: 0.75, 3.0: 0.25}
    """
    v = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("no atoms given")
    if v.size != w.size:
        raise LengthMismatch(f"{v.size} values but {w.size} weights")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise NonFiniteValue("values and weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight("weights must be non-negative")
    total = math.fsum(w)
    if total <= 0:
        raise ZeroTotalWeight("weights sum to zero")

    reps, labels = group_values(v)
    merged_w = np.bincount(labels, weights=w, minlength=reps.size)
    probs = merged_w / merged_w.sum()
    keep = probs > 0  # also drops weights that underflow on normalization
    return DiscreteDistribution(reps[keep], probs[keep] / probs[keep].sum())


def point_mass(c: float) -> DiscreteDistribution:
    return DiscreteDistribution([float(c)], [1.0])


def survival(dist: DiscreteDistribution, t: float) -> float:
    """P(X > t); a right-continuous, non-increasing step function of ``t``."""
    k = int(np.searchsorted(dist.values, t, side="right"))
    if k == 0:
        return 1.0
    return float(min(1.0, dist.probs[k:].sum()))


def check_comonotone(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``(a_i - a_j)(b_i - b_j) >= 0`` for every pair of indices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        return True
    order = np.lexsort((b, a))
    return bool(np.all(np.diff(b[order]) >= 0))


@dataclass(frozen=True, eq=False)
class ScenarioTable:
    """Weighted joint scenarios of a loss ``x``, an environment ``z`` and an
    optional background loss ``y``."""

    weights: np.ndarray
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        w, x, z = _frozen(self.weights), _frozen(self.x), _frozen(self.z)
        y = None if self.y is None else _frozen(self.y)
        cols = [w, x, z] + ([] if y is None else [y])
        if w.size == 0:
            raise EmptyInput("scenario table has no rows")
        if any(c.ndim != 1 or c.size != w.size for c in cols):
            raise LengthMismatch("all scenario columns must have the same length")
        if not all(np.all(np.isfinite(c)) for c in cols):
            raise NonFiniteValue("scenario table contains NaN or infinite entries")
        if np.any(w < 0):
            raise NegativeWeight("scenario weights must be non-negative")
        if w.sum() <= 0:
            raise ZeroTotalWeight("scenario weights sum to zero")
        for name, col in (("weights", w), ("x", x), ("z", z), ("y", y)):
            object.__setattr__(self, name, col)

    @classmethod
    def from_rows(cls, rows) -> "ScenarioTable":
        rows = [tuple(r) for r in rows]
        if not rows:
            raise EmptyInput("scenario table has no rows")
        widths = {len(r) for r in rows}
        if widths == {3}:
            w, x, z = zip(*rows)
            return cls(w, x, z)
        if widths == {4}:
            w, x, z, y = zip(*rows)
            return cls(w, x, z, y)
        raise LengthMismatch("rows must all be (weight, x, z) or all (weight, x, z, y)")

    def __len__(self) -> int:
        return self.weights.size

    def with_loss(self, x) -> "ScenarioTable":
        """Same scenarios and environment, different loss column."""
        return ScenarioTable(self.weights, x, self.z, self.y)

    def marginal_x(self) -> DiscreteDistribution:
        return build_distribution(self.x, self.weights)


@dataclass(frozen=True)
class Binning:
    """How environment values are grouped into states.

    ``mode`` is ``"distinct-values"`` or ``"equiprobable"`` (with ``k`` bins).
    """

    mode: str = "distinct-values"
    k: int | None = None

    def __post_init__(self):
        if self.mode not in ("distinct-values", "equiprobable"):
            raise BinningInfeasible(f"unknown binning mode {self.mode!r}")
        if self.mode == "equiprobable" and (self.k is None or int(self.k) < 1):
            raise BinningInfeasible("equiprobable binning needs k >= 1")

    @classmethod
    def distinct(cls) -> "Binning":
        return cls("distinct-values")

    @classmethod
    def equiprobable(cls, k: int) -> "Binning":
        return cls("equiprobable", int(k))


@dataclass(frozen=True, eq=False)
class ConditionalModel:
    """Environment law over finitely many states plus one conditional loss
    law per state."""

    states: np.ndarray
    state_probs: DiscreteDistribution
    conditionals: tuple[DiscreteDistribution, ...]

    def __post_init__(self):
        s = _frozen(self.states)
        if s.size == 0:
            raise EmptyInput("model has no states")
        if np.any(np.diff(s) <= 0):
            raise BinningInfeasible("states must be distinct and sorted")
        if not np.array_equal(self.state_probs.values, s):
            raise LengthMismatch("state_probs must be supported exactly on the states")
        conds = tuple(self.conditionals)
        if len(conds) != s.size:
            raise LengthMismatch(f"{s.size} states but {len(conds)} conditionals")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "conditionals", conds)

    @classmethod
    def from_parts(cls, states, probs, conditionals) -> "ConditionalModel":
        """Build from aligned state values, probabilities and laws.

        States need not be sorted; zero-probability states are dropped.
        """
        states = np.asarray(states, dtype=float)
        probs = np.asarray(probs, dtype=float)
        conditionals = list(conditionals)
        if not (states.size == probs.size == len(conditionals)):
            raise LengthMismatch("states, probs and conditionals must align")
        if states.size == 0:
            raise EmptyInput("model has no states")
        if np.any(probs < 0):
            raise NegativeWeight("state probabilities must be non-negative")
        if probs.sum() <= 0:
            raise ZeroTotalWeight("state probabilities sum to zero")
        order = np.argsort(states, kind="stable")
        keep = [i for i in order if probs[i] > 0]
        s = states[keep]
        p = probs[keep] / probs[keep].sum()
        return cls(s, DiscreteDistribution(s, p), tuple(conditionals[i] for i in keep))

    @property
    def n_states(self) -> int:
        return self.states.size

    @property
    def probs(self) -> np.ndarray:
        return self.state_probs.probs

    def mixture(self) -> DiscreteDistribution:
        """Marginal loss law obtained by mixing the conditionals."""
        vals = np.concatenate([c.values for c in self.conditionals])
        wts = np.concatenate([p * c.probs for p, c in zip(self.probs, self.conditionals)])
        return build_distribution(vals, wts)

    def permuted(self, perm) -> "ConditionalModel":
        """Reassign the conditionals and probabilities of state ``i`` to
        state ``perm[i]``; state values themselves stay in place."""
        perm = np.asarray(perm)
        probs = np.empty(self.n_states)
        conds = [None] * self.n_states
        for i, j in enumerate(perm):
            probs[j] = self.probs[i]
            conds[j] = self.conditionals[i]
        return ConditionalModel.from_parts(self.states, probs, conds)


def _bin_labels(z: np.ndarray, w: np.ndarray, binning: Binning) -> tuple[np.ndarray, np.ndarray]:
    """Return (label per row, representative state value per label)."""
    distinct, inverse = np.unique(z, return_inverse=True)
    if binning.mode == "distinct-values":
        return inverse, distinct
    k = int(binning.k)
    if k > distinct.size:
        raise BinningInfeasible(f"k={k} exceeds the {distinct.size} distinct environment values")
    zw = np.bincount(inverse, weights=w, minlength=distinct.size)
    total = zw.sum()
    before = np.concatenate([[0.0], np.cumsum(zw)[:-1]])
    # each distinct value goes to the quantile bin holding its weight midpoint
    raw = np.minimum(np.floor(k * (before + 0.5 * zw) / total), k - 1).astype(int)
    # bins that received nothing are dropped; labels stay contiguous
    _, dense = np.unique(raw, return_inverse=True)
    labels = dense[inverse]
    nb = dense.max() + 1
    bw = np.bincount(labels, weights=w, minlength=nb)
    bz = np.bincount(labels, weights=w * z, minlength=nb)
    reps = np.where(bw > 0, bz / np.where(bw > 0, bw, 1.0), 0.0)
    for b in range(nb):
        if bw[b] <= 0:
            reps[b] = z[labels == b].mean()
    return labels, reps


def build_conditional_model(table: ScenarioTable, binning: Binning | None = None) -> ConditionalModel:
    """Group scenarios into environment states and build per-state loss laws.

    With equiprobable binning the state value is the weighted mean of the
    environment values falling into the bin.
    """
    binning = binning or Binning.distinct()
    if len(table) == 0:
        raise EmptyInput("scenario table has no rows")
    labels, reps = _bin_labels(table.z, table.weights, binning)
    nb = reps.size
    bw = np.bincount(labels, weights=table.weights, minlength=nb)
    states, probs, conds = [], [], []
    for b in range(nb):
        if bw[b] <= 0:
            continue
        mask = labels == b
        states.append(reps[b])
        probs.append(bw[b])
        conds.append(build_distribution(table.x[mask], table.weights[mask]))
    if len(set(states)) != len(states):
        raise BinningInfeasible("binning produced coincident state values")
    return ConditionalModel.from_parts(states, probs, conds)


def read_scenarios_csv(path: str | Path) -> ScenarioTable:
    """Read a ``weight,x,z[,y]`` CSV file."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedInput("file is empty", row=0) from None
        header = [h.strip().lower() for h in header]
        if header not in (["weight", "x", "z"], ["weight", "x", "z", "y"]):
            raise MalformedInput(f"expected header weight,x,z[,y], got {','.join(header)}", row=1)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise MalformedInput(f"expected {len(header)} fields, got {len(rec)}", row=lineno)
            try:
                vals = tuple(float(f) for f in rec)
            except ValueError:
                raise MalformedInput(f"non-numeric field in {rec!r}", row=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedInput("non-finite value", row=lineno)
            if vals[0] < 0:
                raise MalformedInput("negative weight", row=lineno)
            rows.append(vals)
    if not rows:
        raise MalformedInput("no data rows", row=1)
    try:
        return ScenarioTable.from_rows(rows)
    except ZeroTotalWeight as exc:
        raise MalformedInput(str(exc)) from None
