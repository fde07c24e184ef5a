"""Variable structures and their resultant operators.

A variable-structure is a centred data block X together with a symmetric
positive-definite metric M on its columns.  Its resultant R = X M X' W is a
weighted-spsd operator on observation space; scaled to unit trace norm it
becomes a point on the unit sphere of operator space, which is the common
representation this package clusters and averages.

Numeric variables, categorical variables (through the projector onto their
centred indicator space) and whole metric-weighted blocks all reduce to this
one representation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .geometry import (
    Weights,
    check_w_spsd,
    operator_norm,
    sqrt_spd,
    variance_floor,
    w_spsd_eigen,
)

KINDS = ("numeric", "categorical", "block")


@dataclass(frozen=True)
class VariableStructure:
    """A centred data block with a positive-definite column metric.

    Attributes:
        X: n x q matrix of weighted-centred columns.
        M: q x q symmetric positive-definite metric.
        label: display name.
        kind: one of "numeric", "categorical", "block".
        dim_weight: reciprocal norm of the resultant, recorded so callers can
            see how much raw operator mass the structure carries (it is
            applied implicitly whenever the resultant is normed).
        levels: for categorical structures, the level labels in
            first-appearance order.
    """

    X: np.ndarray
    M: np.ndarray
    label: str
    kind: str
    dim_weight: float
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown structure kind {self.kind!r}")

    @property
    def q(self) -> int:
        return self.X.shape[1]


class Resultant:
    """An operator X M X' W, optionally scaled to unit trace norm."""

    def __init__(self, op: np.ndarray, weights: Weights, normed: bool, label: str = ""):
        op = np.asarray(op, dtype=float)
        if op.shape != (weights.n, weights.n):
            raise ValidationError(
                f"operator shape {op.shape} does not match {weights.n} observations"
            )
        if not np.all(np.isfinite(op)):
            raise ValidationError("operator contains non-finite entries")
        check_w_spsd(op, weights)
        if normed:
            nrm = operator_norm(op, weights)
            if abs(nrm - 1.0) > 1e-8:
                raise ValidationError(f"operator flagged as normed has norm {nrm!r}")
        self.op = op
        self.weights = weights
        self.normed = bool(normed)
        self.label = label
        self._eigen: tuple[np.ndarray, np.ndarray] | None = None
        self._norm: float | None = 1.0 if normed else None

    def norm(self) -> float:
        if self._norm is None:
            self._norm = operator_norm(self.op, self.weights)
        return self._norm

    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached spectral decomposition (U, lam) with op = U diag(lam) U' W."""
        if self._eigen is None:
            self._eigen = w_spsd_eigen(self.op, self.weights)
        return self._eigen

    def dot(self, other: "Resultant") -> float:
        """Trace scalar product with another resultant on the same weights."""
        if not self.weights.same_as(other.weights):
            raise ValidationError("resultants live on different weight systems")
        # both operators are weighted-spsd, so tr(A* B) reduces to tr(A B)
        return float(np.sum(self.op * other.op.T))

    def __repr__(self) -> str:  # pragma: no cover
        tag = "normed" if self.normed else "raw"
        return f"Resultant({self.label or 'unnamed'}, n={self.weights.n}, {tag})"


def resultant(structure: VariableStructure, weights: Weights, normed: bool = True) -> Resultant:
    """Materialize R = X M X' W for a structure, normed to unit norm by default."""
    if structure.X.shape[0] != weights.n:
        raise ValidationError("structure and weights disagree on the number of observations")
    r = (structure.X @ structure.M @ structure.X.T) * weights.w[None, :]
    nrm = operator_norm(r, weights)
    if nrm <= 1e-300:
        raise NumericalError(f"structure {structure.label!r} has a zero resultant")
    if normed:
        r = r / nrm
    return Resultant(r, weights, normed=normed, label=structure.label)


def _center_columns(x: np.ndarray, weights: Weights) -> np.ndarray:
    return x - (weights.w[None, :] @ x)


def encode_numeric(x, weights: Weights, label: str = "") -> VariableStructure:
    """Encode one numeric variable; its normed resultant is the line projector.

    The centred column with metric 1/variance yields R = x~ x~' W for the
    standardized vector x~, a rank-one unit-norm operator that is invariant
    under any affine rescaling a*x + b (a != 0).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != weights.n:
        raise ValidationError(f"expected {weights.n} values for {label!r}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"numeric variable {label!r} contains non-finite values")
    c = x - np.sum(weights.w * x)
    v = float(np.sum(weights.w * c * c))
    if v <= variance_floor(x, weights):
        raise ValidationError(f"numeric variable {label!r} has zero variance")
    structure = VariableStructure(
        X=c[:, None], M=np.array([[1.0 / v]]), label=label, kind="numeric", dim_weight=1.0
    )
    return structure


def encode_categorical(
    labels, weights: Weights, label: str = "", drop_level: int | None = None
) -> VariableStructure:
    """Encode a categorical variable through its centred indicator projector.

    Levels are taken in first-appearance order; one level (the last seen, by
    default) is dropped to make the centred indicators a basis, and the
    metric (X'WX)^-1 turns the resultant into the orthogonal projector onto
    the indicator space.  The projector does not depend on which level was
    dropped, and its norm is sqrt(m - 1) for m levels.
    """
    labels = list(labels)
    if len(labels) != weights.n:
        raise ValidationError(f"expected {weights.n} labels for {label!r}, got {len(labels)}")
    levels: list = []
    seen = set()
    for v in labels:
        if v not in seen:
            seen.add(v)
            levels.append(v)
    m = len(levels)
    if m < 2:
        raise ValidationError(f"categorical variable {label!r} has a single level")
    index = {lv: j for j, lv in enumerate(levels)}
    ind = np.zeros((weights.n, m))
    ind[np.arange(weights.n), [index[v] for v in labels]] = 1.0
    drop = m - 1 if drop_level is None else int(drop_level)
    if not 0 <= drop < m:
        raise ValidationError(f"drop_level {drop} out of range for {m} levels")
    kept = [j for j in range(m) if j != drop]
    x = _center_columns(ind[:, kept], weights)
    xtwx = x.T @ (weights.w[:, None] * x)
    metric = np.linalg.inv(xtwx)
    metric = 0.5 * (metric + metric.T)
    structure = VariableStructure(
        X=x,
        M=metric,
        label=label,
        kind="categorical",
        dim_weight=1.0 / np.sqrt(m - 1.0),
        levels=tuple(levels),
    )
    return structure


def encode_block(x, m, weights: Weights, label: str = "") -> VariableStructure:
    """Encode a whole data block with an explicit positive-definite metric."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != weights.n:
        raise ValidationError(f"block {label!r} must be an n x q matrix with n = {weights.n}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"block {label!r} contains non-finite values")
    m = np.asarray(m, dtype=float)
    if m.shape != (x.shape[1], x.shape[1]):
        raise ValidationError(f"metric shape {m.shape} does not fit block with {x.shape[1]} columns")
    sqrt_spd(m)  # validates symmetry and positive definiteness
    xc = _center_columns(x, weights)
    if float(np.max(np.abs(xc))) <= 0.0:
        raise ValidationError(f"block {label!r} is zero after centering")
    nrm = operator_norm((xc @ m @ xc.T) * weights.w[None, :], weights)
    if nrm <= 1e-300:
        raise NumericalError(f"block {label!r} has a zero resultant")
    return VariableStructure(
        X=xc, M=m, label=label, kind="block", dim_weight=1.0 / nrm
    )


def compound_structure(
    structures: list[VariableStructure], omega, weights: Weights, label: str = ""
) -> VariableStructure:
    """Bundle several structures into one block whose normed resultant is the
    normed weighted average of the members' unit-norm resultants.

    Each member contributes the columns sqrt(omega_h / ||R_h||) * X_h M_h^1/2
    under the identity metric, so the compound resultant expands to
    sum_h omega_h R_h / ||R_h||.
    """
    if not structures:
        raise ValidationError("need at least one structure to compound")
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (len(structures),):
        raise ValidationError("one weight per structure is required")
    if np.any(omega < 0.0) or abs(omega.sum() - 1.0) > 1e-12:
        raise ValidationError("structure weights must be non-negative and sum to 1")
    blocks = []
    for share, s in zip(omega, structures):
        if s.X.shape[0] != weights.n:
            raise ValidationError("all structures must share the observation weights")
        r = (s.X @ s.M @ s.X.T) * weights.w[None, :]
        nrm = operator_norm(r, weights)
        if nrm <= 1e-300:
            raise NumericalError(f"structure {s.label!r} has a zero resultant")
        blocks.append(np.sqrt(share / nrm) * (s.X @ sqrt_spd(s.M)))
    x = np.concatenate(blocks, axis=1)
    nrm = operator_norm((x @ x.T) * weights.w[None, :], weights)
    if nrm <= 1e-300:
        raise NumericalError("compound structure has a zero resultant")
    return VariableStructure(
        X=x,
        M=np.eye(x.shape[1]),
        label=label or "+".join(s.label for s in structures),
        kind="block",
        dim_weight=1.0 / nrm,
    )
