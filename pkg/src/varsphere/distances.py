"""Distances and association measures between resultant operators.

Unit-norm resultants live on the sphere of operator space, where two natural
metrics coexist: the chord (straight-line) distance and the geodesic
(arc-length) distance.  Both are driven by the trace scalar product, which
for variable encodings expands into sums of squared correlations, so the
classical RV, phi-square and Tschuprow association measures all appear as
cosines here.
"""

from __future__ import annotations

import numpy as np

from .encoding import Resultant, VariableStructure, resultant
from .errors import NumericalError, ValidationError
from .geometry import Weights, sqrt_spd

COS_SLACK = 1e-8


def _paired(a: Resultant, b: Resultant) -> None:
    if not a.weights.same_as(b.weights):
        raise ValidationError("resultants live on different weight systems")


def _require_normed(*rs: Resultant) -> None:
    for r in rs:
        if not r.normed:
            raise ValidationError("this distance is defined for unit-norm resultants only")


def clamped_cosine(value: float) -> float:
    """Clip a cosine to [-1, 1], refusing values far outside the range."""
    if value > 1.0 + COS_SLACK or value < -COS_SLACK:
        raise NumericalError(f"cosine {value!r} is outside the tolerated range")
    return min(max(value, -1.0), 1.0)


def chord_dist(a: Resultant, b: Resultant) -> float:
    """Straight-line distance sqrt(2 (1 - [A|B])) between unit-norm operators."""
    _paired(a, b)
    _require_normed(a, b)
    return float(np.sqrt(max(2.0 * (1.0 - a.dot(b)), 0.0)))


def geodesic_dist(a: Resultant, b: Resultant) -> float:
    """Arc-length distance arccos([A|B]) on the unit sphere of operators."""
    _paired(a, b)
    _require_normed(a, b)
    return float(np.arccos(clamped_cosine(a.dot(b))))


def rv_cos(a: Resultant, b: Resultant) -> float:
    """Cosine [A|B] / (||A|| ||B||); the RV coefficient of the two structures."""
    _paired(a, b)
    na, nb = a.norm(), b.norm()
    if na <= 0.0 or nb <= 0.0:
        raise NumericalError("cannot take the cosine with a zero operator")
    return a.dot(b) / (na * nb)


def phi2(xs: VariableStructure, ys: VariableStructure, weights: Weights) -> float:
    """Mean-square contingency between two categorical structures.

    Computed as the trace scalar product of the two indicator-space
    projectors; it equals the weighted contingency-table statistic
    sum_ij (p_ij - p_i p_j)^2 / (p_i p_j).
    """
    if xs.kind != "categorical" or ys.kind != "categorical":
        raise ValidationError("phi2 is defined for categorical structures")
    px = resultant(xs, weights, normed=False)
    py = resultant(ys, weights, normed=False)
    return px.dot(py)


def tschuprow(xs: VariableStructure, ys: VariableStructure, weights: Weights) -> float:
    """Tschuprow-normalized association: the cosine of the normed projectors.

    Equals phi2 / (sqrt(r - 1) sqrt(s - 1)) for r and s levels; its square is
    the classical Tschuprow T^2.
    """
    value = phi2(xs, ys, weights)
    r = len(xs.levels)
    s = len(ys.levels)
    return value / (np.sqrt(r - 1.0) * np.sqrt(s - 1.0))


def resultant_dot_expanded(x, m, y, n, weights: Weights) -> float:
    """[R_X,M | R_Y,N] computed from columns: sum of squared weighted products.

    With X~ = X M^1/2 and Y~ = Y N^1/2 the trace product expands into
    sum_jk <x~_j | y~_k>^2, the form used to read the scalar product as an
    accumulation of squared correlations.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != weights.n or y.shape[0] != weights.n:
        raise ValidationError("blocks must be n x q matrices on the shared weights")
    xt = x @ sqrt_spd(m)
    yt = y @ sqrt_spd(n)
    cross = xt.T @ (weights.w[:, None] * yt)
    return float(np.sum(cross * cross))
