"""Reduced-rank cubic regression spline bases over log training-set size.

The basis is the cardinal natural cubic spline family: one basis function per
knot, each interpolating 1 at its own knot and 0 at the others, with natural
(zero second derivative) boundary conditions and linear extrapolation beyond
the boundary knots.  The roughness penalty is the exact integrated squared
second derivative, a k x k quadratic form whose null space is the affine
functions of the covariate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError

DEFAULT_KNOT_COUNT = 5

# column-sum norm below which a basis is treated as already centered
_CENTERED_TOL = 1e-10


@dataclass(frozen=True)
class KnotVector:
    """Strictly increasing knot locations on the covariate axis."""

    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 3:
            raise InputError("need at least 3 knots")
        if not np.all(np.diff(k) > 0):
            raise InputError("knots must be strictly increasing")
        object.__setattr__(self, "knots", k)

    @property
    def count(self) -> int:
        return self.knots.size


@dataclass(frozen=True)
class SmoothBasis:
    """Evaluated spline basis plus its curvature penalty.

    `basis_matrix` holds one row per data point; `penalty_matrix` is the
    integrated-squared-second-derivative quadratic form in the same
    coordinates.  After centering, `constraint` records the k x (k-1)
    reparameterization applied to the raw cardinal basis (None before).
    """

    basis_matrix: np.ndarray
    penalty_matrix: np.ndarray
    knot_vector: KnotVector
    covariate_name: str = "x"
    constraint: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.basis_matrix.shape[1]

    def evaluate(self, x) -> np.ndarray:
        """Basis rows at new covariate values, in this basis's coordinates."""
        raw = _cardinal_rows(np.asarray(x, dtype=float), self.knot_vector.knots)
        return raw if self.constraint is None else raw @ self.constraint


def place_knots(distinct_covariate_values, k: int = DEFAULT_KNOT_COUNT) -> KnotVector:
    """Knots at even quantiles of rank space over the distinct sorted values.

    The first and last knots coincide with the extreme values; interior knots
    interpolate linearly between adjacent distinct values.
    """
    vals = np.unique(np.asarray(distinct_covariate_values, dtype=float))
    if vals.size < 2:
        raise InputError("need at least 2 distinct covariate values to place knots")
    if k < 3:
        raise InputError(f"knot count {k} below the minimum of 3")
    if not np.all(np.isfinite(vals)):
        raise InputError("covariate values must be finite")
    ranks = np.linspace(0.0, vals.size - 1.0, k)
    return KnotVector(knots=np.interp(ranks, np.arange(vals.size), vals))


def _natural_spline_system(knots: np.ndarray):
    """Value-to-second-derivative map F (k x k) and penalty S = D' B^-1 D.

    For a natural cubic spline through (t_j, f_j) the interior second
    derivatives m satisfy B m = D f with the classic tridiagonal B and
    second-difference D; the boundary second derivatives are zero.  The
    integrated squared second derivative is then f' D' B^-1 D f.
    """
    t = knots
    k = t.size
    h = np.diff(t)
    B = np.zeros((k - 2, k - 2))
    D = np.zeros((k - 2, k))
    for i in range(k - 2):
        B[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < k - 2:
            B[i, i + 1] = h[i + 1] / 6.0
            B[i + 1, i] = h[i + 1] / 6.0
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
    binv_d = np.linalg.solve(B, D)
    F = np.zeros((k, k))
    F[1:-1, :] = binv_d
    S = D.T @ binv_d
    return F, 0.5 * (S + S.T)


def _cardinal_rows(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Rows of the cardinal natural cubic spline basis at points x.

    Inside the knot range each row mixes the bracketing hat coordinates with
    the second-derivative map; outside it extends linearly with the boundary
    slope (natural spline behavior).
    """
    if not np.all(np.isfinite(x)):
        raise InputError("covariate values must be finite")
    t = knots
    k = t.size
    h = np.diff(t)
    F, _ = _natural_spline_system(t)

    x = np.atleast_1d(x)
    rows = np.zeros((x.size, k))

    inside = (x >= t[0]) & (x <= t[-1])
    xi = x[inside]
    j = np.clip(np.searchsorted(t, xi, side="right") - 1, 0, k - 2)
    hj = h[j]
    left = (t[j + 1] - xi) / hj
    right = (xi - t[j]) / hj
    cl = ((t[j + 1] - xi) ** 3 / hj - hj * (t[j + 1] - xi)) / 6.0
    cr = ((xi - t[j]) ** 3 / hj - hj * (xi - t[j])) / 6.0
    block = cl[:, None] * F[j] + cr[:, None] * F[j + 1]
    idx = np.flatnonzero(inside)
    rows[idx] = block
    rows[idx, j] += left
    rows[idx, j + 1] += right

    lo = x < t[0]
    if lo.any():
        slope = np.zeros(k)
        slope[0] = -1.0 / h[0]
        slope[1] = 1.0 / h[0]
        slope -= h[0] / 6.0 * F[1]
        base = np.zeros(k)
        base[0] = 1.0
        rows[lo] = base + (x[lo] - t[0])[:, None] * slope

    hi = x > t[-1]
    if hi.any():
        slope = np.zeros(k)
        slope[-2] = -1.0 / h[-1]
        slope[-1] = 1.0 / h[-1]
        slope += h[-1] / 6.0 * F[-2]
        base = np.zeros(k)
        base[-1] = 1.0
        rows[hi] = base + (x[hi] - t[-1])[:, None] * slope

    return rows


def build_basis(x, knots: KnotVector, covariate_name: str = "x") -> SmoothBasis:
    """Cardinal basis evaluated at x plus the curvature penalty matrix."""
    _, S = _natural_spline_system(knots.knots)
    return SmoothBasis(
        basis_matrix=_cardinal_rows(np.asarray(x, dtype=float), knots.knots),
        penalty_matrix=S,
        knot_vector=knots,
        covariate_name=covariate_name,
    )


def center_basis(basis: SmoothBasis, weights=None) -> SmoothBasis:
    """Apply the sum-to-zero-over-data identifiability constraint.

    Drops one rank: columns of the returned basis sum to zero over the rows
    it was built on, so the smooth carries no constant and is estimable next
    to an intercept.  Centering an already-centered basis is a no-op.

    `weights` optionally restricts the constraint to a subset of rows (e.g.
    the rows of one factor level for a by-level smooth).
    """
    B = basis.basis_matrix
    col_sums = B.sum(axis=0) if weights is None else (np.asarray(weights, float) @ B)
    norm = np.linalg.norm(col_sums)
    if norm < _CENTERED_TOL:
        return basis
    Q, _ = np.linalg.qr(col_sums.reshape(-1, 1) / norm, mode="complete")
    Z = Q[:, 1:]
    constraint = Z if basis.constraint is None else basis.constraint @ Z
    return replace(
        basis,
        basis_matrix=B @ Z,
        penalty_matrix=_symmetrize(Z.T @ basis.penalty_matrix @ Z),
        constraint=constraint,
    )


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)
