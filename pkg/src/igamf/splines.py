# -*- coding: utf-8 -*-
"""Univariate B-spline spaces, collocation matrices and multi-index bookkeeping.

All knot vectors are open and live on the parametric interval [0, 1].
Evaluation at a knot uses the right-continuous limit, except at the right
domain endpoint where the left limit is taken, so that basis values are
well defined at every quadrature point including span endpoints.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector of degree ``p`` on [0, 1].

    The number of basis functions is ``m = len(knots) - p - 1``.
    """

    degree: int
    knots: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = self.degree
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        knots = np.ascontiguousarray(np.asarray(self.knots, dtype=float))
        object.__setattr__(self, "knots", knots)
        knots.setflags(write=False)
        if knots.ndim != 1 or len(knots) < 2 * (p + 1):
            raise ValueError("knot vector too short for the given degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knot vector must start at 0 and end at 1")
        if np.any(knots[: p + 1] != 0.0) or np.any(knots[-(p + 1) :] != 1.0):
            raise ValueError("knot vector must be open (p+1 repeats at each end)")
        if knots[p + 1] == 0.0 or knots[-(p + 2)] == 1.0:
            raise ValueError("endpoint multiplicity must be exactly p+1")
        interior = knots[p + 1 : len(knots) - p - 1]
        if len(interior) > 0:
            _, counts = np.unique(interior, return_counts=True)
            if np.any(counts > p):
                raise ValueError("interior knot multiplicity exceeds p")

    @property
    def n_funcs(self) -> int:
        """Number of univariate basis functions (before boundary removal)."""
        return len(self.knots) - self.degree - 1

    @property
    def n_interior(self) -> int:
        """Basis functions kept after removing the first and last one."""
        return self.n_funcs - 2

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knot values, i.e. the element boundaries."""
        return np.unique(self.knots)

    @property
    def n_elements(self) -> int:
        return len(self.breakpoints) - 1

    def max_interior_multiplicity(self) -> int:
        interior = self.knots[self.degree + 1 : len(self.knots) - self.degree - 1]
        if len(interior) == 0:
            return 0
        _, counts = np.unique(interior, return_counts=True)
        return int(counts.max())

    def support(self, i: int) -> tuple[float, float]:
        """Closed support of basis function ``i`` (0-based)."""
        return float(self.knots[i]), float(self.knots[i + self.degree + 1])

    def find_span(self, x: float) -> int:
        """Index k with knots[k] <= x < knots[k+1] (right-continuous; left at x=1)."""
        knots = self.knots
        if x < knots[0] or x > knots[-1]:
            raise ValueError(f"point {x} outside [0, 1]")
        k = int(np.searchsorted(knots, x, side="right")) - 1
        return min(max(k, self.degree), self.n_funcs - 1)


def make_uniform_knots(p: int, n_el: int) -> KnotVector:
    """Open uniform knot vector with ``n_el`` spans and interior multiplicity 1."""
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    if n_el < 1:
        raise ValueError(f"number of elements must be >= 1, got {n_el}")
    interior = np.arange(1, n_el) / n_el
    knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(p, knots)


def _basis_funs(kv: KnotVector, x: float, span: int) -> np.ndarray:
    """Values of the p+1 nonzero basis functions at ``x`` (Cox-de Boor)."""
    p = kv.degree
    knots = kv.knots
    N = np.empty(p + 1)
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    N[0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            temp = N[r] / denom if denom != 0.0 else 0.0
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    return N


def _basis_funs_deriv(kv: KnotVector, x: float, span: int) -> np.ndarray:
    """First derivatives of the p+1 nonzero basis functions at ``x``."""
    p = kv.degree
    knots = kv.knots
    # Degree p-1 values on the same knot vector, then the standard
    # two-term derivative formula.
    if p == 1:
        lower = np.array([1.0])
    else:
        lower_kv_vals = np.empty(p)
        left = np.empty(p)
        right = np.empty(p)
        lower_kv_vals[0] = 1.0
        for j in range(1, p):
            left[j] = x - knots[span + 1 - j]
            right[j] = knots[span + j] - x
            saved = 0.0
            for r in range(j):
                denom = right[r + 1] + left[j - r]
                temp = lower_kv_vals[r] / denom if denom != 0.0 else 0.0
                lower_kv_vals[r] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            lower_kv_vals[j] = saved
        lower = lower_kv_vals
    # Nonzero degree p-1 functions at x are indices span-p+1 .. span.
    D = np.empty(p + 1)
    for idx in range(p + 1):
        i = span - p + idx  # global index of the degree-p function
        d = 0.0
        # term with b_{i, p-1}
        j1 = i
        if span - p + 1 <= j1 <= span:
            denom = knots[i + p] - knots[i]
            if denom != 0.0:
                d += p * lower[j1 - (span - p + 1)] / denom
        # term with b_{i+1, p-1}
        j2 = i + 1
        if span - p + 1 <= j2 <= span:
            denom = knots[i + p + 1] - knots[i + 1]
            if denom != 0.0:
                d -= p * lower[j2 - (span - p + 1)] / denom
        D[idx] = d
    return D


def collocation_matrix(kv: KnotVector, points, deriv: int = 0) -> sp.csr_matrix:
    """Sparse matrix of the ``deriv``-th derivative of all basis functions.

    Entry (q, j) is D^deriv b_j(x_q).  Shape (n_points, m); each row has at
    most p+1 nonzeros.  Points must lie in [0, 1].
    """
    if deriv not in (0, 1):
        raise ValueError("only derivative orders 0 and 1 are supported")
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if np.any(points < 0.0) or np.any(points > 1.0):
        bad = points[(points < 0.0) | (points > 1.0)][0]
        raise ValueError(f"point {bad} outside [0, 1]")
    p = kv.degree
    nq = len(points)
    rows = np.repeat(np.arange(nq), p + 1)
    cols = np.empty(nq * (p + 1), dtype=np.int64)
    vals = np.empty(nq * (p + 1))
    for q, x in enumerate(points):
        span = kv.find_span(x)
        if deriv == 0:
            loc = _basis_funs(kv, x, span)
        else:
            loc = _basis_funs_deriv(kv, x, span)
        cols[q * (p + 1) : (q + 1) * (p + 1)] = np.arange(span - p, span + 1)
        vals[q * (p + 1) : (q + 1) * (p + 1)] = loc
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(nq, kv.n_funcs))
    mat.eliminate_zeros()
    return mat


@dataclass(frozen=True)
class TensorSpace:
    """Tensor product of univariate spline spaces with Dirichlet boundary removal.

    Per direction, the first and last basis function are dropped; the
    remaining ``n = m - 2`` functions per direction give ``N = prod(n)``
    degrees of freedom.  A multi-index (i_1, ..., i_d) maps to the scalar
    index with direction 1 running fastest.
    """

    knotvectors: tuple[KnotVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "knotvectors", tuple(self.knotvectors))
        for kv in self.knotvectors:
            if kv.n_interior < 1:
                raise ValueError("each direction needs at least one interior function")

    @property
    def dim(self) -> int:
        return len(self.knotvectors)

    @property
    def n_per_dir(self) -> tuple[int, ...]:
        return tuple(kv.n_interior for kv in self.knotvectors)

    @property
    def n_dofs(self) -> int:
        return int(np.prod(self.n_per_dir))


def tensor_space(p: int, n_el: int, d: int = 3) -> TensorSpace:
    """Isotropic tensor space: same degree and uniform mesh in every direction."""
    kv = make_uniform_knots(p, n_el)
    return TensorSpace((kv,) * d)


def multi_to_scalar(multi, dims) -> int:
    """1-based multi-index to 1-based scalar index, first direction fastest."""
    multi = tuple(int(i) for i in multi)
    dims = tuple(int(s) for s in dims)
    if len(multi) != len(dims):
        raise ValueError("multi-index and dims length mismatch")
    stride = 1
    out = 1
    for i_l, s_l in zip(multi, dims):
        if not 1 <= i_l <= s_l:
            raise ValueError(f"index component {i_l} out of range 1..{s_l}")
        out += (i_l - 1) * stride
        stride *= s_l
    return out


def scalar_to_multi(i: int, dims) -> tuple[int, ...]:
    """Inverse of :func:`multi_to_scalar`."""
    dims = tuple(int(s) for s in dims)
    total = int(np.prod(dims))
    if not 1 <= i <= total:
        raise ValueError(f"scalar index {i} out of range 1..{total}")
    rem = i - 1
    multi = []
    for s_l in dims:
        multi.append(rem % s_l + 1)
        rem //= s_l
    return tuple(multi)
