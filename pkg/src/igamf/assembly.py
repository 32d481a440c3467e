# -*- coding: utf-8 -*-
"""Explicit sparse assembly oracles and load-vector assembly.

Two assembly routes: standard element-wise Gaussian quadrature (SGQ,
symmetric) and explicit materialization of the weighted-quadrature
factorization (generally nonsymmetric on curved geometries).  Both exist
for correctness checks and baseline comparisons, not performance.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .kron import kron_apply, kron_materialize, tensor_grid
from .splines import collocation_matrix
from .wq import gauss_points_weights

#: conservative default guard on assembled nonzeros
NNZ_GUARD = 5 * 10**7


class MemoryGuardError(MemoryError):
    def __init__(self, estimate, guard):
        self.estimate = estimate
        self.guard = guard
        super().__init__(
            f"assembly would need about {estimate:.2e} stored entries "
            f"(guard {guard:.2e}); pass a larger guard to override"
        )


@dataclass(frozen=True)
class AssembledMatrix:
    matrix: sp.csr_matrix = field(repr=False)
    provenance: str
    quadrature: str

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self):
        return self.matrix.nnz

    def export_coo(self, path):
        """Write (row, col, value) triplets as text, one per line."""
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {self.provenance} {self.shape[0]}x{self.shape[1]} "
                     f"nnz={self.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v:.17g}\n")


def estimate_matrix_nnz(space) -> int:
    """Exact nonzero count of the Galerkin matrix from the 1D overlap pattern."""
    nnz = 1
    for kv in space.knotvectors:
        p = kv.degree
        n = kv.n_interior
        per_dir = 0
        for i in range(n):
            per_dir += min(i + p, n - 1) - max(i - p, 0) + 1
        nnz *= per_dir
    return nnz


def max_row_nnz(space) -> int:
    """Largest per-row nonzero count of the Galerkin matrix."""
    out = 1
    for kv in space.knotvectors:
        out *= min(2 * kv.degree + 1, kv.n_interior)
    return out


def _gauss_factors(space, pts_per_span):
    """Per-direction Gauss points/weights and interior collocation factors."""
    pts, wts, B0, B1 = [], [], [], []
    for kv in space.knotvectors:
        x, w = gauss_points_weights(kv, pts_per_span)
        pts.append(x)
        wts.append(w)
        B0.append(collocation_matrix(kv, x, 0)[:, 1:-1].tocsr())
        B1.append(collocation_matrix(kv, x, 1)[:, 1:-1].tocsr())
    return pts, wts, B0, B1


def _grid_coeffs_sgq(space, geom, coeff, kind, pts, wts):
    """Quadrature-scaled coefficient grids at the tensor Gauss points."""
    d = space.dim
    grids = tensor_grid(pts)
    xi = np.stack(grids, axis=1)
    wgrid = tensor_grid(wts)
    wtot = np.ones(len(xi))
    for w in wgrid:
        wtot = wtot * w
    J = geom.jacobian(xi)
    det = np.linalg.det(J)
    if kind == "mass":
        alpha = coeff if coeff is not None else 1.0
        vals = (alpha(geom.evaluate(xi)) if callable(alpha) else float(alpha)) * det
        return {None: wtot * vals}
    Jinv = np.linalg.inv(J)
    if callable(coeff):
        Kvals = coeff(geom.evaluate(xi))
    elif coeff is None:
        Kvals = np.broadcast_to(np.eye(d), (len(xi), d, d))
    else:
        Kvals = np.broadcast_to(np.asarray(coeff, dtype=float), (len(xi), d, d))
    C = np.einsum("qij,qjk,qlk->qil", Jinv, Kvals, Jinv) * det[:, None, None]
    return {(a, b): wtot * C[:, a, b] for a in range(d) for b in range(d)}


def assemble_sgq(space, geom, coeff=None, kind="mass", gauss_pts_per_span=None,
                 nnz_guard=NNZ_GUARD) -> AssembledMatrix:
    """Element-wise Gauss assembly of the mass or stiffness matrix.

    Default p+1 points per span per direction, exact for integrands of
    degree <= 2p+1 per direction.
    """
    if kind not in ("mass", "stiffness"):
        raise ValueError(f"unknown kind {kind!r}")
    p = max(kv.degree for kv in space.knotvectors)
    if gauss_pts_per_span is None:
        gauss_pts_per_span = p + 1
    est = estimate_matrix_nnz(space)
    pts, wts, B0, B1 = _gauss_factors(space, gauss_pts_per_span)
    bk_nnz = int(np.prod([b.nnz for b in B0]))
    if est > nnz_guard or bk_nnz > nnz_guard:
        raise MemoryGuardError(max(est, bk_nnz), nnz_guard)
    coeffs = _grid_coeffs_sgq(space, geom, coeff, kind, pts, wts)
    if kind == "mass":
        Bk = kron_materialize(B0, max_entries=np.inf)
        A = (Bk.T @ sp.diags(coeffs[None]) @ Bk).tocsr()
    else:
        d = space.dim
        A = None
        Bkron = {}
        for b in range(d):
            Bkron[b] = kron_materialize(
                [B1[l] if l == b else B0[l] for l in range(d)], max_entries=np.inf
            )
        for a in range(d):
            for b in range(d):
                term = Bkron[a].T @ sp.diags(coeffs[(a, b)]) @ Bkron[b]
                A = term if A is None else A + term
        A = A.tocsr()
    A.eliminate_zeros()
    return AssembledMatrix(matrix=A, provenance="SGQ",
                           quadrature=f"gauss:{gauss_pts_per_span}/span")


def assemble_wq_explicit(space, rule, geom, coeff=None, kind="mass",
                         nnz_guard=NNZ_GUARD) -> AssembledMatrix:
    """Materialize the weighted-quadrature matrix from its sparse factors."""
    if kind not in ("mass", "stiffness"):
        raise ValueError(f"unknown kind {kind!r}")
    from .operators import _eval_mass_coeff, _eval_stiffness_coeffs

    est = estimate_matrix_nnz(space)
    if est > nnz_guard:
        raise MemoryGuardError(est, nnz_guard)
    if kind == "mass":
        B = kron_materialize([r.colloc[0][:, 1:-1] for r in rule.rules],
                             max_entries=np.inf)
        W = kron_materialize([r.weights[(0, 0)][1:-1, :] for r in rule.rules],
                             max_entries=np.inf)
        c = _eval_mass_coeff(rule, geom, coeff if coeff is not None else 1.0)
        A = (W @ sp.diags(c) @ B).tocsr()
    else:
        d = space.dim
        grids = _eval_stiffness_coeffs(rule, geom, coeff)
        A = None
        for a in range(d):
            for b in range(d):
                W = kron_materialize(
                    [
                        r.weights[(1 if l == a else 0, 1 if l == b else 0)][1:-1, :]
                        for l, r in enumerate(rule.rules)
                    ],
                    max_entries=np.inf,
                )
                B = kron_materialize(
                    [
                        r.colloc[1 if l == b else 0][:, 1:-1]
                        for l, r in enumerate(rule.rules)
                    ],
                    max_entries=np.inf,
                )
                c = grids[(min(a, b), max(a, b))]
                term = W @ sp.diags(c) @ B
                A = term if A is None else A + term
        A = A.tocsr()
    A.eliminate_zeros()
    return AssembledMatrix(matrix=A, provenance="WQ-explicit",
                           quadrature="weighted")


def assemble_rhs(space, geom, f, gauss_pts_per_span=None,
                 chunk_points=2 * 10**6) -> np.ndarray:
    """Load vector f_i = int det(J_F) b_i (f o F) dxi by tensor Gauss quadrature.

    ``f`` is a physical-space field taking an (npts, d) coordinate array.
    Large grids are processed in slabs along the last direction.
    """
    p = max(kv.degree for kv in space.knotvectors)
    if gauss_pts_per_span is None:
        gauss_pts_per_span = p + 1
    pts, wts, B0, _ = _gauss_factors(space, gauss_pts_per_span)
    d = space.dim
    n_last = len(pts[-1])
    lower = int(np.prod([len(q) for q in pts[:-1]]))
    block = max(1, min(n_last, chunk_points // max(lower, 1)))
    rhs = np.zeros(space.n_dofs)
    for start in range(0, n_last, block):
        stop = min(start + block, n_last)
        sub_pts = pts[:-1] + [pts[-1][start:stop]]
        sub_wts = wts[:-1] + [wts[-1][start:stop]]
        grids = tensor_grid(sub_pts)
        xi = np.stack(grids, axis=1)
        wtot = np.ones(len(xi))
        for w in tensor_grid(sub_wts):
            wtot = wtot * w
        det = np.linalg.det(geom.jacobian(xi))
        vals = wtot * det * np.asarray(f(geom.evaluate(xi)), dtype=float)
        factors_t = [b.T.tocsr() for b in B0[:-1]] + [B0[-1][start:stop, :].T.tocsr()]
        rhs += kron_apply(factors_t, vals)
    return rhs
