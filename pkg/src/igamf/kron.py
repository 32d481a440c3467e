# -*- coding: utf-8 -*-
"""Kronecker-product matrix-vector products by sum-factorization.

A :class:`KronOperator` holds d rectangular factors A^(1), ..., A^(d)
(direction order; the operator is A^(d) x ... x A^(1) under the convention
that direction 1 is the fastest-running index).  ``apply`` contracts one
mode at a time, starting from direction d, and never forms the full matrix.
"""

import numpy as np
import scipy.sparse as sp


class CostMeter:
    """Accumulates multiply-add flop counts and peak scratch-buffer size.

    One multiply plus one add counts as 2 flops.  ``bytes_peak`` is in
    scalar units (number of float64 values live in auxiliary buffers).
    """

    def __init__(self):
        self.flops = 0
        self.bytes_peak = 0

    def add_flops(self, n: int):
        self.flops += int(n)

    def note_buffers(self, n_scalars: int):
        self.bytes_peak = max(self.bytes_peak, int(n_scalars))

    def reset(self):
        self.flops = 0
        self.bytes_peak = 0


def _factor_shape(a):
    return a.shape


class KronOperator:
    """Kronecker product of per-direction factors, applied matrix-free."""

    def __init__(self, factors):
        self.factors = [
            f if sp.issparse(f) else np.asarray(f, dtype=float) for f in factors
        ]
        if not self.factors:
            raise ValueError("need at least one factor")
        for f in self.factors:
            if f.ndim != 2:
                raise ValueError("factors must be matrices")

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, int]:
        rows = int(np.prod([f.shape[0] for f in self.factors]))
        cols = int(np.prod([f.shape[1] for f in self.factors]))
        return rows, cols

    def apply(self, x, meter: CostMeter | None = None) -> np.ndarray:
        return kron_apply(self.factors, x, meter)

    def materialize(self, max_entries: int = 10**7):
        return kron_materialize(self.factors, max_entries)


def kron_apply(factors, x, meter: CostMeter | None = None) -> np.ndarray:
    """Compute (A^(d) x ... x A^(1)) x by d sequential one-mode contractions."""
    d = len(factors)
    t_dims = [f.shape[1] for f in factors]
    s_dims = [f.shape[0] for f in factors]
    x = np.asarray(x, dtype=float).ravel()
    if x.size != int(np.prod(t_dims)):
        raise ValueError(
            f"vector length {x.size} does not match operator columns "
            f"{int(np.prod(t_dims))}"
        )
    # Axis j of X holds direction d-j (direction 1 fastest in the flat vector).
    X = x.reshape(tuple(reversed(t_dims)))
    for l in range(d, 0, -1):  # contract direction d first, as written
        A = factors[l - 1]
        axis = d - l
        Xm = np.moveaxis(X, axis, 0)
        lead_shape = Xm.shape[1:]
        Xmat = np.ascontiguousarray(Xm).reshape(t_dims[l - 1], -1)
        Y = A @ Xmat
        if meter is not None:
            ncols = Xmat.shape[1]
            if sp.issparse(A):
                meter.add_flops(2 * A.nnz * ncols)
            else:
                meter.add_flops(2 * A.shape[0] * A.shape[1] * ncols)
            meter.note_buffers(Xmat.size + Y.size)
        X = np.moveaxis(
            np.asarray(Y).reshape((s_dims[l - 1],) + lead_shape), 0, axis
        )
    return np.ascontiguousarray(X).ravel()


def kron_materialize(factors, max_entries: int = 10**7):
    """Explicit sparse Kronecker matrix A^(d) x ... x A^(1) (test oracle).

    Guarded: refuses when the estimated dense entry count rows*cols exceeds
    ``max_entries``.
    """
    rows = int(np.prod([f.shape[0] for f in factors]))
    cols = int(np.prod([f.shape[1] for f in factors]))
    if rows * cols > max_entries:
        raise MemoryError(
            f"materialization guard: {rows} x {cols} exceeds {max_entries} entries"
        )
    out = None
    for f in reversed(factors):
        f = sp.csr_matrix(f)
        out = f if out is None else sp.kron(out, f, format="csr")
    return sp.csr_matrix(out)


def dense_kron_flops(s: int, t: int, d: int) -> int:
    """Flop count of sum-factorization with d dense s-by-t factors."""
    return 2 * s * t * sum(s**k * t ** (d - 1 - k) for k in range(d))


def sparse_kron_flop_bound(factors) -> int:
    """Upper bound on sum-factorization flops for sparse factors."""
    d = len(factors)
    s = max(f.shape[0] for f in factors)
    t = max(f.shape[1] for f in factors)
    max_nnz = max(f.nnz if sp.issparse(f) else f.size for f in factors)
    return 2 * max_nnz * sum(s**k * t ** (d - 1 - k) for k in range(d))


def tensor_grid(points_per_dir):
    """Broadcast d coordinate arrays over the tensor grid.

    Returns a list of d flat arrays of length prod(n_q), one per direction,
    ordered so that direction 1 runs fastest (matching the scalar index
    convention used everywhere else).
    """
    rev = np.meshgrid(*reversed([np.asarray(q) for q in points_per_dir]),
                      indexing="ij")
    return [g.ravel() for g in reversed(rev)]
