# -*- coding: utf-8 -*-
"""Fast-diagonalization preconditioner and Krylov solvers.

The preconditioner represents the parametric Dirichlet Laplacian Kronecker
sum (plus an optional mass shift sigma) and inverts it exactly through
per-direction generalized eigendecompositions; each application is three
Kronecker products and a diagonal scale.  CG and BiCGStab are standard;
BiCGStab is right-preconditioned so that the reported residual is the true
system residual.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .kron import CostMeter, kron_apply
from .splines import collocation_matrix
from .wq import gauss_points_weights


class IndefiniteOperatorError(RuntimeError):
    pass


class EigenSolveError(RuntimeError):
    pass


@dataclass
class KrylovReport:
    iterations: int
    residuals: list
    converged: bool
    matvecs: int
    precond_applies: int

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "relative_residual"])
            for k, r in enumerate(self.residuals):
                writer.writerow([k, f"{r:.16e}"])


def univariate_parametric_matrices(kv, interior=True):
    """Exactly integrated 1D stiffness and mass matrices on [0, 1].

    Gauss with p+1 points per span integrates both products exactly.
    """
    x, w = gauss_points_weights(kv, kv.degree + 1)
    B0 = collocation_matrix(kv, x, 0)
    B1 = collocation_matrix(kv, x, 1)
    if interior:
        B0 = B0[:, 1:-1]
        B1 = B1[:, 1:-1]
    D = sp.diags(w)
    K = (B1.T @ D @ B1).toarray()
    M = (B0.T @ D @ B0).toarray()
    return K, M


class FDPreconditioner:
    """Exact Kronecker-sum solver used as preconditioner.

    Represents P = sum_l M x ... x K_l x ... x M + sigma * M x ... x M on
    the interior parametric space; ``apply`` computes P^{-1} r.
    """

    def __init__(self, space, sigma: float = 0.0):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.space = space
        self.sigma = float(sigma)
        self.K1 = []
        self.M1 = []
        self.U = []
        self.lams = []
        for kv in space.knotvectors:
            K, M = univariate_parametric_matrices(kv)
            try:
                lam, U = scipy.linalg.eigh(K, M)
            except scipy.linalg.LinAlgError as err:
                raise EigenSolveError(
                    f"generalized eigensolve failed (degree {kv.degree}): {err}"
                ) from err
            self.K1.append(K)
            self.M1.append(M)
            self.U.append(U)
            self.lams.append(lam)
        # inverse Kronecker-sum diagonal over the eigen-tensor grid
        d = space.dim
        dims = space.n_per_dir
        lam_sum = np.zeros(tuple(reversed(dims)))
        for l in range(d):
            shape = [1] * d
            shape[d - 1 - l] = dims[l]
            lam_sum = lam_sum + self.lams[l].reshape(shape)
        self.inv_diag = 1.0 / (lam_sum.ravel() + self.sigma)

    @property
    def n_dofs(self) -> int:
        return self.space.n_dofs

    def apply(self, r, meter: CostMeter | None = None) -> np.ndarray:
        r = np.asarray(r, dtype=float).ravel()
        if r.size != self.n_dofs:
            raise ValueError(f"expected vector of length {self.n_dofs}, got {r.size}")
        y = kron_apply([U.T for U in self.U], r, meter)
        y *= self.inv_diag
        if meter is not None:
            meter.add_flops(self.n_dofs)
        return kron_apply(self.U, y, meter)

    def apply_forward(self, v) -> np.ndarray:
        """P v via Kronecker-sum application (test oracle for self-inversion)."""
        v = np.asarray(v, dtype=float).ravel()
        d = self.space.dim
        out = np.zeros_like(v)
        for l in range(d):
            factors = [self.K1[k] if k == l else self.M1[k] for k in range(d)]
            out += kron_apply(factors, v)
        if self.sigma != 0.0:
            out += self.sigma * kron_apply(self.M1, v)
        return out


def stopping_tolerance(galerkin_rel_error: float, eta: float = 0.1) -> float:
    """Relative-residual tolerance tied to the discretization error."""
    if galerkin_rel_error <= 0:
        raise ValueError("Galerkin error estimate must be positive")
    return eta * galerkin_rel_error


def cg(apply_A, b, apply_P=None, tol=1e-8, maxit=1000, meter=None):
    """Preconditioned conjugate gradients; stops on ||r||_2 / ||b||_2 <= tol."""
    b = np.asarray(b, dtype=float).ravel()
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, KrylovReport(0, [0.0], True, 0, 0)
    P = apply_P if apply_P is not None else (lambda v: v)
    matvecs = 0
    precs = 0
    r = b.copy()
    z = P(r)
    precs += 1
    p = z.copy()
    rz = r @ z
    residuals = [1.0]
    for k in range(1, maxit + 1):
        Ap = apply_A(p)
        matvecs += 1
        pAp = p @ Ap
        if pAp <= 0:
            raise IndefiniteOperatorError(
                f"nonpositive curvature p.Ap = {pAp:.3e} at iteration {k}"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        residuals.append(rel)
        if rel <= tol:
            return x, KrylovReport(k, residuals, True, matvecs, precs)
        z = P(r)
        precs += 1
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, KrylovReport(maxit, residuals, False, matvecs, precs)


def bicgstab(apply_A, b, apply_P=None, tol=1e-8, maxit=1000, seed=0):
    """Right-preconditioned BiCGStab; residual history is the true residual.

    On a rho/omega breakdown the iteration restarts once with a randomly
    perturbed shadow vector, then reports failure.
    """
    b = np.asarray(b, dtype=float).ravel()
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, KrylovReport(0, [0.0], True, 0, 0)
    P = apply_P if apply_P is not None else (lambda v: v)
    eps = np.finfo(float).eps
    matvecs = 0
    precs = 0
    residuals = [1.0]
    restarts = 0
    r = b - apply_A(x)
    matvecs += 1
    r_shadow = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    k = 0
    while k < maxit:
        k += 1
        rho_new = r_shadow @ r
        if abs(rho_new) < eps * bnorm**2 or abs(omega) < eps:
            if restarts == 0:
                restarts += 1
                rng = np.random.default_rng(seed)
                r_shadow = r + 1e-8 * bnorm * rng.standard_normal(len(b))
                rho = alpha = omega = 1.0
                v[:] = 0.0
                p[:] = 0.0
                continue
            return x, KrylovReport(k, residuals, False, matvecs, precs)
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = P(p)
        precs += 1
        v = apply_A(phat)
        matvecs += 1
        denom = r_shadow @ v
        if abs(denom) < eps * bnorm**2:
            if restarts == 0:
                restarts += 1
                rng = np.random.default_rng(seed + 1)
                r_shadow = r + 1e-8 * bnorm * rng.standard_normal(len(b))
                rho = alpha = omega = 1.0
                v[:] = 0.0
                p[:] = 0.0
                continue
            return x, KrylovReport(k, residuals, False, matvecs, precs)
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= tol:
            x += alpha * phat
            residuals.append(np.linalg.norm(s) / bnorm)
            return x, KrylovReport(k, residuals, True, matvecs, precs)
        shat = P(s)
        precs += 1
        t = apply_A(shat)
        matvecs += 1
        tt = t @ t
        omega = (t @ s) / tt if tt > 0 else 0.0
        x += alpha * phat + omega * shat
        r = s - omega * t
        rel = np.linalg.norm(r) / bnorm
        residuals.append(rel)
        if rel <= tol:
            return x, KrylovReport(k, residuals, True, matvecs, precs)
    return x, KrylovReport(maxit, residuals, False, matvecs, precs)
