"""Lowest eigenpairs of symmetric generalized pencils A x = lambda M x.

Two paths, both deterministic for a fixed seed:

  * dense reduction below `dense_cutoff` unknowns (reference-quality; used by
    the solver oracle tests),
  * blocked iteration with M-inner products, constraints projected out at
    every step, and a factorized spectral shift: LOBPCG preconditioned with
    the exact inverse of (A - sigma M) when it converges, falling back to
    plain shifted inverse subspace iteration otherwise. Residuals are always
    re-verified independently of the inner solver.

Block starts (seeded random, wider than k) are what make degenerate clusters
reliable: single-vector Lanczos can return with a member of a multiplicity
group missing, which would silently miscount stability indices.

The shift is placed strictly below the lowest eigenvalue, from the caller's
`lower_bound` when known (0 for PSD operators, -max potential for Jacobi
pencils) or from a Gershgorin bound otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_SEED = 1729


class EigenSolverError(RuntimeError):
    """Non-convergence or invalid constraints; carries achieved residuals."""

    def __init__(self, message: str, residuals: np.ndarray | None = None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending eigenvalues with M-orthonormal eigenvectors and residuals
    |A x - lambda M x| / |x|_M per pair."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    tolerance: float
    seed: int
    method: str

    def count_negative(self, eps: float) -> int:
        return int(np.sum(self.eigenvalues < -eps))

    def epsilon_negative(self) -> float:
        """Counting guard: 1e-6 x (|lowest eigenvalue| + spectral scale)."""
        lam = self.eigenvalues
        return 1e-6 * (abs(float(lam[0])) + float(np.max(np.abs(lam))))


def rayleigh_quotient(A, M, x: np.ndarray) -> float:
    """<A x, x> / <M x, x>; equals the eigenvalue on an eigenvector."""
    x = np.asarray(x, dtype=float)
    mx = M @ x
    denom = float(x @ mx)
    if denom <= 0.0:
        raise ValueError("Rayleigh quotient of a zero (or M-degenerate) vector")
    return float(x @ (A @ x)) / denom


def _as_constraint_matrix(constraints, n: int) -> np.ndarray | None:
    if constraints is None:
        return None
    c = np.atleast_2d(np.asarray(constraints, dtype=float))
    if c.shape[0] == n and c.shape[1] != n:
        c = c.T
    elif c.shape[1] == n:
        pass
    else:
        raise ValueError(f"constraint vectors must have length {n}")
    c = c.T.copy()  # (n, nc)
    if c.shape[1] == 0:
        return None
    if np.linalg.matrix_rank(c) < c.shape[1]:
        raise EigenSolverError("constraint vectors are rank deficient")
    return c


def _m_orthonormalize(X: np.ndarray, M) -> np.ndarray:
    """Orthonormalize columns in the M inner product (symmetric, drops
    numerically dependent directions)."""
    S = X.T @ (M @ X)
    w, q = np.linalg.eigh(0.5 * (S + S.T))
    keep = w > max(w.max(), 0.0) * 1e-13
    if not np.any(keep):
        raise EigenSolverError("iteration block collapsed")
    return X @ (q[:, keep] / np.sqrt(w[keep]))


def _pair_residuals(A, M, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    R = A @ vecs - (M @ vecs) * vals[None, :]
    mnorm = np.sqrt(np.einsum("ik,ik->k", vecs, M @ vecs))
    return np.linalg.norm(R, axis=0) / mnorm


def _gershgorin_lower_bound(A, M) -> float:
    """Rigorous lower bound for the pencil: min Gershgorin of A over a lower
    bound of the spectrum of M (both cheap row-sum bounds)."""
    diag_a = A.diagonal()
    radius_a = np.abs(A).sum(axis=1).A1 - np.abs(diag_a) if sp.issparse(A) \
        else np.abs(A).sum(axis=1) - np.abs(diag_a)
    lam_a = float(np.min(diag_a - radius_a))
    if lam_a >= 0.0:
        return 0.0
    diag_m = M.diagonal()
    radius_m = np.abs(M).sum(axis=1).A1 - np.abs(diag_m) if sp.issparse(M) \
        else np.abs(M).sum(axis=1) - np.abs(diag_m)
    lam_m = float(np.min(diag_m - radius_m))
    if lam_m <= 0.0:
        lam_m = float(spla.eigsh(sp.csc_matrix(M), k=1, which="SA",
                                 return_eigenvectors=False, tol=1e-4)[0])
    return lam_a / lam_m


def _dense_lowest(A, M, k, C, seed) -> SpectrumResult:
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if C is not None:
        Q = sla.null_space(C.T @ Md)
        if Q.shape[1] < k:
            raise EigenSolverError("too few degrees of freedom after constraints")
        Ar = Q.T @ Ad @ Q
        Mr = Q.T @ Md @ Q
    else:
        Q, Ar, Mr = None, Ad, Md
    vals, vecs = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T))
    vals, vecs = vals[:k], vecs[:, :k]
    if Q is not None:
        vecs = Q @ vecs
    res = _pair_residuals(Ad, Md, vals, vecs)
    scale = max(float(np.max(np.abs(vals))), 1e-30)
    return SpectrumResult(vals, vecs, res, tolerance=1e-10 * scale,
                          seed=seed, method="dense")


def _lobpcg_lowest(A, M, k, C, factor, scale, rtol, seed,
                   maxiter) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Preconditioned LOBPCG attempt; returns None when it does not reach the
    required residuals (the caller then falls back)."""
    import warnings

    n = A.shape[0]
    nc = 0 if C is None else C.shape[1]
    block = min(n - nc, k + max(8, k // 3))
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((n, block))
    precond = spla.LinearOperator((n, n), matvec=factor.solve,
                                  matmat=factor.solve, dtype=float)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            vals, vecs = spla.lobpcg(A, x0, B=M, M=precond, Y=C,
                                     tol=0.3 * rtol * scale,
                                     maxiter=min(maxiter, 60), largest=False)
    except Exception:
        return None
    order = np.argsort(vals)[:k]
    vals, vecs = vals[order], vecs[:, order]
    if not np.all(np.isfinite(vals)):
        return None
    # Polish M-orthonormality and re-verify independently.
    vecs = _m_orthonormalize(vecs, M)
    if vecs.shape[1] < k:  # rank-deficient block: let the fallback handle it
        return None
    ar = vecs.T @ (A @ vecs)
    w, z = np.linalg.eigh(0.5 * (ar + ar.T))
    vals, vecs = w, vecs @ z
    res = _pair_residuals(A, M, vals, vecs)
    if np.max(res) > rtol * scale:
        return None
    return vals, vecs, res


def _subspace_lowest(A, M, k, C, factor, rtol, scale, seed,
                     maxiter) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = A.shape[0]
    nc = 0 if C is None else C.shape[1]
    if C is not None:
        cm = _m_orthonormalize(C, M)

        def project(X):
            return X - cm @ (cm.T @ (M @ X))
    else:
        def project(X):
            return X

    block = min(n - nc, k + max(8, k // 2))
    rng = np.random.default_rng(seed)
    X = project(rng.standard_normal((n, block)))
    X = _m_orthonormalize(X, M)
    vals = np.zeros(block)
    res = np.full(k, np.inf)
    check_every = 3
    for it in range(1, maxiter + 1):
        X = factor.solve(np.asarray(M @ X))
        X = _m_orthonormalize(project(X), M)
        Ar = X.T @ (A @ X)
        w, Z = np.linalg.eigh(0.5 * (Ar + Ar.T))
        X = X @ Z
        vals = w
        if it % check_every == 0 or it == maxiter:
            res = _pair_residuals(A, M, vals[:k], X[:, :k])
            if np.max(res) <= rtol * scale:
                return vals[:k], X[:, :k], res
    raise EigenSolverError(
        f"subspace iteration did not reach {rtol * scale:.3e} in {maxiter} "
        f"iterations (achieved {np.max(res):.3e})", residuals=res)


def solve_lowest(A, M, k: int, constraints=None, *, lower_bound: float | None = None,
                 rtol: float = 1e-8, maxiter: int = 400, seed: int = DEFAULT_SEED,
                 dense_cutoff: int = 500) -> SpectrumResult:
    """The k lowest eigenpairs of A x = lambda M x, restricted to the
    M-orthogonal complement of the optional constraint vectors.

    A must be symmetric and M symmetric positive definite. `lower_bound`, when
    known, is any number <= the lowest eigenvalue of the pencil and fixes the
    spectral shift; otherwise a Gershgorin bound is used.
    """
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise ValueError("A and M must be square and of equal size")
    C = _as_constraint_matrix(constraints, n)
    nc = 0 if C is None else C.shape[1]
    if not 1 <= k <= n - nc:
        raise ValueError(f"cannot compute {k} pairs with {n} unknowns and {nc} constraints")

    if n <= dense_cutoff:
        return _dense_lowest(A, M, k, C, seed)

    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    diag_ratio = np.abs(A.diagonal()) / np.maximum(M.diagonal(), 1e-300)
    # Median, not max: degenerate-quality cells can inflate single diagonal
    # ratios by orders of magnitude, and a shift that far below the spectrum
    # destroys the separation of the transformed eigenvalues.
    s_scale = float(np.median(diag_ratio))
    lb = lower_bound if lower_bound is not None else _gershgorin_lower_bound(A, M)
    sigma = lb - max(1e-3 * (s_scale - lb), 1e-12 * max(1.0, abs(lb)))
    scale = max(s_scale * 1e-3, abs(lb), 1e-30)

    factor = spla.splu((A - sigma * M).tocsc())
    attempt = _lobpcg_lowest(A, M, k, C, factor, scale, rtol, seed, maxiter)
    if attempt is not None:
        vals, vecs, res = attempt
        method = "preconditioned-lobpcg"
    else:
        vals, vecs, res = _subspace_lowest(A, M, k, C, factor, rtol, scale,
                                           seed, maxiter)
        method = ("subspace-iteration" if C is None
                  else "projected-subspace-iteration")

    tol = rtol * max(scale, float(np.max(np.abs(vals))))
    if np.max(res) > tol:
        raise EigenSolverError(
            f"residuals up to {np.max(res):.3e} exceed tolerance {tol:.3e}",
            residuals=res)
    return SpectrumResult(vals, vecs, res, tolerance=tol, seed=seed, method=method)
