"""Exact spectral gaps, Dirichlet forms and the Bakry-Emery check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .errors import ConvergenceError, DetailedBalanceError, ReducibilityError
from .generators import ReversibleGenerator, check_detailed_balance

DENSE_CAP = 4000


@dataclass(frozen=True)
class SpectralResult:
    gap: float
    gap_vector: np.ndarray = field(repr=False)  # eigenfunction in L^2(nu), i.e. f not sqrt(nu) f
    spectrum_head: np.ndarray = field(repr=False)
    method: str = "dense"
    residual: float = 0.0
    null_residual: float = 0.0


def symmetrize(gen: ReversibleGenerator, db_tol: float = 1e-9, dense: bool = True):
    """D^{1/2} (-L) D^{-1/2}, made exactly symmetric.

    Returns a dense array when ``dense`` is true, otherwise a sparse matrix.
    """
    res = check_detailed_balance(gen)
    if res > db_tol:
        raise DetailedBalanceError(
            f"detailed-balance residual {res:.3e} above {db_tol:.1e}; generator is not reversible")
    s = np.sqrt(gen.nu)
    A = sparse.diags(s) @ (-gen.rates) @ sparse.diags(1.0 / s)
    A = 0.5 * (A + A.T)
    return A.toarray() if dense else A.tocsr()


def _deflated(A: sparse.csr_matrix, w: np.ndarray, weight: float, shift: float):
    """Operator A + weight w w^T and the inverse of (that + shift I).

    The rank-one term lifts the known null vector w above the whole
    spectrum; the inverse uses a sparse LU of A + shift I and the
    Sherman-Morrison formula, so A itself is never factored while singular.
    """
    S = A.shape[0]
    lu = splinalg.splu((A + shift * sparse.identity(S)).tocsc())
    Bw = lu.solve(w)
    denom = 1.0 + weight * (w @ Bw)

    def solve(b):
        y = lu.solve(b)
        return y - Bw * (weight * (w @ y) / denom)

    M = splinalg.LinearOperator((S, S), matvec=lambda x: A @ x + weight * w * (w @ x), dtype=float)
    return M, splinalg.LinearOperator((S, S), matvec=solve, dtype=float)


def spectral_gap(gen: ReversibleGenerator, method: str = "auto", tol: float = 1e-10,
                 k: int = 4, dense_cap: int = DENSE_CAP) -> SpectralResult:
    """Second-smallest eigenvalue of -L in L^2(nu)."""
    S = gen.size
    if S < 2:
        raise ReducibilityError("a single-state chain has no gap")
    if method == "auto":
        method = "dense" if S <= dense_cap else "iterative"
    w = np.sqrt(gen.nu)
    if method == "dense":
        A = symmetrize(gen)
        vals, vecs = linalg.eigh(A)
        null_res = float(np.linalg.norm(A @ w))
        # project the exact null vector out before picking the gap
        overlap = np.abs(vecs.T @ w)
        order = np.argsort(vals)
        nullpos = int(np.argmax(overlap))
        rest = [i for i in order if i != nullpos]
        gap = float(vals[rest[0]])
        v = vecs[:, rest[0]]
        head = np.sort(vals)[: min(k, S)]
    elif method == "iterative":
        A = symmetrize(gen, dense=False)
        null_res = float(np.linalg.norm(A @ w))
        bound = float(np.abs(A).sum(axis=1).max())  # Gershgorin bound on the spectrum
        shift = 1e-3 * bound / S
        M, op = _deflated(A, w, 2.0 * bound + 1.0, shift)
        nev = max(1, min(k - 1, S - 2))
        try:
            vals, vecs = splinalg.eigsh(M, k=nev, sigma=-shift, OPinv=op, which="LM",
                                        tol=tol * 1e-2, maxiter=10_000)
        except splinalg.ArpackNoConvergence as exc:
            raise ConvergenceError(f"iterative gap solver did not converge: "
                                   f"{len(exc.eigenvalues)} of {nev} pairs found") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        gap = float(vals[0])
        v = vecs[:, 0]
        head = np.concatenate([[0.0], vals])[: min(k, S)]
    else:
        raise ValueError(f"unknown method {method!r}")
    v = v - w * (w @ v)
    v /= np.linalg.norm(v)
    residual = float(np.linalg.norm(A @ v - gap * v))
    if gap <= 1e-12 * max(1.0, float(np.max(np.abs(head)))):
        raise ReducibilityError(f"gap {gap:.3e} is numerically zero; chain is reducible")
    return SpectralResult(gap, v / w, np.asarray(head), method, residual, null_res)


def dirichlet_form(gen: ReversibleGenerator, f: np.ndarray, g: np.ndarray | None = None) -> float:
    """E(f, g) = nu[f (-L g)]."""
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    return float(gen.nu @ (f * -(gen.rates @ g)))


def dirichlet_half_sum(gen: ReversibleGenerator, f: np.ndarray) -> float:
    """(1/2) nu[sum_gamma c (grad_gamma f)^2] from the move table."""
    f = np.asarray(f, dtype=float)
    grad = f[gen.targets] - f[:, None]
    return float(0.5 * gen.nu @ (gen.crates * grad * grad).sum(axis=1))


def variance(gen: ReversibleGenerator, f: np.ndarray) -> float:
    f = np.asarray(f, dtype=float)
    m = gen.nu @ f
    return float(gen.nu @ (f - m) ** 2)


def lf_squared(gen: ReversibleGenerator, f: np.ndarray) -> float:
    lf = gen.rates @ np.asarray(f, dtype=float)
    return float(gen.nu @ (lf * lf))


@dataclass(frozen=True)
class BakryEmeryReport:
    max_violation: float  # largest (gap E - nu[(Lf)^2]) / scale over random f; <= 0 means no violation
    eigvec_defect: float  # |nu[(Lv)^2] - gap E(v)| / scale at the gap eigenvector
    n_functions: int
    seed: int


def bakry_emery_check(gen: ReversibleGenerator, spec: SpectralResult, n_random_f: int = 100,
                      seed: int = 0) -> BakryEmeryReport:
    """nu[(Lf)^2] >= gap E(f, f) for random f, with equality at the gap eigenvector."""
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((gen.size, n_random_f))
    LF = gen.rates @ F
    lf2 = gen.nu @ (LF * LF)
    E = gen.nu @ (F * -LF)
    scale = np.maximum(lf2 + E, 1e-300)
    viol = float(((spec.gap * E - lf2) / scale).max()) if n_random_f else -np.inf
    v = spec.gap_vector
    lv2 = lf_squared(gen, v)
    ev = dirichlet_form(gen, v)
    defect = abs(lv2 - spec.gap * ev) / max(lv2 + ev, 1e-300)
    return BakryEmeryReport(viol, float(defect), n_random_f, seed)


def spectral_decomposition_check(gen: ReversibleGenerator, f: np.ndarray) -> float:
    """Relative mismatch between nu[(Lf)^2] and sum lambda_i^2 <f, v_i>^2."""
    A = symmetrize(gen)
    vals, vecs = linalg.eigh(A)
    g = np.sqrt(gen.nu) * np.asarray(f, dtype=float)
    coeff = vecs.T @ g
    spectral = float((vals ** 2 * coeff ** 2).sum())
    direct = lf_squared(gen, f)
    return abs(spectral - direct) / max(abs(direct), 1e-300)
