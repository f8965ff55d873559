"""Bochner-type measure R on (state, move, move) triples and everything built on it.

R is never stored.  For a block of states an ``RKernel`` returns the
density r(eta, gamma, delta) as an array of shape (states, G, G); the
weight of a triple is nu(eta) c(eta, gamma) c(eta, delta) r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy import linalg

from .errors import CapacityError, KernelAsymmetryError, NotApplicableError, ReducibilityError
from .generators import BOTH, J_ONLY, JINV_ONLY, ReversibleGenerator

TRIPLE_CAPACITY = 2 * 10 ** 8
_BLOCK_BUDGET = 2 * 10 ** 6


@dataclass(frozen=True, eq=False)
class RKernel:
    gen: ReversibleGenerator
    block_fn: Callable[[np.ndarray], np.ndarray]
    model_tag: str
    symmetric: bool = True

    def block(self, states: np.ndarray) -> np.ndarray:
        return self.block_fn(np.asarray(states))

    def weights(self, states: np.ndarray) -> np.ndarray:
        """nu c c r for the given states, shape (s, G, G)."""
        c = self.gen.crates[states]
        return self.gen.nu[states, None, None] * c[:, :, None] * c[:, None, :] * self.block(states)


@dataclass(frozen=True)
class IdentityReport:
    lhs: float
    rhs: float
    rel_error: float
    instance: str
    seed: int | None = None

    @classmethod
    def compare(cls, lhs: float, rhs: float, instance: str, seed=None, floor: float = 1e-300):
        rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)
        return cls(float(lhs), float(rhs), float(rel), instance, seed)


@dataclass(frozen=True)
class AxiomReport:
    a2: float
    a3: float
    a4: float
    n_functions: int
    seed: int

    @property
    def worst(self) -> float:
        return max(self.a2, self.a3, self.a4)


def _chunks(n_states: int, per_state: int) -> Iterator[np.ndarray]:
    step = max(1, _BLOCK_BUDGET // max(per_state, 1))
    for start in range(0, n_states, step):
        yield np.arange(start, min(n_states, start + step))


def _check_capacity(gen: ReversibleGenerator):
    total = gen.size * gen.n_moves ** 2
    if total > TRIPLE_CAPACITY:
        raise CapacityError(f"{total} (state, move, move) triples exceed {TRIPLE_CAPACITY}")


def _ratio(gen: ReversibleGenerator, states: np.ndarray) -> np.ndarray:
    """c(gamma eta, delta) / c(eta, delta), zero where the denominator vanishes."""
    T1 = gen.targets[states]
    num = gen.crates[T1]  # (s, G_gamma, G_delta)
    den = gen.crates[states][:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _pointwise_commute(gen: ReversibleGenerator, states: np.ndarray) -> np.ndarray:
    T2 = gen.targets[gen.targets[states]]  # delta(gamma(eta))
    return T2 == T2.transpose(0, 2, 1)


# ---------------------------------------------------------------------------
# Model kernels
# ---------------------------------------------------------------------------

def r_commuting_moves(gen: ReversibleGenerator, commute: np.ndarray | None = None,
                   drop_diagonal: bool = False) -> RKernel:
    """Generic density from the J / J^{-1} split stored on each move label.

    ``commute`` is an optional global (G, G) boolean matrix; by default
    commutation is tested pointwise at each state.  ``drop_diagonal``
    zeroes r on triples with gamma = gamma^{-1} = delta.
    """
    fam = np.array([m.family for m in gen.moves])
    both = fam == BOTH
    jo = fam == J_ONLY
    ji = fam == JINV_ONLY
    half = both[:, None] & both[None, :]
    same = (jo[:, None] & jo[None, :]) | (ji[:, None] & ji[None, :])
    opposite = (jo[:, None] & ji[None, :]) | (ji[:, None] & jo[None, :])
    G = gen.n_moves
    diag = np.zeros((G, G), dtype=bool)
    if drop_diagonal:
        selfinv = gen.inverse == np.arange(G)
        diag[np.arange(G), np.arange(G)] = selfinv

    def block(states):
        ratio = _ratio(gen, states)
        r = np.where(half, 0.5 * (1 + ratio), 0.0)
        r = np.where(same, ratio, r)
        r = np.where(opposite, 1.0, r)
        ok = commute[None] if commute is not None else _pointwise_commute(gen, states)
        r = np.where(ok & ~diag, r, 0.0)
        return r

    return RKernel(gen, block, gen.model_tag + ":prop1")


def r_kawasaki(gen: ReversibleGenerator) -> RKernel:
    """(1 + c(eta^{xz}, yu) / c(eta, yu)) / 2 on disjoint pairs, 0 otherwise."""
    if not gen.model_tag.startswith("kawasaki"):
        raise NotApplicableError("r_kawasaki needs an exchange generator")
    pairs = [m.sites for m in gen.moves]
    G = len(pairs)
    disjoint = np.array([[not (set(a) & set(b)) for b in pairs] for a in pairs]).reshape(G, G)

    def block(states):
        return np.where(disjoint[None], 0.5 * (1 + _ratio(gen, states)), 0.0)

    return RKernel(gen, block, gen.model_tag)


def r_zero_range(gen: ReversibleGenerator) -> RKernel:
    """r_{x,y}(eta) = c_y(eta^{x-}) / c_y(eta), independent of the target sites."""
    if gen.model_tag != "zero-range":
        raise NotApplicableError("r_zero_range needs a zero-range generator")
    origin = np.array([m.sites[0] for m in gen.moves])

    def block(states):
        rxy = site_pair_ratio(gen, states)
        return rxy[:, origin[:, None], origin[None, :]]

    return RKernel(gen, block, gen.model_tag)


def site_pair_ratio(gen: ReversibleGenerator, states: np.ndarray) -> np.ndarray:
    """Array r[s, x, y] = c_y(eta^{x-}) / c_y(eta), 0 where c_y(eta) = 0."""
    site_rates = gen.extras["site_rates"]
    configs = gen.space.configs[states]
    n = configs.shape[1]
    c = site_rates(configs)
    out = np.zeros((len(states), n, n))
    for x in range(n):
        down = configs.copy()
        down[:, x] = np.maximum(down[:, x] - 1, 0)
        cm = site_rates(down)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, x, :] = np.where(c > 0, cm / np.where(c > 0, c, 1.0), 0.0)
    return out


def r_glauber(gen: ReversibleGenerator) -> RKernel:
    """Birth-birth rate ratio, death-death occupancy table, mixed pairs 1."""
    if "glauber" not in gen.model_tag:
        raise NotApplicableError("r_glauber needs a birth-death generator")
    n = gen.space.n_sites
    eye = np.eye(n, dtype=bool)

    def block(states):
        s = len(states)
        eta = gen.space.configs[states].astype(float)
        r = np.ones((s, 2 * n, 2 * n))
        r[:, :n, :n] = _ratio(gen, states)[:, :n, :n]
        both = (eta[:, :, None] * eta[:, None, :]) > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            selfterm = np.where(eta > 0, (eta - 1) / np.where(eta > 0, eta, 1.0), 0.0)
        dd = np.where(both, 1.0, 0.0)
        dd = np.where(eye[None], selfterm[:, :, None] * eye[None], dd)
        r[:, n:, n:] = dd
        return r

    return RKernel(gen, block, gen.model_tag)


def r_continuum_kawasaki(gen: ReversibleGenerator) -> RKernel:
    """Distinct-particle kernel on cells: (eta_w - [u = w]) / eta_w * exp(-beta phi(z - v)).

    Moves are (u, z) and (w, v); the factor counts ordered pairs of distinct
    particles drawn from cells u and w.
    """
    if gen.model_tag != "continuum-kawasaki":
        raise NotApplicableError("r_continuum_kawasaki needs the discretised continuum generator")
    beta = gen.params["beta"]
    Phi = gen.extras["coupling"]
    src = np.array([m.sites[0] for m in gen.moves])
    dst = np.array([m.sites[1] for m in gen.moves])
    decay = np.exp(-beta * Phi[dst[:, None], dst[None, :]])
    same = (src[:, None] == src[None, :]).astype(float)

    def block(states):
        occ = gen.space.configs[states][:, src].astype(float)  # source-cell occupancy per move
        ew = occ[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(ew > 0, (ew - same[None]) / np.where(ew > 0, ew, 1.0), 0.0)
        frac = np.where(occ[:, :, None] > 0, frac, 0.0)
        return frac * decay[None]

    return RKernel(gen, block, gen.model_tag)


def rkernel_for(gen: ReversibleGenerator) -> RKernel:
    tag = gen.model_tag.replace("+corrupted", "")
    if tag.startswith("kawasaki"):
        return r_kawasaki(gen)
    if tag == "zero-range":
        return r_zero_range(gen)
    if "glauber" in tag:
        return r_glauber(gen)
    if tag == "continuum-kawasaki":
        return r_continuum_kawasaki(gen)
    raise NotApplicableError(f"no kernel for model {gen.model_tag!r}")


def perturb_kernel(rk: RKernel, gamma: int, delta: int, eps: float) -> RKernel:
    """Break the gamma/delta symmetry of r by a relative amount eps (fault injection)."""

    def block(states):
        r = rk.block(states).copy()
        r[:, gamma, delta] *= 1 + eps
        return r

    return RKernel(rk.gen, block, rk.model_tag + "+perturbed", symmetric=False)


# ---------------------------------------------------------------------------
# Axiom checks
# ---------------------------------------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hashed_uniform(seed: int, k, eta, gamma, delta) -> np.ndarray:
    """Deterministic U[0,1) value for each (seed, k, eta, gamma, delta) tuple."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed) * _GOLD + np.uint64(1))
        for part in (k, eta, gamma, delta):
            h = _mix(h ^ (np.asarray(part).astype(np.uint64) + _GOLD))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 2 ** 53)


def verify_axioms(gen: ReversibleGenerator, rk: RKernel, n_random_F: int = 200,
                  seed: int = 0) -> AxiomReport:
    """Residuals of (A2) on the support of R and of (A3), (A4) for random F.

    A2 residual is the R-mass of non-commuting triples over the total mass.
    A3 and A4 residuals are max relative differences of the integrals of
    F against those of Theta F and T F, over ``n_random_F`` functions.
    """
    _check_capacity(gen)
    G = gen.n_moves
    mass = 0.0
    bad = 0.0
    I0 = np.zeros(n_random_F)
    I3 = np.zeros(n_random_F)
    I4 = np.zeros(n_random_F)
    ks = np.arange(n_random_F)
    g_idx = np.arange(G)
    for states in _chunks(gen.size, G * G * max(n_random_F, 1) * 3):
        W = rk.weights(states)
        T1 = gen.targets[states]
        T2 = gen.targets[T1]
        mass += W.sum()
        bad += W[(W > 0) & (T2 != T2.transpose(0, 2, 1))].sum()
        e = states[:, None, None, None]
        gam = g_idx[None, :, None, None]
        dlt = g_idx[None, None, :, None]
        k = ks[None, None, None, :]
        F0 = hashed_uniform(seed, k, e, gam, dlt)
        F3 = hashed_uniform(seed, k, e, dlt, gam)
        F4 = hashed_uniform(seed, k, T1[:, :, None, None], gen.inverse[gam], dlt)
        Wk = W[..., None]
        I0 += (Wk * F0).sum(axis=(0, 1, 2))
        I3 += (Wk * F3).sum(axis=(0, 1, 2))
        I4 += (Wk * F4).sum(axis=(0, 1, 2))

    def rel(a, b):
        den = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
        return float((np.abs(a - b) / den).max()) if len(a) else 0.0

    a2 = float(bad / mass) if mass > 0 else 0.0
    return AxiomReport(a2, rel(I0, I3), rel(I0, I4), n_random_F, seed)


# ---------------------------------------------------------------------------
# Bochner identity and its (1 - r) form
# ---------------------------------------------------------------------------

def _as_columns(f) -> tuple[np.ndarray, bool]:
    f = np.asarray(f, dtype=float)
    return (f[:, None], True) if f.ndim == 1 else (f, False)


def bochner_sums(gen: ReversibleGenerator, rk: RKernel, f: np.ndarray):
    """Per-function sums: int (grad grad f)^2 dR, int grad f grad f dR,
    and sum nu c c (1 - r) grad f grad f."""
    _check_capacity(gen)
    F, _ = _as_columns(f)
    k = F.shape[1]
    G = gen.n_moves
    second = np.zeros(k)
    first = np.zeros(k)
    qform = np.zeros(k)
    for states in _chunks(gen.size, G * G * k * 4):
        c = gen.crates[states]
        r = rk.block(states)
        base = gen.nu[states, None, None] * c[:, :, None] * c[:, None, :]
        W = base * r
        Wq = base - W
        T1 = gen.targets[states]
        T2 = gen.targets[T1]
        f0 = F[states][:, None, :]  # (s, 1, k)
        grad = F[T1] - f0  # (s, G, k)
        gg = F[T2] - F[T1][:, :, None, :] - F[T1][:, None, :, :] + f0[:, :, None, :]
        outer = grad[:, :, None, :] * grad[:, None, :, :]
        second += np.einsum("sgd,sgdk->k", W, gg * gg)
        first += np.einsum("sgd,sgdk->k", W, outer)
        qform += np.einsum("sgd,sgdk->k", Wq, outer)
    return second, first, qform


def check_bochner_identity(gen: ReversibleGenerator, rk: RKernel, f, seed=None):
    """int (grad_g grad_d f)^2 dR versus 4 int grad_g f grad_d f dR."""
    second, first, _ = bochner_sums(gen, rk, f)
    reports = [IdentityReport.compare(s, 4 * t, f"{gen.model_tag}:lemma", seed)
               for s, t in zip(second, first)]
    return reports[0] if np.asarray(f).ndim == 1 else reports


def check_corollary1(gen: ReversibleGenerator, rk: RKernel, f, seed=None):
    """nu[(Lf)^2] - (1/4) int (grad grad f)^2 dR versus the (1 - r) quadratic form.

    nu[(Lf)^2] comes from the assembled sparse matrix, not from the move table.
    """
    F, single = _as_columns(f)
    second, _, qform = bochner_sums(gen, rk, F)
    LF = gen.rates @ F
    lf2 = gen.nu @ (LF * LF)
    lhs = lf2 - 0.25 * second
    reports = []
    for a, b in zip(lhs, qform):
        reports.append(IdentityReport.compare(a, b, f"{gen.model_tag}:corollary1", seed))
    return reports[0] if single else reports


def random_functions(size: int, count: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((size, count))


# ---------------------------------------------------------------------------
# Certified constant from the quadratic-form comparison
# ---------------------------------------------------------------------------

def _assemble(gen: ReversibleGenerator, states: np.ndarray, W: np.ndarray, out: np.ndarray):
    """Add sum_eta A_eta^T W_eta A_eta into ``out`` with A rows e_{g eta} - e_eta."""
    T1 = gen.targets[states]
    s, G, _ = W.shape
    rows_t = np.broadcast_to(T1[:, :, None], (s, G, G))
    cols_t = np.broadcast_to(T1[:, None, :], (s, G, G))
    self_ = np.broadcast_to(states[:, None, None], (s, G, G))
    np.add.at(out, (rows_t.ravel(), cols_t.ravel()), W.ravel())
    np.add.at(out, (rows_t.ravel(), self_.ravel()), -W.ravel())
    np.add.at(out, (self_.ravel(), cols_t.ravel()), -W.ravel())
    np.add.at(out, (self_.ravel(), self_.ravel()), W.ravel())


def q_form_matrix(gen: ReversibleGenerator, rk: RKernel) -> np.ndarray:
    """Dense matrix of f -> sum nu c c (1 - r) grad f grad f."""
    _check_capacity(gen)
    S, G = gen.size, gen.n_moves
    Q = np.zeros((S, S))
    for states in _chunks(S, G * G * 8):
        c = gen.crates[states]
        W = gen.nu[states, None, None] * c[:, :, None] * c[:, None, :] * (1 - rk.block(states))
        _assemble(gen, states, W, Q)
    scale = max(np.abs(Q).max(), 1e-300)
    asym = np.abs(Q - Q.T).max() / scale
    if asym > 1e-12:
        raise KernelAsymmetryError(f"Q-form asymmetry {asym:.2e}; the r kernel is not symmetric")
    return 0.5 * (Q + Q.T)


def d_form_matrix(gen: ReversibleGenerator) -> np.ndarray:
    """Dense matrix of f -> sum nu c (grad f)^2 = 2 E(f, f)."""
    Dn = gen.nu[:, None] * (-gen.dense())
    return Dn + Dn.T


def _complement_basis(w: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of unit vector w (Householder)."""
    S = len(w)
    e1 = np.zeros(S)
    e1[0] = 1.0
    v = w - e1 if w[0] <= 0 else w + e1
    v /= np.linalg.norm(v)
    H = np.eye(S) - 2 * np.outer(v, v)
    return H[:, 1:]


@dataclass(frozen=True)
class CertifiedConstant:
    k_star: float
    minimizer: np.ndarray = field(repr=False)

    @property
    def gap_bound(self) -> float:
        return 2 * self.k_star


def certified_k(gen: ReversibleGenerator, rk: RKernel, exact_gap: float | None = None,
                tol: float = 1e-8) -> CertifiedConstant:
    """Smallest generalised eigenvalue of (Q-form, D-form) off the constants.

    Both forms are conjugated by nu^{-1/2} so the constant function becomes
    the unit vector sqrt(nu), which is projected out exactly.
    """
    Q = q_form_matrix(gen, rk)
    D = d_form_matrix(gen)
    s = 1.0 / np.sqrt(gen.nu)
    Qs = s[:, None] * Q * s[None, :]
    Ds = s[:, None] * D * s[None, :]
    B = _complement_basis(np.sqrt(gen.nu))
    Qb = B.T @ Qs @ B
    Db = B.T @ Ds @ B
    Qb = 0.5 * (Qb + Qb.T)
    Db = 0.5 * (Db + Db.T)
    dmin = linalg.eigvalsh(Db, subset_by_index=[0, 0])[0]
    if dmin <= 1e-12 * max(np.abs(Db).max(), 1e-300):
        raise ReducibilityError("Dirichlet form degenerate beyond constants; chain is reducible")
    vals, vecs = linalg.eigh(Qb, Db, subset_by_index=[0, 0])
    k_star = float(vals[0])
    f = s * (B @ vecs[:, 0])
    if exact_gap is not None and k_star > 0 and exact_gap < 2 * k_star - tol:
        raise AssertionError(f"2 k* = {2 * k_star:.12g} exceeds exact gap {exact_gap:.12g}")
    return CertifiedConstant(k_star, f)


# ---------------------------------------------------------------------------
# Zero-range M-matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MMatrixBound:
    teom_delta: float
    cobound_value: float
    argmin_state: int

    @property
    def vacuous(self) -> bool:
        return self.teom_delta <= 0


def m_matrices(gen: ReversibleGenerator) -> tuple[np.ndarray, np.ndarray]:
    """M(eta) for every state and the site rates c (both unrestricted)."""
    states = np.arange(gen.size)
    n = gen.space.n_sites
    c = gen.extras["site_rates"](gen.space.configs)
    r = site_pair_ratio(gen, states)
    M = n * np.sqrt(c[:, :, None] * c[:, None, :]) * (1 - r)
    return 0.5 * (M + M.transpose(0, 2, 1)), c


def m_matrix_bound(gen: ReversibleGenerator, exact_gap: float | None = None,
                   tol: float = 1e-8) -> MMatrixBound:
    """Pointwise M-matrix minimum and its diagonally dominated lower estimate."""
    if gen.model_tag != "zero-range":
        raise NotApplicableError("M-matrix bound applies to zero-range generators")
    M, c = m_matrices(gen)
    configs = gen.space.configs
    occ = configs > 0
    lam = np.full(gen.size, np.inf)
    patterns, inv = np.unique(occ, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    for p, mask in enumerate(patterns):
        rows = np.flatnonzero(inv == p)
        idx = np.flatnonzero(mask)
        sub = M[rows][:, idx][:, :, idx]
        lam[rows] = np.linalg.eigvalsh(sub)[:, 0]
    j = int(np.argmin(lam))
    teom = float(lam[j])

    energy = gen.extras["energy"]
    n = configs.shape[1]
    H0 = energy.energies(configs)
    cob = np.inf
    for x in range(n):
        down = configs.copy()
        down[:, x] = np.maximum(down[:, x] - 1, 0)
        Hx = energy.energies(down)
        cx_minus = gen.extras["site_rates"](down)[:, x]
        eps = np.zeros(gen.size)
        for y in range(n):
            if y == x:
                continue
            dy = configs.copy()
            dy[:, y] = np.maximum(dy[:, y] - 1, 0)
            dxy = down.copy()
            dxy[:, y] = np.maximum(dxy[:, y] - 1, 0)
            second = energy.energies(dxy) - Hx - energy.energies(dy) + H0
            eps += np.abs(1 - np.exp(-second))
        live = configs[:, x] > 0
        if not live.any():
            continue
        cx = c[live, x]
        val = n * cx * (1 - cx_minus[live] / cx - eps[live])
        cob = min(cob, float(val.min()))
    if exact_gap is not None:
        if teom > 0 and teom > exact_gap + tol:
            raise AssertionError(f"M-matrix delta {teom:.12g} exceeds exact gap {exact_gap:.12g}")
    return MMatrixBound(teom, float(cob), j)


# ---------------------------------------------------------------------------
# Model-specific structural identities
# ---------------------------------------------------------------------------

def kawasaki_overlap_identity(gen: ReversibleGenerator, f, seed=None):
    """Sum over overlapping exchange pairs versus |Lambda|/2 times the Dirichlet sum."""
    if not gen.model_tag.startswith("kawasaki-complete"):
        raise NotApplicableError("identity holds for complete-graph exchange dynamics")
    F, single = _as_columns(f)
    pairs = [m.sites for m in gen.moves]
    G = len(pairs)
    overlap = np.array([[bool(set(a) & set(b)) for b in pairs] for a in pairs]).reshape(G, G)
    grad = F[gen.targets] - F[:, None, :]  # (S, G, k)
    w = gen.nu[:, None] * gen.crates  # weight on delta
    lhs = np.einsum("gd,sgk,sdk,sd->k", overlap.astype(float), grad, grad, w)
    rhs = 0.5 * gen.space.n_sites * np.einsum("sd,sdk->k", w, grad * grad)
    reps = [IdentityReport.compare(a, b, "kawasaki:overlap", seed) for a, b in zip(lhs, rhs)]
    return reps[0] if single else reps


def zero_range_mean_identity(gen: ReversibleGenerator, f, seed=None):
    """sum_x nu[(sum_z sqrt(c_x) grad_xz f)^2] versus n nu[f (-L f)]."""
    if gen.model_tag != "zero-range":
        raise NotApplicableError("identity holds for zero-range generators")
    F, single = _as_columns(f)
    n = gen.space.n_sites
    c = gen.extras["site_rates"](gen.space.configs)
    grad = F[gen.targets] - F[:, None, :]  # (S, n*n, k)
    u = np.sqrt(c)[:, :, None] * grad.reshape(gen.size, n, n, -1).sum(axis=2)
    lhs = np.einsum("s,sxk->k", gen.nu, u * u)
    rhs = n * np.einsum("s,sk->k", gen.nu, F * -(gen.rates @ F))
    reps = [IdentityReport.compare(a, b, "zero-range:mean", seed) for a, b in zip(lhs, rhs)]
    return reps[0] if single else reps
