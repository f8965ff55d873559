"""Reversible generators for the five model families.

Every generator is stored move-wise: for each state ``i`` and move ``g`` we
keep the target state ``targets[i, g]`` and the individual rate
``crates[i, g]``.  The aggregated sparse rate matrix is derived from these.
Moves that leave a configuration unchanged (identity moves, births at the
truncation cap, deaths at empty sites) point back at the source state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from .errors import DetailedBalanceError, InvalidRatesError, ReducibilityError
from .potentials import LatticePotential, OccupationPairPotential, QuadraticEnergy, RadialPairPotential
from .statespace import (BINARY, COMPOSITION, DEFAULT_CAPACITY, TRUNCATED, SiteSet, StateSpace,
                         enumerate_space)

# membership of a move in J, J^{-1} or both (see MoveLabel.family)
J_ONLY = "J"
JINV_ONLY = "J-1"
BOTH = "both"


@dataclass(frozen=True)
class MoveLabel:
    kind: str  # exchange | move | birth | death
    sites: tuple
    family: str = BOTH

    def __str__(self) -> str:
        return f"{self.kind}{self.sites}"


@dataclass(frozen=True, eq=False)
class ReversibleGenerator:
    space: StateSpace
    nu: np.ndarray
    moves: tuple
    inverse: np.ndarray
    targets: np.ndarray
    crates: np.ndarray
    model_tag: str
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.crates < 0) or not np.all(np.isfinite(self.crates)):
            raise InvalidRatesError("move rates must be finite and nonnegative")
        if np.any(self.nu <= 0) or abs(self.nu.sum() - 1.0) > 1e-12:
            raise InvalidRatesError("stationary weights must be positive and sum to 1")
        for arr in (self.nu, self.inverse, self.targets, self.crates):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.space.size

    @property
    def n_moves(self) -> int:
        return len(self.moves)

    @cached_property
    def rates(self) -> sparse.csr_matrix:
        """Rate matrix Q with Q[i, j] the total rate i -> j and zero row sums."""
        S, G = self.crates.shape
        rows = np.repeat(np.arange(S), G)
        cols = self.targets.ravel()
        vals = self.crates.ravel()
        keep = (cols != rows) & (vals > 0)
        Q = sparse.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(S, S)).tocsr()
        Q.sum_duplicates()
        Q = Q - sparse.diags(np.asarray(Q.sum(axis=1)).ravel())
        return Q.tocsr()

    def dense(self) -> np.ndarray:
        return self.rates.toarray()

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Lf for one function (shape (S,)) or many (shape (S, k))."""
        f = np.asarray(f, dtype=float)
        if f.ndim == 1:
            return (self.crates * (f[self.targets] - f[:, None])).sum(axis=1)
        return np.einsum("sg,sgk->sk", self.crates, f[self.targets] - f[:, None, :])

    def move_index(self, i: int, j: int) -> list[tuple[MoveLabel, float]]:
        """Moves carrying state i to state j, with their individual rates."""
        hits = np.flatnonzero((self.targets[i] == j) & (self.crates[i] > 0))
        return [(self.moves[g], float(self.crates[i, g])) for g in hits]

    def with_rates(self, crates: np.ndarray, tag_suffix: str = "") -> "ReversibleGenerator":
        """Copy with replaced move rates (no rebalancing; used for fault injection)."""
        out = replace(self, crates=np.array(crates, dtype=float),
                      model_tag=self.model_tag + tag_suffix)
        return out


def gibbs(log_weights: np.ndarray) -> np.ndarray:
    w = np.exp(log_weights - log_weights.max())
    return w / w.sum()


def check_detailed_balance(gen: ReversibleGenerator, floor: float = 1e-300) -> float:
    """max |nu_i q_ij - nu_j q_ji| / max(nu_i q_ij, nu_j q_ji, floor) over pairs."""
    Q = gen.rates.copy()
    Q.setdiag(0)
    Q.eliminate_zeros()
    F = sparse.diags(gen.nu) @ Q
    diff = abs(F - F.T).tocoo()
    if diff.nnz == 0:
        return 0.0
    big = abs(F).maximum(abs(F.T)).tocsr()
    denom = np.maximum(np.asarray(big[diff.row, diff.col]).ravel(), floor)
    return float((diff.data / denom).max())


def stationarity_residual(gen: ReversibleGenerator) -> float:
    """max_j |sum_i nu_i Q_ij|."""
    return float(np.abs(gen.rates.T @ gen.nu).max())


def corrupt_rate(gen: ReversibleGenerator, state: int, move: int, factor: float) -> ReversibleGenerator:
    """Scale a single move rate, breaking reversibility on purpose."""
    c = np.array(gen.crates)
    c[state, move] *= factor
    return gen.with_rates(c, tag_suffix="+corrupted")


def _require_space(space: StateSpace | None, kind, site_set, capacity, **kw) -> StateSpace:
    if space is not None:
        return space
    return enumerate_space(kind, site_set, capacity=capacity, **kw)


# ---------------------------------------------------------------------------
# Kawasaki
# ---------------------------------------------------------------------------

def _exchange_targets(space: StateSpace, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    configs = space.configs
    out = np.empty((space.size, len(pairs)), dtype=np.int64)
    for g, (x, z) in enumerate(pairs):
        swapped = configs.copy()
        swapped[:, [x, z]] = configs[:, [z, x]]
        out[:, g] = space.lookup(swapped)
    return out


def _kawasaki(site_set: SiteSet, potential: LatticePotential, beta: float, N: int,
              pairs: list, prefactor: float, tag: str, capacity: int) -> ReversibleGenerator:
    space = enumerate_space(BINARY, site_set, N=N, capacity=capacity)
    H = potential.energies(space.configs, site_set)
    targets = _exchange_targets(space, pairs)
    grad = H[targets] - H[:, None]
    crates = prefactor * np.exp(-0.5 * beta * grad)
    moves = tuple(MoveLabel("exchange", (x, z), BOTH) for x, z in pairs)
    inverse = np.arange(len(pairs))
    nu = gibbs(-beta * H)
    norm, triple = potential.norms()
    params = {"n": site_set.n, "N": N, "beta": beta, "norm": norm, "triple_norm": triple,
              "range": potential.range}
    return ReversibleGenerator(space, nu, moves, inverse, targets, crates, tag, params,
                               {"energy": H, "potential": potential, "site_set": site_set})


def build_kawasaki_complete(site_set: SiteSet, potential: LatticePotential, beta: float, N: int,
                            capacity: int = DEFAULT_CAPACITY) -> ReversibleGenerator:
    """Exchange dynamics over all unordered pairs with rate e^{-beta grad H / 2} / n."""
    n = site_set.n
    pairs = [(x, z) for x in range(n) for z in range(x + 1, n)]
    return _kawasaki(site_set, potential, beta, N, pairs, 1.0 / n, "kawasaki-complete", capacity)


def build_kawasaki_nn(site_set: SiteSet, potential: LatticePotential, beta: float, N: int,
                      capacity: int = DEFAULT_CAPACITY) -> ReversibleGenerator:
    """Exchange dynamics across adjacent pairs only, rate e^{-beta grad H / 2}."""
    if site_set.adjacency is None:
        raise ReducibilityError("nearest-neighbour dynamics needs an adjacency relation")
    if not site_set.is_connected():
        raise ReducibilityError("adjacency graph is disconnected; Gibbs measure on S_N not unique")
    return _kawasaki(site_set, potential, beta, N, site_set.edges(), 1.0, "kawasaki-nn", capacity)


# ---------------------------------------------------------------------------
# Zero-range on the complete graph
# ---------------------------------------------------------------------------

def _rate_table(rates, n: int, N: int) -> np.ndarray:
    """Tabulate g_x(k) for k = 0..N as an (n, N+1) array."""
    if callable(rates):
        funcs = [rates] * n
    else:
        funcs = list(rates)
        if len(funcs) != n:
            raise InvalidRatesError(f"need {n} rate functions, got {len(funcs)}")
    table = np.array([[float(g(k)) for k in range(N + 1)] for g in funcs])
    if np.any(table[:, 0] != 0):
        raise InvalidRatesError("rate functions must vanish at zero occupancy")
    if N >= 1 and np.any(table[:, 1:] < 1):
        raise InvalidRatesError("rate functions must satisfy g(k) >= 1 for k >= 1")
    return table


def build_zero_range(site_set: SiteSet, rates, energy: QuadraticEnergy, N: int,
                     capacity: int = DEFAULT_CAPACITY) -> ReversibleGenerator:
    """Zero-range dynamics on n labelled vertices with jumps to any vertex.

    ``rates`` is one function k -> g(k) shared by all sites or a list of
    per-site functions.  The move (x, z) has rate
    c_x(eta) = g_x(eta_x) exp(-grad_death_x H(eta)) / n, for every z.
    """
    n = site_set.n
    if energy.n != n:
        raise ValueError("energy matrix size does not match the site set")
    space = enumerate_space(COMPOSITION, site_set, N=N, capacity=capacity)
    gtab = _rate_table(rates, n, N)
    log_gfact = np.concatenate([np.zeros((n, 1)), np.cumsum(np.log(np.where(gtab[:, 1:] > 0, gtab[:, 1:], 1.0)),
                                                            axis=1)], axis=1)

    def site_rates(configs: np.ndarray) -> np.ndarray:
        """c_x for arbitrary occupation vectors (rows), all sites at once."""
        configs = np.atleast_2d(configs)
        occ = np.clip(configs, 0, N)
        g = gtab[np.arange(n)[None, :], occ]
        return g * np.exp(-energy.grad_death_all(configs)) / n

    configs = space.configs
    c = site_rates(configs)
    moves, targets, crates, inverse = [], [], [], []
    pairs = [(x, z) for x in range(n) for z in range(n)]
    pos = {p: g for g, p in enumerate(pairs)}
    for x, z in pairs:
        moved = configs.copy()
        if x != z:
            has = moved[:, x] > 0
            moved[has, x] -= 1
            moved[has, z] += 1
        targets.append(space.lookup(moved))
        crates.append(c[:, x])
        moves.append(MoveLabel("move", (x, z), BOTH))
        inverse.append(pos[(z, x)])
    targets = np.stack(targets, axis=1)
    crates = np.stack(crates, axis=1)
    logw = -energy.energies(configs) - log_gfact[np.arange(n)[None, :], configs].sum(axis=1)
    nu = gibbs(logw)
    params = {"n": n, "N": N, "energy_shape": list(energy.shape) if energy.shape else None}
    extras = {"site_rates": site_rates, "rate_table": gtab, "energy": energy, "site_set": site_set}
    return ReversibleGenerator(space, nu, tuple(moves), np.array(inverse), targets, crates,
                               "zero-range", params, extras)


def check_zero_range_balance(gen: ReversibleGenerator, phi: np.ndarray, x: int, z: int) -> float:
    """Relative residual of nu[c_x phi] = nu[c_z phi^{zx}]."""
    c = gen.extras["site_rates"](gen.space.configs)
    n = gen.space.n_sites
    g = z * n + x  # move (z, x)
    lhs = float(gen.nu @ (c[:, x] * phi))
    rhs = float(gen.nu @ (c[:, z] * phi[gen.targets[:, g]]))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


# ---------------------------------------------------------------------------
# Glauber birth-death dynamics
# ---------------------------------------------------------------------------

def build_glauber_discrete(site_set: SiteSet, lam: float, potential: OccupationPairPotential,
                           beta: float, M: int, total_cap: int | None = None,
                           capacity: int = DEFAULT_CAPACITY,
                           tag: str = "glauber-discrete") -> ReversibleGenerator:
    """Birth-death dynamics on {0..M}^n, births suppressed at the cap.

    Deaths happen at rate eta_x.  Births happen at rate
    (eta_x + 1) nu(eta + e_x) / nu(eta) = lam exp(-beta grad_birth H).
    ``total_cap`` optionally also caps the total particle number.
    """
    if lam <= 0:
        raise InvalidRatesError("activity must be positive")
    if M < 1:
        raise InvalidRatesError("truncation cap must be at least 1")
    n = site_set.n
    space = enumerate_space(TRUNCATED, site_set, M=M, total_cap=total_cap, capacity=capacity)
    configs = space.configs
    H = potential.energies(configs, site_set)
    logw = (configs * math.log(lam) - gammaln(configs + 1)).sum(axis=1) - beta * H
    nu = gibbs(logw)
    idx = np.arange(space.size)
    targets = np.empty((space.size, 2 * n), dtype=np.int64)
    crates = np.zeros((space.size, 2 * n))
    for x in range(n):
        up = configs.copy()
        up[:, x] += 1
        t = space.lookup(up)
        ok = t >= 0
        targets[:, x] = np.where(ok, t, idx)
        crates[ok, x] = (configs[ok, x] + 1) * np.exp(logw[t[ok]] - logw[ok])
        down = configs.copy()
        has = down[:, x] > 0
        down[has, x] -= 1
        targets[:, n + x] = space.lookup(down)
        crates[:, n + x] = configs[:, x]
    moves = tuple([MoveLabel("birth", (x,), J_ONLY) for x in range(n)]
                  + [MoveLabel("death", (x,), JINV_ONLY) for x in range(n)])
    inverse = np.concatenate([np.arange(n, 2 * n), np.arange(n)])
    params = {"n": n, "lam": lam, "beta": beta, "M": M, "total_cap": total_cap}
    extras = {"energy": H, "potential": potential, "site_set": site_set, "log_weights": logw}
    return ReversibleGenerator(space, nu, moves, inverse, targets, crates, tag, params, extras)


# ---------------------------------------------------------------------------
# Lattice discretisations of the continuum models
# ---------------------------------------------------------------------------

def grid_cells(box: Sequence[float], h: float) -> SiteSet:
    shape = tuple(int(math.ceil(L / h - 1e-12)) for L in box)
    return SiteSet.box(shape, spacing=h)


def cell_coupling(phi: RadialPairPotential, site_set: SiteSet, h: float) -> np.ndarray:
    """phi(|u - v| h) between cell centres, with phi(0) on the diagonal."""
    pts = np.array([np.atleast_1d(np.asarray(s, dtype=float)) for s in site_set.sites]) * h
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return phi(dist)


def build_continuum_kawasaki_discretized(box: Sequence[float], phi: RadialPairPotential, beta: float,
                                         N: int, h: float,
                                         capacity: int = DEFAULT_CAPACITY) -> ReversibleGenerator:
    """Particles on cell centres; one particle jumps from cell u to a uniform cell v.

    Rate of (u, v) is eta_u exp(-beta sum_w (eta - e_u)_w phi((w - v) h)) / n,
    the interaction of the arriving particle with all the others.
    """
    box = tuple(float(L) for L in box)
    cells = grid_cells(box, h)
    n = cells.n
    space = enumerate_space(COMPOSITION, cells, N=N, capacity=capacity)
    configs = space.configs.astype(float)
    Phi = cell_coupling(phi, cells, h)
    H = 0.5 * np.einsum("si,ij,sj->s", configs, Phi, configs) - 0.5 * np.diag(Phi) @ configs.T
    logw = -beta * H - gammaln(configs + 1).sum(axis=1)
    nu = gibbs(logw)
    field_ = configs @ Phi  # sum_w eta_w phi(w - v)
    pairs = [(u, v) for u in range(n) for v in range(n)]
    pos = {p: g for g, p in enumerate(pairs)}
    targets = np.empty((space.size, n * n), dtype=np.int64)
    crates = np.empty((space.size, n * n))
    inverse = np.empty(n * n, dtype=np.int64)
    for g, (u, v) in enumerate(pairs):
        moved = space.configs.copy()
        has = moved[:, u] > 0
        if u != v:
            moved[has, u] -= 1
            moved[has, v] += 1
        targets[:, g] = space.lookup(moved)
        crates[:, g] = configs[:, u] * np.exp(-beta * (field_[:, v] - Phi[u, v])) / n
        inverse[g] = pos[(v, u)]
    moves = tuple(MoveLabel("move", p, BOTH) for p in pairs)
    volume = float(np.prod(box))
    params = {"box": list(box), "h": h, "n": n, "N": N, "beta": beta, "volume": volume,
              "profile": phi.profile, "profile_params": dict(phi.params)}
    extras = {"coupling": Phi, "energy": H, "site_set": cells, "phi": phi}
    return ReversibleGenerator(space, nu, moves, inverse, targets, crates,
                               "continuum-kawasaki", params, extras)


def build_continuum_glauber_discretized(box: Sequence[float], phi: RadialPairPotential, beta: float,
                                        z: float, h: float, M: int, total_cap: int | None = None,
                                        capacity: int = DEFAULT_CAPACITY) -> ReversibleGenerator:
    """Discrete Glauber on the cell grid with activity z h^d and kernel phi(k h)."""
    box = tuple(float(L) for L in box)
    cells = grid_cells(box, h)
    potential = OccupationPairPotential.from_radial(phi, cells, h)
    lam = z * h ** len(box)
    gen = build_glauber_discrete(cells, lam, potential, beta, M, total_cap=total_cap,
                                 capacity=capacity, tag="continuum-glauber")
    gen.params.update({"box": list(box), "h": h, "z": z, "volume": float(np.prod(box)),
                       "profile": phi.profile, "profile_params": dict(phi.params)})
    gen.extras["phi"] = phi
    return gen


def require_reversible(gen: ReversibleGenerator, tol: float = 1e-9) -> float:
    res = check_detailed_balance(gen)
    if res > tol:
        raise DetailedBalanceError(f"detailed-balance residual {res:.3e} exceeds {tol:.1e}")
    return res
