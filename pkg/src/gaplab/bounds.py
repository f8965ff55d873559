"""Closed-form spectral-gap lower bounds and the integrals they need."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import mpmath
import numpy as np
from scipy import integrate

from .errors import DivergenceError, InfeasibleTargetError, NotApplicableError
from .generators import ReversibleGenerator
from .potentials import OccupationPairPotential, QuadraticEnergy, RadialPairPotential, sphere_area


@dataclass(frozen=True)
class BoundReport:
    """A lower bound on the spectral gap.

    ``rigorous`` is true when the bound provably applies to the exact
    finite chain it is paired with (as opposed to an idealised limit such
    as the untruncated or continuum model).
    """

    name: str
    value: float
    inputs: Mapping = field(default_factory=dict)
    anchor: str = ""
    rigorous: bool = True

    @property
    def vacuous(self) -> bool:
        return not self.value > 0

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "vacuous": self.vacuous,
                "rigorous": self.rigorous, "anchor": self.anchor, "inputs": dict(self.inputs)}


def _finite(x) -> float:
    v = float(x)
    if math.isinf(v):
        return math.copysign(np.finfo(float).max, v)
    return v


# ---------------------------------------------------------------------------
# Exchange dynamics
# ---------------------------------------------------------------------------

def kawasaki_k(beta: float, norm: float, triple_norm: float):
    """1/2 - e^eps (e^eps - 1) - 4 beta e^{5 eps} |||Phi|||, eps = beta ||Phi|| (mpmath value)."""
    with mpmath.workdps(40):
        b = mpmath.mpf(beta)
        eps = b * mpmath.mpf(norm)
        return (mpmath.mpf(1) / 2 - mpmath.exp(eps) * mpmath.expm1(eps)
                - 4 * b * mpmath.exp(5 * eps) * mpmath.mpf(triple_norm))


def kawasaki_bound(beta: float, norm: float, triple_norm: float) -> BoundReport:
    k = kawasaki_k(beta, norm, triple_norm)
    return BoundReport("kawasaki", _finite(2 * k),
                       {"beta": beta, "norm": norm, "triple_norm": triple_norm, "k": _finite(k)},
                       "exchange dynamics on the complete graph, high-temperature constant")


def beta_lambda(target: float, norm: float, triple_norm: float, tol: float = 1e-8) -> float:
    """Largest beta with 2 k(beta) >= target, by bisection."""
    if not 0 < target < 1:
        raise InfeasibleTargetError("target must lie in (0, 1): the bound never exceeds 1")
    if norm == 0 and triple_norm == 0:
        raise NotApplicableError("zero potential: the bound equals 1 for every beta")

    def bound(b):
        return 2 * kawasaki_k(b, norm, triple_norm)

    hi = 1.0
    while bound(hi) >= target:
        hi *= 2
    lo = 0.0
    grid = np.linspace(0, hi, 33)
    vals = [bound(b) for b in grid]
    assert all(a >= b for a, b in zip(vals, vals[1:])), "bound is not monotone in beta"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bound(mid) >= target:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Zero-range bounds
# ---------------------------------------------------------------------------

def rate_increment(gtab: np.ndarray) -> float:
    """min over sites and 0 <= k < N of g(k+1) - g(k)."""
    return float(np.diff(gtab, axis=1).min())


def relative_increment(gtab: np.ndarray) -> float:
    """min over sites and 1 <= k <= N of (g(k) - g(k-1)) / g(k)."""
    return float((np.diff(gtab, axis=1) / gtab[:, 1:]).min())


def jbound_min(gen: ReversibleGenerator) -> float:
    """Pointwise estimate for quadratic energies, minimised over states and occupied sites.

    With H = eta^T J eta the second differences are 2 J, so the estimate is
    exp(2 (J eta)_x - J_xx) [g(eta_x) - g(eta_x - 1) e^{-2 J_xx} - g(eta_x) eps_x]
    with eps_x = sum_{y != x} |1 - e^{-2 J_xy}|.
    """
    energy: QuadraticEnergy = gen.extras["energy"]
    gtab = gen.extras["rate_table"]
    J = energy.J
    configs = gen.space.configs
    n = configs.shape[1]
    off = np.abs(-np.expm1(-2 * J))
    np.fill_diagonal(off, 0.0)
    eps = off.sum(axis=1)
    best = np.inf
    field_ = configs @ J
    for x in range(n):
        live = configs[:, x] > 0
        if not live.any():
            continue
        k = configs[live, x]
        g = gtab[x, k]
        gm = gtab[x, k - 1]
        pref = np.exp(2 * field_[live, x] - J[x, x])
        val = pref * (g - gm * np.exp(-2 * J[x, x]) - g * eps[x])
        best = min(best, float(val.min()))
    return best


def zero_range_bounds(gen: ReversibleGenerator) -> list[BoundReport]:
    if gen.model_tag != "zero-range":
        raise NotApplicableError("zero-range bounds need a zero-range generator")
    energy: QuadraticEnergy = gen.extras["energy"]
    gtab = gen.extras["rate_table"]
    J = energy.J
    n = J.shape[0]
    nondecreasing = bool(np.all(np.diff(gtab, axis=1) >= 0))
    out = []
    if energy.is_zero():
        delta = rate_increment(gtab)
        out.append(BoundReport("increment", delta, {"delta": delta},
                               "zero-range with increasing rates, H = 0"))
    out.append(BoundReport("jbound", jbound_min(gen), {"n": n},
                           "quadratic energy, pointwise estimate minimised over states"))
    if np.all(J >= 0) and nondecreasing:
        a = float(np.diag(J).min())
        offd = J - np.diag(np.diag(J))
        b = float(offd.max()) if n > 1 else 0.0
        K = int((offd != 0).sum(axis=1).max()) if n > 1 else 0
        if energy.is_zero():
            val = rate_increment(gtab)
            note = "J = 0, reduces to the rate-increment bound"
        else:
            val = math.exp(a) * (1 - math.exp(-a) - K * (-math.expm1(-b)))
            note = "nonnegative J with bounded neighbour count"
        out.append(BoundReport("jjbound", val, {"a": a, "b": b, "K": K}, note))
    if energy.shape and energy.shape[0] == "torus" and nondecreasing:
        _, d, beta, lam = energy.shape
        if lam > 0:
            val = math.exp(lam) * (1 - math.exp(-lam) - 2 * d * (-math.expm1(-beta)))
            out.append(BoundReport("uno", val, {"d": d, "beta": beta, "lambda": lam},
                                   "torus with on-site mass and nearest-neighbour coupling"))
        else:
            epsN = relative_increment(gtab)
            val = epsN - 2 * d * (-math.expm1(-beta))
            out.append(BoundReport("uno-massless", val, {"d": d, "beta": beta, "eps_N": epsN},
                                   "torus without mass, relative rate increments"))
    return out


def uno_bound(energy: QuadraticEnergy) -> float:
    if not (energy.shape and energy.shape[0] == "torus"):
        raise NotApplicableError("energy was not built as the torus model")
    _, d, beta, lam = energy.shape
    return math.exp(lam) * (1 - math.exp(-lam) - 2 * d * (-math.expm1(-beta)))


# ---------------------------------------------------------------------------
# Glauber bounds
# ---------------------------------------------------------------------------

def glauber_eps(potential: OccupationPairPotential | Mapping, beta: float) -> float:
    """sum_z (1 - e^{-beta K(z)}), with the self coupling counted at z = 0."""
    if isinstance(potential, OccupationPairPotential):
        if potential.table is not None:
            raise NotApplicableError("general tables need glauber_eps_table with an occupancy cap")
        values = list(potential.kernel.values()) + [potential.self_coupling]
    else:
        values = list(dict(potential).values())
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)) or not math.isfinite(values.sum()):
        raise DivergenceError("kernel is not summable")
    return float(-np.expm1(-beta * values).sum())


def glauber_eps_table(potential: OccupationPairPotential, site_set, beta: float, cap: int) -> float:
    """Brute-force sup over a finite site set and occupancies in {0..cap}."""
    sites = site_set.sites
    n = len(sites)
    if (cap + 2) ** n > 2 * 10 ** 6:
        raise NotApplicableError("occupancy box too large for the brute-force supremum")
    phi = potential.pair
    best = 0.0
    for eta in itertools.product(range(cap + 1), repeat=n):
        for x in range(n):
            total = 0.0
            for z in range(n):
                grad = sum(phi(sites[z], sites[y], eta[z] + 1, eta[y]) - phi(sites[z], sites[y], eta[z], eta[y])
                           for y in range(n) if y != z)
                if z == x:
                    mixed = 0.0
                else:
                    a, b = eta[z], eta[x]
                    mixed = (phi(sites[z], sites[x], a + 1, b + 1) - phi(sites[z], sites[x], a + 1, b)
                             - phi(sites[z], sites[x], a, b + 1) + phi(sites[z], sites[x], a, b))
                total += math.exp(-beta * grad) * abs(-math.expm1(-beta * mixed))
            best = max(best, total)
    return best


def glauber_bound(lam: float, eps: float, rigorous: bool = True, name: str = "glauber") -> BoundReport:
    return BoundReport(name, 1 - lam * eps, {"lambda": lam, "eps": eps},
                       "birth-death dynamics, one minus activity times interaction strength",
                       rigorous=rigorous)


# ---------------------------------------------------------------------------
# Continuum integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    dimension: int
    profile: RadialPairPotential
    atol: float = 1e-10
    max_doublings: int = 80


@dataclass(frozen=True)
class EpsResult:
    value: float
    error_bound: float
    cutoff: float


def _radial_piece(profile, beta, d, a, b, atol):
    f = lambda r: r ** (d - 1) * -math.expm1(-beta * float(profile(r)))
    val, err = integrate.quad(f, a, b, epsabs=atol, epsrel=0.0, limit=500)
    return val, err


def continuum_eps_detail(spec: QuadratureSpec, beta: float) -> EpsResult:
    """Integral of 1 - exp(-beta phi(|x|)) over R^d with a certified error budget."""
    d, phi, atol = spec.dimension, spec.profile, spec.atol
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if beta == 0:
        return EpsResult(0.0, 0.0, 0.0)
    R = phi.support_radius
    tail = 0.0
    if math.isinf(R):
        R = phi.params["length"]
        tail = phi.tail_bound(beta, R, d)
        if math.isinf(tail):
            raise DivergenceError(f"integrand is not integrable in d={d}: tail estimate is infinite")
        for _ in range(spec.max_doublings):
            if tail <= atol / 2:
                break
            R *= 2
            tail = phi.tail_bound(beta, R, d)
        else:
            raise DivergenceError(f"tail estimate {tail:.3e} still above {atol / 2:.1e} at cutoff {R:.3e}")
    knots = sorted({0.0, R, *[p for p in phi.breakpoints if 0 < p < R]})
    pieces = list(zip(knots[:-1], knots[1:]))
    budget = (atol - tail) / max(len(pieces), 1) / 2
    total, err = 0.0, 0.0
    for a, b in pieces:
        v, e = _radial_piece(phi, beta, d, a, b, budget)
        total += v
        err += e
    surface = sphere_area(d)
    return EpsResult(surface * total, surface * err + tail, R)


def continuum_eps(spec: QuadratureSpec, beta: float) -> float:
    return continuum_eps_detail(spec, beta).value


def discrete_eps(phi: RadialPairPotential, beta: float, h: float, d: int, atol: float = 1e-12) -> float:
    """h^d sum over k in Z^d of 1 - exp(-beta phi(|k| h))."""
    R = phi.support_radius
    if math.isinf(R):
        R = phi.params["length"]
        while phi.tail_bound(beta, max(R - math.sqrt(d) * h, 0.0), d) > atol:
            R *= 2
            if R > 1e8:
                raise DivergenceError("lattice sum tail does not decay")
    m = int(math.floor(R / h + 1e-9)) + 1
    axis = np.arange(-m, m + 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    dist = np.sqrt(sum(g.astype(float) ** 2 for g in grids)) * h
    return float(h ** d * -np.expm1(-beta * phi(dist)).sum())


def continuum_kawasaki_bounds(N: int, volume: float, eps: float, eps_h: float | None = None) -> list[BoundReport]:
    """Bounds for conservative dynamics in a box of given volume.

    The continuum bound and its two-term split use eps; when the lattice
    sum eps_h is supplied the same expressions are reported for the
    discretised chain, where they hold exactly.
    """
    e1 = (N - 1) * eps / volume
    e2 = 2 * (N - 1) * eps / volume
    out = [
        BoundReport("corre", 1 - 3 * (N - 1) * eps / volume,
                    {"N": N, "volume": volume, "eps": eps},
                    "continuum exchange, density times interaction integral", rigorous=False),
        BoundReport("eps-split", 1 - e1 - e2, {"eps1_upper": e1, "eps2_upper": e2},
                    "continuum exchange, two-term split", rigorous=False),
    ]
    if eps_h is not None:
        out.append(BoundReport("corre-lattice", 1 - 3 * (N - 1) * eps_h / volume,
                               {"N": N, "volume": volume, "eps_h": eps_h},
                               "same estimate with the lattice interaction sum"))
    return out


def continuum_glauber_bounds(z: float, eps: float, eps_h: float | None = None,
                             truncated: bool = True) -> list[BoundReport]:
    out = [BoundReport("glac", 1 - z * eps, {"z": z, "eps": eps},
                       "continuum birth-death, one minus activity times interaction integral",
                       rigorous=False)]
    if eps_h is not None:
        out.append(BoundReport("glac-lattice", 1 - z * eps_h, {"z": z, "eps_h": eps_h},
                               "same estimate with the lattice interaction sum",
                               rigorous=not truncated))
    return out


def discretization_slack(N: int, volume: float, eps: float, eps_h: float) -> float:
    """3 (N - 1) |eps_h - eps| / |Lambda|: distance between lattice and continuum bounds."""
    return 3 * (N - 1) * abs(eps_h - eps) / volume
