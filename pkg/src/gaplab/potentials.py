"""Interaction energies for the lattice, zero-range and continuum models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np
from scipy import special

from .errors import DivergenceError, MissingBoundaryError
from .statespace import SiteSet


def _as_point(label) -> np.ndarray:
    if isinstance(label, tuple):
        return np.asarray(label, dtype=float)
    return np.asarray([label], dtype=float)


def _displacement(a, b) -> tuple:
    if isinstance(a, tuple):
        return tuple(int(u) - int(v) for u, v in zip(a, b))
    return (int(a) - int(b),)


# ---------------------------------------------------------------------------
# Lattice-gas potentials on {0,1}^Lambda
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialTerm:
    support: tuple
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if len(self.support) == 0:
            raise ValueError("potential support must be nonempty")
        if len(set(self.support)) != len(self.support):
            raise ValueError("potential support has repeated sites")
        if table.shape != (2,) * len(self.support):
            raise ValueError(f"table for support of size {len(self.support)} must have shape "
                             f"{(2,) * len(self.support)}, got {table.shape}")
        object.__setattr__(self, "table", table)

    @property
    def sup(self) -> float:
        return float(np.abs(self.table).max())


@dataclass(frozen=True)
class LatticePotential:
    """Finite list of interaction terms Phi_A, not assumed translation invariant."""

    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def nn_pair(cls, site_set: SiteSet, coupling: float) -> "LatticePotential":
        """Phi_{x,y}(eta) = coupling * eta_x eta_y on every adjacent pair.

        Boundary sites listed in ``site_set.boundary`` that are lattice
        neighbours of the box also receive a pair term.
        """
        table = np.array([[0.0, 0.0], [0.0, coupling]])
        terms = [PotentialTerm((site_set.sites[i], site_set.sites[j]), table)
                 for i, j in site_set.edges()]
        for b in site_set.boundary:
            for s in site_set.sites:
                d = _displacement(s, b)
                if sum(abs(v) for v in d) == 1:
                    terms.append(PotentialTerm((s, b), table))
        return cls(tuple(terms))

    @classmethod
    def from_pairs(cls, couplings: Mapping[tuple, float]) -> "LatticePotential":
        terms = []
        for (a, b), J in couplings.items():
            terms.append(PotentialTerm((a, b), np.array([[0.0, 0.0], [0.0, J]])))
        return cls(tuple(terms))

    @property
    def range(self) -> float:
        best = 0.0
        for t in self.terms:
            pts = [_as_point(s) for s in t.support]
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    best = max(best, float(np.linalg.norm(pts[i] - pts[j])))
        return best

    def norms(self) -> tuple[float, float]:
        """(||Phi||, |||Phi|||) as exact maxima over sites in some support."""
        plain: dict = {}
        weighted: dict = {}
        for t in self.terms:
            s = t.sup
            for x in t.support:
                plain[x] = plain.get(x, 0.0) + s
                weighted[x] = weighted.get(x, 0.0) + len(t.support) * s
        if not plain:
            return 0.0, 0.0
        return max(plain.values()), max(weighted.values())

    def compile(self, site_set: SiteSet) -> list:
        """Resolve each relevant term to (site indices, fixed boundary values, table)."""
        pos = {s: i for i, s in enumerate(site_set.sites)}
        out = []
        for t in self.terms:
            idx = [pos.get(s, -1) for s in t.support]
            if all(i < 0 for i in idx):
                continue
            fixed = []
            for s, i in zip(t.support, idx):
                if i >= 0:
                    fixed.append(-1)
                elif s in site_set.boundary:
                    fixed.append(int(site_set.boundary[s]))
                else:
                    raise MissingBoundaryError(
                        f"term on {t.support} reaches site {s!r} with no boundary value")
            out.append((np.array(idx), np.array(fixed), t.table))
        return out

    def energies(self, configs: np.ndarray, site_set: SiteSet) -> np.ndarray:
        """Energy of every row of ``configs`` (vectorised)."""
        configs = np.atleast_2d(configs)
        total = np.zeros(configs.shape[0])
        for idx, fixed, table in self.compile(site_set):
            cols = tuple(configs[:, i] if i >= 0 else np.full(configs.shape[0], f)
                         for i, f in zip(idx, fixed))
            total += table[cols]
        return total

    def energy(self, eta: Sequence[int], site_set: SiteSet) -> float:
        return float(self.energies(np.asarray([eta]), site_set)[0])

    def grad_exchange(self, eta: Sequence[int], x: int, z: int, site_set: SiteSet) -> float:
        """H(eta^{xz}) - H(eta) from the terms touching x or z only."""
        eta = np.asarray(eta)
        swapped = eta.copy()
        swapped[x], swapped[z] = eta[z], eta[x]
        if eta[x] == eta[z]:
            return 0.0
        diff = 0.0
        for idx, fixed, table in self.compile(site_set):
            if x not in idx and z not in idx:
                continue
            a = tuple(int(eta[i]) if i >= 0 else int(f) for i, f in zip(idx, fixed))
            b = tuple(int(swapped[i]) if i >= 0 else int(f) for i, f in zip(idx, fixed))
            diff += table[b] - table[a]
        return float(diff)


# ---------------------------------------------------------------------------
# Quadratic energies for the zero-range family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticEnergy:
    """H(eta) = sum_{x,y} J_{x,y} eta_x eta_y with J symmetric.

    ``shape`` optionally records how J was generated (e.g. the torus model
    with nearest-neighbour coupling and on-site mass) so that bounds with a
    closed form for that shape can recognise it.
    """

    J: np.ndarray
    shape: tuple | None = None

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("J must be a square matrix")
        if not np.allclose(J, J.T, rtol=0, atol=1e-14):
            raise ValueError("J must be symmetric")
        J.setflags(write=False)
        object.__setattr__(self, "J", J)

    @classmethod
    def zero(cls, n: int) -> "QuadraticEnergy":
        return cls(np.zeros((n, n)), shape=("zero",))

    @classmethod
    def torus_model(cls, site_set: SiteSet, beta: float, mass: float) -> "QuadraticEnergy":
        """beta * sum_{x~y} eta_x eta_y + mass * sum_x eta_x^2 on a periodic box."""
        n = site_set.n
        J = mass * np.eye(n)
        for i, j in site_set.edges():
            J[i, j] = J[j, i] = beta / 2
        return cls(J, shape=("torus", site_set.dimension, float(beta), float(mass)))

    @property
    def n(self) -> int:
        return self.J.shape[0]

    def is_zero(self) -> bool:
        return not np.any(self.J)

    def energies(self, configs: np.ndarray) -> np.ndarray:
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        return np.einsum("si,ij,sj->s", configs, self.J, configs)

    def energy(self, eta: Sequence[int]) -> float:
        eta = np.asarray(eta, dtype=float)
        return float(eta @ self.J @ eta)

    def grad_birth(self, eta: Sequence[int], x: int) -> float:
        eta = np.asarray(eta, dtype=float)
        return float(2 * (self.J[x] @ eta) + self.J[x, x])

    def grad_death(self, eta: Sequence[int], x: int) -> float:
        eta = np.asarray(eta, dtype=float)
        if eta[x] <= 0:
            return 0.0
        return float(-2 * (self.J[x] @ eta) + self.J[x, x])

    def grad_death_all(self, configs: np.ndarray) -> np.ndarray:
        """Matrix of H(eta^{x-}) - H(eta) for every row and site."""
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        g = -2 * configs @ self.J + np.diag(self.J)[None, :]
        return np.where(configs > 0, g, 0.0)

    def second_differences(self) -> np.ndarray:
        """Constant matrix of mixed second differences, 2 J."""
        return 2 * self.J


# ---------------------------------------------------------------------------
# Radial pair potentials in R^d
# ---------------------------------------------------------------------------

PROFILES = ("indicator", "exponential", "power", "tabulated")


@dataclass(frozen=True)
class RadialPairPotential:
    """Nonnegative even pair potential phi(x) = profile(|x|).

    Profiles and parameters:

    * ``indicator``: theta * 1{r <= radius}
    * ``exponential``: amplitude * exp(-r / length)
    * ``power``: amplitude * (1 + r / length) ** (-exponent)
    * ``tabulated``: linear interpolation of ``values`` at ``radii``, zero beyond
    """

    profile: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown radial profile {self.profile!r}")
        p = dict(self.params)
        if self.profile == "indicator":
            if p["theta"] < 0 or p["radius"] < 0:
                raise ValueError("indicator needs theta >= 0 and radius >= 0")
        elif self.profile in ("exponential", "power"):
            if p["amplitude"] < 0 or p["length"] <= 0:
                raise ValueError(f"{self.profile} needs amplitude >= 0 and length > 0")
        else:
            radii = np.asarray(p["radii"], dtype=float)
            values = np.asarray(p["values"], dtype=float)
            if radii.shape != values.shape or radii.ndim != 1 or len(radii) < 2:
                raise ValueError("tabulated profile needs matching 1-d radii and values")
            if np.any(np.diff(radii) <= 0) or radii[0] != 0:
                raise ValueError("tabulated radii must start at 0 and increase")
            if np.any(values < 0):
                raise ValueError("tabulated values must be nonnegative")
        object.__setattr__(self, "params", p)

    @classmethod
    def indicator(cls, theta: float, radius: float) -> "RadialPairPotential":
        return cls("indicator", {"theta": float(theta), "radius": float(radius)})

    @classmethod
    def exponential(cls, amplitude: float, length: float) -> "RadialPairPotential":
        return cls("exponential", {"amplitude": float(amplitude), "length": float(length)})

    @classmethod
    def power(cls, amplitude: float, length: float, exponent: float) -> "RadialPairPotential":
        return cls("power", {"amplitude": float(amplitude), "length": float(length),
                             "exponent": float(exponent)})

    def __call__(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        p = self.params
        if self.profile == "indicator":
            return np.where(r <= p["radius"], p["theta"], 0.0)
        if self.profile == "exponential":
            return p["amplitude"] * np.exp(-r / p["length"])
        if self.profile == "power":
            return p["amplitude"] * (1.0 + r / p["length"]) ** (-p["exponent"])
        radii = np.asarray(p["radii"], dtype=float)
        values = np.asarray(p["values"], dtype=float)
        return np.interp(r, radii, values, right=0.0)

    def at(self, x) -> np.ndarray:
        """Evaluate at displacement vectors (last axis = coordinates)."""
        x = np.asarray(x, dtype=float)
        return self(np.linalg.norm(np.atleast_1d(x), axis=-1) if x.ndim else abs(x))

    @property
    def support_radius(self) -> float:
        if self.profile == "indicator":
            return self.params["radius"]
        if self.profile == "tabulated":
            return float(self.params["radii"][-1])
        return math.inf

    @property
    def breakpoints(self) -> list[float]:
        if self.profile == "indicator":
            return [self.params["radius"]]
        if self.profile == "tabulated":
            return [float(r) for r in self.params["radii"]]
        return []

    def tail_bound(self, beta: float, R: float, d: int) -> float:
        """Upper bound on the integral of 1 - exp(-beta phi) over |x| > R.

        Uses 1 - exp(-t) <= t together with the closed-form radial moments
        of the decaying profiles.
        """
        if R >= self.support_radius:
            return 0.0
        surface = sphere_area(d)
        p = self.params
        if self.profile == "exponential":
            a, ell = p["amplitude"], p["length"]
            # int_R^inf r^{d-1} e^{-r/ell} dr = ell^d Gamma(d, R/ell)
            moment = ell ** d * special.gamma(d) * special.gammaincc(d, R / ell)
            return float(surface * beta * a * moment)
        if self.profile == "power":
            a, ell, q = p["amplitude"], p["length"], p["exponent"]
            if q <= d:
                return math.inf
            # r^{d-1} (1 + r/ell)^{-q} <= ell^{d-1} (1 + r/ell)^{d-1-q}
            u = 1.0 + R / ell
            moment = ell ** d * u ** (d - q) / (q - d)
            return float(surface * beta * a * moment)
        raise DivergenceError(f"no tail bound for profile {self.profile!r}")


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


# ---------------------------------------------------------------------------
# Occupation pair potentials for Glauber dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OccupationPairPotential:
    """Pair interaction between occupation numbers.

    The common case is the kernel form phi(x, y, m, n) = K(x - y) m n with
    ``kernel`` mapping displacement tuples to K >= 0.  ``self_coupling``
    adds s * eta_x (eta_x - 1) / 2 per site (pairs of particles sharing a
    site); it is zero for genuine lattice models and phi(0) for discretised
    continuum models.  A general ``table(x, y, m, n)`` callable may be given
    instead of a kernel.
    """

    kernel: Mapping[tuple, float] = field(default_factory=dict)
    self_coupling: float = 0.0
    table: Callable | None = None

    def __post_init__(self):
        kernel = {tuple(k): float(v) for k, v in dict(self.kernel).items()}
        for disp, value in kernel.items():
            if all(c == 0 for c in disp) and value != 0:
                raise ValueError("kernel must vanish at displacement 0; use self_coupling")
            if value < 0:
                raise ValueError("kernel values must be nonnegative")
            neg = tuple(-c for c in disp)
            if not math.isclose(kernel.get(neg, 0.0), value, rel_tol=0, abs_tol=1e-15):
                raise ValueError(f"kernel not even: K{disp} != K{neg}")
        total = sum(kernel.values())
        if not math.isfinite(total):
            raise DivergenceError("kernel is not summable")
        object.__setattr__(self, "kernel", kernel)

    @classmethod
    def nearest_neighbour(cls, kappa: float, d: int = 1) -> "OccupationPairPotential":
        kernel = {}
        for axis in range(d):
            for sign in (1, -1):
                disp = [0] * d
                disp[axis] = sign
                kernel[tuple(disp)] = float(kappa)
        return cls(kernel)

    @classmethod
    def from_radial(cls, phi: RadialPairPotential, site_set: SiteSet, h: float) -> "OccupationPairPotential":
        """Sample phi at every cell displacement of ``site_set`` times ``h``."""
        kernel = {}
        for a in site_set.sites:
            for b in site_set.sites:
                disp = _displacement(a, b)
                if any(disp) and disp not in kernel:
                    kernel[disp] = float(phi.at(np.asarray(disp, dtype=float) * h))
        return cls(kernel, self_coupling=float(phi(0.0)))

    def K(self, disp: tuple) -> float:
        return self.kernel.get(tuple(disp), 0.0)

    def pair(self, x, y, m: int, n: int) -> float:
        if self.table is not None:
            return float(self.table(x, y, m, n))
        return self.K(_displacement(x, y)) * m * n

    def coupling_matrix(self, site_set: SiteSet) -> np.ndarray:
        """Interior K(x - y) matrix with zero diagonal (kernel form only)."""
        n = site_set.n
        K = np.zeros((n, n))
        for i, a in enumerate(site_set.sites):
            for j, b in enumerate(site_set.sites):
                if i != j:
                    K[i, j] = self.K(_displacement(a, b))
        return K

    def boundary_field(self, site_set: SiteSet) -> np.ndarray:
        field_ = np.zeros(site_set.n)
        for i, a in enumerate(site_set.sites):
            for b, tau in site_set.boundary.items():
                field_[i] += self.K(_displacement(a, b)) * tau
        return field_

    def energies(self, configs: np.ndarray, site_set: SiteSet) -> np.ndarray:
        configs = np.atleast_2d(np.asarray(configs))
        if self.table is None:
            c = configs.astype(float)
            K = self.coupling_matrix(site_set)
            e = 0.5 * np.einsum("si,ij,sj->s", c, K, c)
            e += c @ self.boundary_field(site_set)
        else:
            e = np.zeros(configs.shape[0])
            sites = site_set.sites
            for k, row in enumerate(configs):
                tot = 0.0
                for i in range(len(sites)):
                    for j in range(i + 1, len(sites)):
                        tot += self.table(sites[i], sites[j], int(row[i]), int(row[j]))
                    for b, tau in site_set.boundary.items():
                        tot += self.table(sites[i], b, int(row[i]), int(tau))
                e[k] = tot
        if self.self_coupling:
            c = configs.astype(float)
            e = e + 0.5 * self.self_coupling * (c * (c - 1)).sum(axis=1)
        return e

    def energy(self, eta: Sequence[int], site_set: SiteSet) -> float:
        return float(self.energies(np.asarray([eta]), site_set)[0])

    def grad_birth(self, eta: Sequence[int], x: int, site_set: SiteSet) -> float:
        up = list(eta)
        up[x] += 1
        return self.energy(up, site_set) - self.energy(eta, site_set)

    def grad_death(self, eta: Sequence[int], x: int, site_set: SiteSet) -> float:
        if eta[x] == 0:
            return 0.0
        down = list(eta)
        down[x] -= 1
        return self.energy(down, site_set) - self.energy(eta, site_set)


# ---------------------------------------------------------------------------
# Generic dispatch
# ---------------------------------------------------------------------------

def energy(potential, eta: Sequence[int], site_set: SiteSet | None = None) -> float:
    if isinstance(potential, QuadraticEnergy):
        return potential.energy(eta)
    return potential.energy(eta, site_set)


def grad_exchange(potential: LatticePotential, eta, x: int, z: int, site_set: SiteSet) -> float:
    return potential.grad_exchange(eta, x, z, site_set)


def grad_birth(potential, eta, x: int, site_set: SiteSet | None = None) -> float:
    if isinstance(potential, QuadraticEnergy):
        return potential.grad_birth(eta, x)
    return potential.grad_birth(eta, x, site_set)


def grad_death(potential, eta, x: int, site_set: SiteSet | None = None) -> float:
    if isinstance(potential, QuadraticEnergy):
        return potential.grad_death(eta, x)
    return potential.grad_death(eta, x, site_set)


def norms(potential: LatticePotential) -> tuple[float, float]:
    return potential.norms()
