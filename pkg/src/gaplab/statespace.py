"""Finite configuration spaces and the elementary particle moves.

Configurations are occupation-number vectors indexed by the sites of a
:class:`SiteSet`.  Single configurations travel as tuples of ints; whole
state spaces are stored as an ``(S, n)`` integer array in lexicographic
order so that matrix indices are reproducible across runs.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import CapacityError, InfeasibleStateSpaceError, InvalidMoveError

DEFAULT_CAPACITY = 200_000

BINARY = "fixed-N-binary"
COMPOSITION = "fixed-N-composition"
TRUNCATED = "truncated-product"
KINDS = (BINARY, COMPOSITION, TRUNCATED)


class _Saturated(enum.Enum):
    SATURATED = "saturated"

    def __repr__(self) -> str:
        return "SATURATED"


#: Returned by :func:`apply_birth` when the site already sits at the cap.
SATURATED = _Saturated.SATURATED


@dataclass(frozen=True)
class SiteSet:
    """Ordered finite set of sites with optional geometry.

    ``sites`` holds hashable labels (lattice points are tuples of ints).
    ``adjacency`` is a set of index pairs ``(i, j)`` with ``i < j``;
    ``boundary`` maps labels *outside* the set to fixed occupations.
    """

    sites: tuple
    dimension: int = 1
    adjacency: frozenset | None = None
    boundary: Mapping[Hashable, int] = field(default_factory=dict)
    spacing: float = 1.0

    def __post_init__(self):
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("sites must be distinct")
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if self.adjacency is not None:
            n = len(self.sites)
            for pair in self.adjacency:
                i, j = pair
                if i == j:
                    raise ValueError("adjacency must be irreflexive")
                if not (0 <= i < n and 0 <= j < n) or i > j:
                    raise ValueError(f"bad adjacency pair {pair}")
        inside = set(self.sites)
        for label in self.boundary:
            if label in inside:
                raise ValueError(f"boundary assigns a value to interior site {label!r}")

    @property
    def n(self) -> int:
        return len(self.sites)

    def __len__(self) -> int:
        return len(self.sites)

    def index(self, label) -> int:
        return self._positions[label]

    @property
    def _positions(self) -> dict:
        # cached lazily; frozen dataclass so go through object.__setattr__
        try:
            return self.__dict__["_pos_cache"]
        except KeyError:
            pos = {s: i for i, s in enumerate(self.sites)}
            object.__setattr__(self, "_pos_cache", pos)
            return pos

    def neighbors(self, i: int) -> list[int]:
        if self.adjacency is None:
            return []
        out = []
        for a, b in self.adjacency:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def edges(self) -> list[tuple[int, int]]:
        if self.adjacency is None:
            return []
        return sorted(tuple(p) for p in self.adjacency)

    def is_connected(self) -> bool:
        n = self.n
        if n <= 1:
            return True
        if not self.adjacency:
            return False
        adj: dict[int, list[int]] = {i: [] for i in range(n)}
        for a, b in self.adjacency:
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == n

    def with_boundary(self, boundary: Mapping) -> "SiteSet":
        return SiteSet(self.sites, self.dimension, self.adjacency, dict(boundary), self.spacing)

    @classmethod
    def labels(cls, n: int) -> "SiteSet":
        """Abstract vertex set V_n with no geometry."""
        return cls(tuple(range(n)), dimension=1)

    @classmethod
    def complete(cls, n: int) -> "SiteSet":
        """V_n with every pair adjacent."""
        adj = frozenset((i, j) for i in range(n) for j in range(i + 1, n))
        return cls(tuple(range(n)), dimension=1, adjacency=adj)

    @classmethod
    def box(cls, shape: Sequence[int], periodic: bool = False, spacing: float = 1.0) -> "SiteSet":
        """Rectangular box of Z^d (or the torus when ``periodic``) with n.n. adjacency."""
        shape = tuple(int(s) for s in shape)
        if any(s < 1 for s in shape):
            raise ValueError("box sides must be positive")
        sites = tuple(itertools.product(*(range(s) for s in shape)))
        pos = {s: i for i, s in enumerate(sites)}
        adj = set()
        for s in sites:
            for axis, side in enumerate(shape):
                if side == 1:
                    continue
                t = list(s)
                t[axis] += 1
                if t[axis] == side:
                    if not periodic or side == 2:
                        continue
                    t[axis] = 0
                i, j = pos[s], pos[tuple(t)]
                if i != j:
                    adj.add((min(i, j), max(i, j)))
        return cls(sites, dimension=len(shape), adjacency=frozenset(adj), spacing=spacing)

    @classmethod
    def segment(cls, length: int) -> "SiteSet":
        return cls.box((length,))

    @classmethod
    def torus(cls, length: int, d: int = 1) -> "SiteSet":
        return cls.box((length,) * d, periodic=True)


def state_count(kind: str, n: int, N: int | None = None, M: int | None = None,
                total_cap: int | None = None) -> int:
    """Number of configurations without enumerating them."""
    if kind == BINARY:
        return math.comb(n, N) if 0 <= N <= n else 0
    if kind == COMPOSITION:
        return math.comb(N + n - 1, n - 1) if n > 0 else int(N == 0)
    if kind == TRUNCATED:
        if total_cap is None or total_cap >= n * M:
            return (M + 1) ** n
        # vectors in {0..M}^n with sum <= total_cap
        ways = [1] + [0] * total_cap
        for _ in range(n):
            nxt = [0] * (total_cap + 1)
            for s, w in enumerate(ways):
                if w:
                    for k in range(min(M, total_cap - s) + 1):
                        nxt[s + k] += w
            ways = nxt
        return sum(ways)
    raise ValueError(f"unknown state-space kind {kind!r}")


def _vectors(n: int, cap: int, lo: int, hi: int) -> Iterator[tuple]:
    """Lexicographic vectors in {0..cap}^n whose sum lies in [lo, hi]."""
    if n == 0:
        if lo <= 0 <= hi:
            yield ()
        return
    for k in range(min(cap, hi) + 1):
        rest_max = cap * (n - 1)
        if k + rest_max < lo:
            continue
        for tail in _vectors(n - 1, cap, lo - k, hi - k):
            yield (k,) + tail


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Immutable, lexicographically ordered list of admissible configurations."""

    configs: np.ndarray
    kind: str
    N: int | None = None
    M: int | None = None
    total_cap: int | None = None
    site_set: SiteSet | None = None

    def __post_init__(self):
        self.configs.setflags(write=False)
        cap = int(self.configs.max()) if self.configs.size else 0
        base = cap + 1
        n = self.configs.shape[1]
        use_codes = n * math.log2(max(base, 2)) < 62
        object.__setattr__(self, "_base", base)
        object.__setattr__(self, "_use_codes", use_codes)
        if use_codes:
            weights = base ** np.arange(n - 1, -1, -1, dtype=np.int64)
            codes = self.configs.astype(np.int64) @ weights
            object.__setattr__(self, "_weights", weights)
            object.__setattr__(self, "_codes", codes)
        object.__setattr__(self, "index", {tuple(int(v) for v in row): i
                                           for i, row in enumerate(self.configs)})

    @property
    def size(self) -> int:
        return self.configs.shape[0]

    def __len__(self) -> int:
        return self.configs.shape[0]

    @property
    def n_sites(self) -> int:
        return self.configs.shape[1]

    def __getitem__(self, i: int) -> tuple:
        return tuple(int(v) for v in self.configs[i])

    def __iter__(self) -> Iterator[tuple]:
        for i in range(self.size):
            yield self[i]

    def position(self, eta: Iterable[int]) -> int:
        """Index of a configuration; ``KeyError`` if it is not admissible."""
        return self.index[tuple(int(v) for v in eta)]

    def lookup(self, etas: np.ndarray) -> np.ndarray:
        """Vectorised index lookup; rows not in the space map to -1."""
        etas = np.asarray(etas)
        out = np.full(etas.shape[0], -1, dtype=np.int64)
        if etas.shape[0] == 0:
            return out
        valid = (etas >= 0).all(axis=1) & (etas < self._base).all(axis=1)
        if self._use_codes:
            codes = etas[valid].astype(np.int64) @ self._weights
            pos = np.searchsorted(self._codes, codes)
            pos = np.minimum(pos, self.size - 1)
            hit = self._codes[pos] == codes
            idx = np.where(hit, pos, -1)
            out[np.flatnonzero(valid)] = idx
        else:
            for k in np.flatnonzero(valid):
                out[k] = self.index.get(tuple(int(v) for v in etas[k]), -1)
        return out


def enumerate_space(kind: str, site_set: SiteSet | int, N: int | None = None,
                    M: int | None = None, total_cap: int | None = None,
                    capacity: int = DEFAULT_CAPACITY) -> StateSpace:
    """Enumerate a configuration space in lexicographic order.

    ``kind`` is one of ``"fixed-N-binary"`` (C(n, N) states),
    ``"fixed-N-composition"`` (C(N+n-1, n-1) states) or
    ``"truncated-product"`` ((M+1)^n states, optionally restricted to total
    occupation at most ``total_cap``).
    """
    if isinstance(site_set, int):
        n = site_set
        sites = None
    else:
        n = site_set.n
        sites = site_set
    if n < 1:
        raise InfeasibleStateSpaceError("need at least one site")
    if kind in (BINARY, COMPOSITION):
        if N is None or N < 0:
            raise InfeasibleStateSpaceError("particle number N must be a nonnegative integer")
        if kind == BINARY and N > n:
            raise InfeasibleStateSpaceError(f"cannot place N={N} particles on n={n} binary sites")
    elif kind == TRUNCATED:
        if M is None or M < 0:
            raise InfeasibleStateSpaceError("occupation cap M must be >= 0")
        if total_cap is not None and total_cap < 0:
            raise InfeasibleStateSpaceError("total cap must be >= 0")
    else:
        raise ValueError(f"unknown state-space kind {kind!r}")

    size = state_count(kind, n, N, M, total_cap)
    if size > capacity:
        raise CapacityError(f"{kind} space has {size} states, above the cap of {capacity}")

    if kind == BINARY:
        rows = _vectors(n, 1, N, N)
    elif kind == COMPOSITION:
        rows = _vectors(n, N, N, N)
    else:
        hi = n * M if total_cap is None else min(total_cap, n * M)
        rows = _vectors(n, M, 0, hi)
    configs = np.array(list(rows), dtype=np.int64).reshape(size, n)
    return StateSpace(configs, kind, N=N, M=M, total_cap=total_cap, site_set=sites)


def apply_exchange(eta: Sequence[int], x: int, z: int) -> tuple:
    """Swap the occupations at ``x`` and ``z``."""
    if x == z:
        raise InvalidMoveError("exchange needs two distinct sites")
    out = list(eta)
    out[x], out[z] = out[z], out[x]
    return tuple(out)


def apply_move(eta: Sequence[int], x: int, z: int) -> tuple:
    """Move one particle from ``x`` to ``z``; identity if ``x == z`` or ``x`` is empty."""
    if x == z or eta[x] == 0:
        return tuple(eta)
    out = list(eta)
    out[x] -= 1
    out[z] += 1
    return tuple(out)


def apply_birth(eta: Sequence[int], x: int, M: int):
    """Add a particle at ``x``; returns :data:`SATURATED` when ``eta[x] == M``."""
    if eta[x] >= M:
        return SATURATED
    out = list(eta)
    out[x] += 1
    return tuple(out)


def apply_death(eta: Sequence[int], x: int) -> tuple:
    """Remove a particle from ``x`` if there is one."""
    if eta[x] == 0:
        return tuple(eta)
    out = list(eta)
    out[x] -= 1
    return tuple(out)
