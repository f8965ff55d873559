import itertools

import numpy as np
import pytest

from gaplab import generators as G
from gaplab.potentials import LatticePotential, OccupationPairPotential, QuadraticEnergy, RadialPairPotential
from gaplab.statespace import SiteSet


def naive_dense_generator(states, weight, transitions):
    """Dense generator matrix built state by state from python dicts.

    ``states`` is a list of tuples, ``weight(eta)`` an unnormalised Gibbs
    weight and ``transitions(eta)`` yields (target, rate) pairs.  Shares no
    code with the vectorised builders.
    """
    pos = {s: i for i, s in enumerate(states)}
    S = len(states)
    L = np.zeros((S, S))
    for i, s in enumerate(states):
        for t, rate in transitions(s):
            if t == s or rate == 0:
                continue
            L[i, pos[t]] += rate
        L[i, i] = -L[i].sum()
    w = np.array([weight(s) for s in states], dtype=float)
    return L, w / w.sum()


def dense_gap(L, nu):
    s = np.sqrt(nu)
    A = -(s[:, None] * L / s[None, :])
    vals = np.linalg.eigvalsh(0.5 * (A + A.T))
    return float(np.sort(vals)[1])


@pytest.fixture(scope="session")
def kawasaki_63():
    ss = SiteSet.segment(6)
    return G.build_kawasaki_complete(ss, LatticePotential.nn_pair(ss, 0.1), 0.1, 3)


@pytest.fixture(scope="session")
def kawasaki_nn_63():
    ss = SiteSet.segment(6)
    return G.build_kawasaki_nn(ss, LatticePotential.nn_pair(ss, 0.1), 0.1, 3)


@pytest.fixture(scope="session")
def zero_range_torus():
    ts = SiteSet.torus(4, 1)
    return G.build_zero_range(ts, lambda k: float(k), QuadraticEnergy.torus_model(ts, 0.1, 0.5), 4)


@pytest.fixture(scope="session")
def zero_range_free():
    return G.build_zero_range(SiteSet.labels(4), lambda k: float(k), QuadraticEnergy.zero(4), 4)


@pytest.fixture(scope="session")
def glauber_segment():
    return G.build_glauber_discrete(SiteSet.segment(3), 0.5, OccupationPairPotential.nearest_neighbour(0.2),
                                    1.0, 6)


@pytest.fixture(scope="session")
def continuum_kawasaki():
    return G.build_continuum_kawasaki_discretized([1.0], RadialPairPotential.indicator(1.0, 0.25), 0.1, 2, 1 / 8)


@pytest.fixture(scope="session")
def continuum_glauber():
    return G.build_continuum_glauber_discretized([1.0], RadialPairPotential.indicator(1.0, 0.25), 0.1, 0.5,
                                                 1 / 4, 3)


@pytest.fixture(scope="session")
def families(kawasaki_63, zero_range_torus, glauber_segment, continuum_kawasaki, continuum_glauber):
    return {"kawasaki": kawasaki_63, "zero-range": zero_range_torus, "glauber": glauber_segment,
            "continuum-kawasaki": continuum_kawasaki, "continuum-glauber": continuum_glauber}


def binary_states(n, N):
    return [tuple(int(i in c) for i in range(n)) for c in itertools.combinations(range(n), N)]
