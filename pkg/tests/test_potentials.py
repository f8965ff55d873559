import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from gaplab import potentials as P
from gaplab.errors import DivergenceError, MissingBoundaryError
from gaplab.potentials import (LatticePotential, OccupationPairPotential, PotentialTerm, QuadraticEnergy,
                               RadialPairPotential, sphere_area)
from gaplab.statespace import SiteSet


def test_nn_pair_energy_and_norms():
    ss = SiteSet.segment(6)
    pot = LatticePotential.nn_pair(ss, 0.1)
    eta = (1, 1, 0, 1, 1, 1)
    # adjacent occupied pairs: (0,1), (3,4), (4,5)
    assert pot.energy(eta, ss) == pytest.approx(0.3, abs=1e-15)
    assert pot.norms() == pytest.approx((0.2, 0.4))
    assert pot.range == 1.0


@given(eta=st.lists(st.integers(0, 1), min_size=6, max_size=6), x=st.integers(0, 5), z=st.integers(0, 5))
@settings(max_examples=80, deadline=None)
def test_grad_exchange_is_energy_difference(eta, x, z):
    ss = SiteSet.segment(6).with_boundary({(-1,): 1})
    pot = LatticePotential.nn_pair(ss, 0.37)
    if x == z:
        return
    swapped = list(eta)
    swapped[x], swapped[z] = eta[z], eta[x]
    direct = pot.energy(swapped, ss) - pot.energy(eta, ss)
    assert pot.grad_exchange(eta, x, z, ss) == pytest.approx(direct, abs=1e-14)
    assert P.grad_exchange(pot, eta, x, z, ss) == pytest.approx(direct, abs=1e-14)


def test_boundary_terms():
    ss = SiteSet.segment(3).with_boundary({(-1,): 1, (3,): 0})
    pot = LatticePotential.nn_pair(ss, 1.0)
    assert pot.energy((1, 0, 0), ss) == 1.0  # interacts with the occupied left boundary
    assert pot.energy((0, 0, 1), ss) == 0.0


def test_missing_boundary_raises():
    ss = SiteSet.segment(3)
    pot = LatticePotential((PotentialTerm(((2,), (3,)), np.array([[0, 0], [0, 1.0]])),))
    with pytest.raises(MissingBoundaryError):
        pot.energies(np.array([[0, 0, 1]]), ss)


def test_multibody_term_norms():
    table = np.zeros((2, 2, 2))
    table[1, 1, 1] = -0.5
    pot = LatticePotential((PotentialTerm(((0,), (1,), (2,)), table),
                            PotentialTerm(((0,), (1,)), np.array([[0, 0], [0, 0.2]]))))
    norm, triple = pot.norms()
    assert norm == pytest.approx(0.7)
    assert triple == pytest.approx(3 * 0.5 + 2 * 0.2)
    assert pot.range == pytest.approx(2.0)


@given(eta=st.lists(st.integers(0, 4), min_size=4, max_size=4), x=st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_quadratic_energy_gradients(eta, x):
    ts = SiteSet.torus(4)
    E = QuadraticEnergy.torus_model(ts, 0.3, 0.7)
    up = list(eta)
    up[x] += 1
    assert E.grad_birth(eta, x) == pytest.approx(E.energy(up) - E.energy(eta), abs=1e-12)
    if eta[x] > 0:
        down = list(eta)
        down[x] -= 1
        assert E.grad_death(eta, x) == pytest.approx(E.energy(down) - E.energy(eta), abs=1e-12)
        assert E.grad_death_all(np.array([eta]))[0, x] == pytest.approx(E.grad_death(eta, x), abs=1e-12)
    else:
        assert E.grad_death(eta, x) == 0.0


def test_quadratic_second_differences_are_twice_j():
    rng = np.random.default_rng(3)
    A = rng.uniform(0, 1, (3, 3))
    E = QuadraticEnergy(A + A.T)
    eta = np.array([2, 1, 3])
    e = np.eye(3, dtype=int)
    for x in range(3):
        for y in range(3):
            if x == y:
                continue
            mixed = (E.energy(eta + e[x] + e[y]) - E.energy(eta + e[x]) - E.energy(eta + e[y]) + E.energy(eta))
            assert mixed == pytest.approx(E.second_differences()[x, y], abs=1e-12)
    assert E.shape is None and not E.is_zero()
    assert QuadraticEnergy.zero(3).is_zero()
    with pytest.raises(ValueError):
        QuadraticEnergy(np.array([[0, 1.0], [0, 0]]))


def test_torus_model_layout():
    E = QuadraticEnergy.torus_model(SiteSet.torus(4), 0.1, 0.5)
    assert np.allclose(np.diag(E.J), 0.5)
    assert E.J[0, 1] == E.J[0, 3] == 0.05 and E.J[0, 2] == 0.0
    assert E.shape == ("torus", 1, 0.1, 0.5)


def test_radial_profiles():
    ind = RadialPairPotential.indicator(2.0, 0.5)
    assert list(ind([0.0, 0.5, 0.51])) == [2.0, 2.0, 0.0]
    assert ind.support_radius == 0.5 and ind.breakpoints == [0.5]
    ex = RadialPairPotential.exponential(1.5, 0.3)
    assert ex(0.6) == pytest.approx(1.5 * math.exp(-2))
    pw = RadialPairPotential.power(1.0, 1.0, 3.0)
    assert pw(1.0) == pytest.approx(1 / 8)
    tab = RadialPairPotential("tabulated", {"radii": [0.0, 1.0, 2.0], "values": [3.0, 1.0, 0.0]})
    assert tab(0.5) == pytest.approx(2.0) and tab(5.0) == 0.0
    assert tab.at([0.6, 0.8]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        RadialPairPotential("tabulated", {"radii": [0.5, 1.0], "values": [1.0, 0.0]})
    with pytest.raises(ValueError):
        RadialPairPotential.indicator(-1.0, 1.0)
    with pytest.raises(ValueError):
        RadialPairPotential("gaussian", {})


@pytest.mark.parametrize("d", [1, 2, 3])
def test_tail_bound_dominates_tail(d):
    beta = 0.8
    for phi in (RadialPairPotential.exponential(2.0, 0.5), RadialPairPotential.power(2.0, 0.5, d + 2.5)):
        R = 1.5
        f = lambda r: sphere_area(d) * r ** (d - 1) * -math.expm1(-beta * float(phi(r)))
        tail, _ = integrate.quad(f, R, np.inf)
        assert tail <= phi.tail_bound(beta, R, d) * (1 + 1e-12)
    assert RadialPairPotential.power(1.0, 1.0, d).tail_bound(1.0, 2.0, d) == math.inf
    with pytest.raises(DivergenceError):
        RadialPairPotential("tabulated", {"radii": [0.0, 1.0], "values": [1.0, 1.0]}).tail_bound(1.0, 0.5, d)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_occupation_potential_validation_and_energy():
    with pytest.raises(ValueError):
        OccupationPairPotential({(1,): 0.2})  # not even
    with pytest.raises(ValueError):
        OccupationPairPotential({(0,): 0.2})
    with pytest.raises(ValueError):
        OccupationPairPotential({(1,): -0.2, (-1,): -0.2})
    pot = OccupationPairPotential.nearest_neighbour(0.25, d=2)
    assert len(pot.kernel) == 4 and pot.K((0, 1)) == 0.25
    ss = SiteSet.segment(3)
    p1 = OccupationPairPotential.nearest_neighbour(0.5, 1)
    # pairs (0,1) and (1,2): 0.5 * (2*1 + 1*3)
    assert p1.energy((2, 1, 3), ss) == pytest.approx(2.5)
    assert p1.grad_birth((2, 1, 3), 1, ss) == pytest.approx(0.5 * 5)
    assert p1.grad_death((2, 1, 3), 1, ss) == pytest.approx(-0.5 * 5)
    selfpot = OccupationPairPotential(p1.kernel, self_coupling=1.0)
    assert selfpot.energy((2, 0, 0), ss) == pytest.approx(1.0)


def test_general_table_matches_kernel_form():
    kern = OccupationPairPotential.nearest_neighbour(0.3)
    tab = OccupationPairPotential(table=lambda x, y, m, n: (0.3 if abs(x[0] - y[0]) == 1 else 0.0) * m * n)
    ss = SiteSet.segment(4).with_boundary({(4,): 2})
    configs = np.array([[0, 1, 2, 3], [3, 0, 0, 1], [1, 1, 1, 1]])
    assert np.allclose(kern.energies(configs, ss), tab.energies(configs, ss))


def test_from_radial_samples_cell_distances():
    phi = RadialPairPotential.indicator(1.0, 0.3)
    ss = SiteSet.box((4,))
    pot = OccupationPairPotential.from_radial(phi, ss, 0.25)
    assert pot.self_coupling == 1.0
    assert pot.K((1,)) == 1.0 and pot.K((2,)) == 0.0 and pot.K((-1,)) == 1.0


def test_dispatch_helpers():
    ss = SiteSet.segment(3)
    lat = LatticePotential.nn_pair(ss, 1.0)
    assert P.energy(lat, (1, 1, 0), ss) == 1.0
    E = QuadraticEnergy.zero(3)
    assert P.energy(E, (1, 2, 0)) == 0.0 and P.grad_birth(E, (1, 2, 0), 0) == 0.0
    assert P.norms(lat) == lat.norms()
