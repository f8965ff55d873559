"""Acceptance criteria 1-10.

Each check returns (passed, detail) and the test prints one PASS/FAIL line
per criterion, so ``pytest -v`` output doubles as the acceptance report.
Run ``python3 tests/test_acceptance.py`` for the report alone.
"""

import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from gaplab import bochner as B
from gaplab import bounds as BD
from gaplab import cli
from gaplab import generators as G
from gaplab import spectral as S
from gaplab.config import load_config
from gaplab.potentials import LatticePotential, OccupationPairPotential, QuadraticEnergy, RadialPairPotential
from gaplab.statespace import SiteSet

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# tolerances and runtime budgets (seconds) fixed by the acceptance criteria
GAP_ONE_TOL = 1e-9
ORDER_TOL = 1e-8
IDENTITY_TOL = 1e-10
AXIOM_TOL = 1e-11
BE_TOL = 1e-8
TEOM_TOL = 1e-10
GLAUBER_LIMIT_TOL = 1e-6
TRUNCATION_SLACK = 1e-4
QUAD_TOL = 1e-10
RIEMANN_TOL = 1e-8
BAND_RATIO = 4.0
DETERMINISM_TOL = 1e-12
BUDGET = {1: 10, 2: 30, 3: 120, 4: 60, 5: 60, 6: 60, 7: 10, 8: 300, 9: 120, 10: 300}


def five_families():
    """One instance per model family, each at most 2,000 states."""
    seg = SiteSet.segment(6)
    ring = SiteSet.torus(4)
    phi = RadialPairPotential.indicator(1.0, 0.25)
    return {
        "kawasaki": G.build_kawasaki_complete(seg, LatticePotential.nn_pair(seg, 0.1), 0.1, 3),
        "zero-range": G.build_zero_range(ring, lambda k: float(k), QuadraticEnergy.torus_model(ring, 0.1, 0.5), 4),
        "glauber": G.build_glauber_discrete(SiteSet.segment(3), 0.5, OccupationPairPotential.nearest_neighbour(0.2),
                                            1.0, 6),
        "continuum-kawasaki": G.build_continuum_kawasaki_discretized([1.0], phi, 0.1, 2, 1 / 8),
        "continuum-glauber": G.build_continuum_glauber_discretized([1.0], phi, 0.1, 0.5, 1 / 4, 3),
    }


def criterion_1():
    worst = 0.0
    for n in range(2, 9):
        for N in range(1, n):
            gen = G.build_kawasaki_complete(SiteSet.labels(n), LatticePotential(), 0.0, N)
            worst = max(worst, abs(S.spectral_gap(gen).gap - 1.0))
    return worst <= GAP_ONE_TOL, f"worst |gap - 1| = {worst:.2e} over n <= 8, 1 <= N <= n-1"


def criterion_2():
    seg = SiteSet.segment(6)
    pot = LatticePotential.nn_pair(seg, 0.1)
    norm, triple = pot.norms()
    ok, parts = True, []
    for beta in (0.01, 0.05, 0.1):
        gen = G.build_kawasaki_complete(seg, pot, beta, 3)
        gap = S.spectral_gap(gen).gap
        two_k_star = B.certified_k(gen, B.r_kawasaki(gen)).gap_bound
        closed = BD.kawasaki_bound(beta, norm, triple).value
        ok &= closed <= two_k_star + ORDER_TOL and two_k_star <= gap + ORDER_TOL
        if beta == 0.01:
            ok &= closed > 0
        parts.append(f"beta={beta}: {closed:.5f} <= {two_k_star:.5f} <= {gap:.5f}")
    return ok, "; ".join(parts)


def criterion_3():
    worst_id, worst_ax = 0.0, 0.0
    for name, gen in five_families().items():
        rk = B.rkernel_for(gen)
        F = B.random_functions(gen.size, 100, seed=0)
        lem = max(r.rel_error for r in B.check_bochner_identity(gen, rk, F, 0))
        cor = max(r.rel_error for r in B.check_corollary1(gen, rk, F, 0))
        ax = B.verify_axioms(gen, rk, n_random_F=200, seed=0)
        worst_id = max(worst_id, lem, cor)
        worst_ax = max(worst_ax, ax.a3, ax.a4)
    ok = worst_id <= IDENTITY_TOL and worst_ax <= AXIOM_TOL
    return ok, f"identities {worst_id:.1e} (tol {IDENTITY_TOL:.0e}), A3/A4 {worst_ax:.1e} (tol {AXIOM_TOL:.0e})"


def criterion_4():
    worst_v, worst_e = -np.inf, 0.0
    for name, gen in five_families().items():
        be = S.bakry_emery_check(gen, S.spectral_gap(gen), n_random_f=100, seed=0)
        worst_v = max(worst_v, be.max_violation)
        worst_e = max(worst_e, be.eigvec_defect)
    ok = worst_v <= BE_TOL and worst_e <= BE_TOL
    return ok, f"max scaled violation {worst_v:.2e}, eigenvector defect {worst_e:.1e}"


def criterion_5():
    free = G.build_zero_range(SiteSet.labels(4), lambda k: float(k), QuadraticEnergy.zero(4), 4)
    gap0 = S.spectral_gap(free).gap
    teom0 = B.m_matrix_bound(free).teom_delta
    ok1 = teom0 >= 1 - TEOM_TOL and gap0 >= 1 - TEOM_TOL

    ring = SiteSet.torus(4)
    quad = G.build_zero_range(ring, lambda k: float(k), QuadraticEnergy.torus_model(ring, 0.1, 0.5), 4)
    gap = S.spectral_gap(quad).gap
    jj = math.exp(0.5) * (1 - math.exp(-0.5) - 2 * (1 - math.exp(-0.05)))
    reps = {b.name: b.value for b in BD.zero_range_bounds(quad)}
    ok2 = gap >= jj and reps["jjbound"] == pytest.approx(jj, rel=1e-14)
    mb = B.m_matrix_bound(quad)
    chain = [reps["jjbound"], reps["jbound"], mb.cobound_value, mb.teom_delta, gap]
    ok3 = all(a <= b + ORDER_TOL for a, b in zip(chain, chain[1:]))
    return ok1 and ok2 and ok3, (f"(i) teom {teom0:.12f}, gap {gap0:.12f}; (ii) gap {gap:.5f} >= {jj:.5f}; "
                                 f"(iii) chain {' <= '.join(f'{v:.5f}' for v in chain)}")


def criterion_6():
    gaps = [S.spectral_gap(G.build_glauber_discrete(SiteSet.segment(1), 1.0, OccupationPairPotential(), 0.0, M)).gap
            for M in (4, 8, 12, 16)]
    ok1 = all(a >= b for a, b in zip(gaps, gaps[1:])) and abs(gaps[-1] - 1) <= GLAUBER_LIMIT_TOL
    kappa, beta, lam = 0.1, 0.5, 1.0
    pot = OccupationPairPotential.nearest_neighbour(kappa)
    gen = G.build_glauber_discrete(SiteSet.segment(2), lam, pot, beta, 12)
    gap2 = S.spectral_gap(gen).gap
    bound = 1 - lam * 2 * (1 - math.exp(-beta * kappa))
    ok2 = gap2 >= bound - TRUNCATION_SLACK
    return ok1 and ok2, (f"gap(M) = {', '.join(f'{g:.10f}' for g in gaps)}; "
                         f"two sites gap {gap2:.5f} >= {bound:.5f} - {TRUNCATION_SLACK:.0e}")


def criterion_7():
    beta, theta, R = 0.7, 1.3, 0.4
    errs = []
    for d in (1, 2):
        ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * R ** d
        val = BD.continuum_eps(BD.QuadratureSpec(d, RadialPairPotential.indicator(theta, R)), beta)
        errs.append(abs(val - ball * (1 - math.exp(-beta * theta))))
    A, ell = 1.7, 0.35
    eps = BD.continuum_eps(BD.QuadratureSpec(1, RadialPairPotential.exponential(A, ell)), beta)
    h = 1e-4
    r = (np.arange(int(40 * ell / h)) + 0.5) * h
    riemann = 2 * h * float((-np.expm1(-beta * A * np.exp(-r / ell))).sum())
    ok = max(errs) <= QUAD_TOL and abs(eps - riemann) <= RIEMANN_TOL
    return ok, f"indicator errors {max(errs):.1e} (tol {QUAD_TOL:.0e}); exponential vs Riemann {abs(eps - riemann):.1e}"


def criterion_8():
    phi = RadialPairPotential.indicator(1.0, 0.25)
    beta, z, cap = 0.1, 0.25, 3
    eps = BD.continuum_eps(BD.QuadratureSpec(1, phi), beta)
    corre = 1 - 3 * eps
    glac = 1 - z * eps
    ok, slacks_k, slacks_g, parts = True, [], [], []
    for h in (1 / 4, 1 / 8, 1 / 16):
        eps_h = BD.discrete_eps(phi, beta, h, 1)
        gk = S.spectral_gap(G.build_continuum_kawasaki_discretized([1.0], phi, beta, 2, h)).gap
        gg = S.spectral_gap(G.build_continuum_glauber_discretized([1.0], phi, beta, z, h, cap, total_cap=cap)).gap
        sk = BD.discretization_slack(2, 1.0, eps, eps_h)
        sg = z * abs(eps_h - eps)
        ok &= gk >= corre - sk and gg >= glac - sg
        slacks_k.append(sk)
        slacks_g.append(sg)
        parts.append(f"h=1/{round(1 / h)}: {gk:.4f} vs {corre:.4f}-{sk:.4f}, {gg:.4f} vs {glac:.4f}-{sg:.4f}")
    ok &= all(a > b for a, b in zip(slacks_k, slacks_k[1:])) and all(a > b for a, b in zip(slacks_g, slacks_g[1:]))
    return ok, "; ".join(parts)


def criterion_9():
    vals = []
    for L in range(4, 13):
        gen = G.build_kawasaki_nn(SiteSet.segment(L), LatticePotential(), 0.0, L // 2)
        vals.append(S.spectral_gap(gen).gap * L * L)
    c1, c2 = min(vals), max(vals)
    return c1 > 0 and c2 / c1 <= BAND_RATIO, f"gap*L^2 in [{c1:.4f}, {c2:.4f}], ratio {c2 / c1:.3f}"


def _strip(line):
    rec = json.loads(line)
    rec.pop("timings")
    return rec


def _max_diff(a, b, path=""):
    if isinstance(a, dict):
        assert a.keys() == b.keys(), path
        return max([_max_diff(a[k], b[k], f"{path}.{k}") for k in a] or [0.0])
    if isinstance(a, list):
        assert len(a) == len(b), path
        return max([_max_diff(x, y, path) for x, y in zip(a, b)] or [0.0])
    if isinstance(a, (int, float)) and not isinstance(a, bool):
        return abs(float(a) - float(b))
    assert a == b, path
    return 0.0


def criterion_10():
    runs = [("verify", "kawasaki_verify"), ("gap", "kawasaki_verify"), ("gap", "zero_range_quadratic"),
            ("sweep", "glauber_cap_sweep"), ("sweep", "continuum_kawasaki_h"), ("scaling", "kawasaki_nn_scaling")]
    worst, identical = 0.0, True
    with tempfile.TemporaryDirectory() as tmp:
        for k, (task, name) in enumerate(runs):
            cfg = load_config(CONFIGS / f"{name}.toml")
            outs = [Path(tmp) / f"{k}-a", Path(tmp) / f"{k}-b"]
            for out in outs:
                cli.execute(task, cfg, out, figures=False)
            cli.execute(task, cfg, outs[0], figures=False)  # rerun served from the cache
            lines_a = (outs[0] / "records.jsonl").read_text().splitlines()
            lines_b = (outs[1] / "records.jsonl").read_text().splitlines()
            half = len(lines_a) // 2
            fresh_a, cached_a = lines_a[:half], lines_a[half:]
            for la, lb, lc in zip(fresh_a, lines_b, cached_a):
                ra, rb, rc = _strip(la), _strip(lb), _strip(lc)
                identical &= json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)
                worst = max(worst, _max_diff(ra, rb), _max_diff(ra, rc))
    return worst <= DETERMINISM_TOL and identical, (f"max numeric difference {worst:.1e} over fresh and cached reruns; "
                                                    f"records identical modulo timings: {identical}")


CRITERIA = {1: ("beta=0 Kawasaki exactness", criterion_1), 2: ("Kawasaki bound chain", criterion_2),
            3: ("Bochner identity suite", criterion_3), 4: ("Bakry-Emery characterisation", criterion_4),
            5: ("zero-range bounds", criterion_5), 6: ("discrete Glauber", criterion_6),
            7: ("continuum quadrature", criterion_7), 8: ("continuum bounds vs discretisation", criterion_8),
            9: ("diffusive scaling band", criterion_9), 10: ("determinism and cache", criterion_10)}


def run_criterion(k):
    title, fn = CRITERIA[k]
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    in_time = elapsed < BUDGET[k]
    line = (f"{'PASS' if ok and in_time else 'FAIL'} criterion {k} ({title}): {detail}; "
            f"{elapsed:.2f}s of {BUDGET[k]}s")
    return ok and in_time, line


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    ok, line = run_criterion(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(k) for k in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
