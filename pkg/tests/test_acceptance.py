"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Thresholds are the stated ones; nothing here is tuned to make a run green.
"""

import json
import math
import time

import numpy as np
import pytest

from preimage_gibbs import (Character, Cylinder, LatticeMap, LocallyConstantPotential, MarkovOracle,
                            ShiftPoint, ShiftSystem, TestDictionary, TorusPoint, TrigPolynomial, TrigPotential,
                            build_tree, fixed_point_count, lifted_cylinder_measure)
from preimage_gibbs.cli import run
from preimage_gibbs.estimators import (SamplerSpec, l1_convergence_report, periodic_point_measure,
                                       sample_points, weighted_preimage_measure)
from preimage_gibbs.shift import anchored_words
from preimage_gibbs.torus import (exact_forward_array, exact_preimage_step, float_preimage_step,
                                  random_rational_points, torus_distance)

pytestmark = pytest.mark.acceptance

BETA = math.log(3)
FOLDED = ((0, -2), (1, 4))
CAT = ((2, 1), (1, 1))


def cylinder_dictionary(S, L):
    return TestDictionary.cylinder_indicators(
        [tuple(int(a) for a in w) for n in range(1, L + 1) for w in S.legal_words(n)])


def test_1_shift_oracle_convergence(verdict):
    t0 = time.perf_counter()
    S = ShiftSystem.full(2)
    phi = LocallyConstantPotential.symbol_weight(2, BETA)
    oracle = MarkovOracle(S, phi)
    d = cylinder_dictionary(S, 4)

    def dist(x, n):
        tree = build_tree(S, phi, x, n, width=4)
        est = tree.expectations(d.functions)
        return float(np.max(np.abs(est - oracle.expectations(d.functions))))

    d14 = dist(ShiftPoint.parse("", "0"), 14)
    drops = []
    for seed in range(10):
        (x,) = sample_points(S, phi, SamplerSpec("periodic", 14), 1, np.random.default_rng(seed))
        drops.append(dist(x, 14) < dist(x, 6))
    elapsed = time.perf_counter() - t0
    ok = d14 < 0.02 and all(drops) and elapsed < 60
    verdict(1, ok, f"d(mu_14 at 0^inf, oracle; L=4) = {d14:.4f} (need < 0.02); "
                   f"d(14) < d(6) for {sum(drops)}/10 seeds; {elapsed:.1f}s")
    assert ok


def test_2_exact_leaf_identity(verdict):
    S = ShiftSystem.full(2)
    worst = 0.0
    for phi in (LocallyConstantPotential.symbol_weight(2, BETA),
                LocallyConstantPotential.from_table(2, 1, {"0": -0.4, "1": 1.7})):
        oracle = MarkovOracle(S, phi)
        for x in (ShiftPoint.parse("", "0"), ShiftPoint.parse("1", "01")):
            for n in range(1, 13):
                tree = build_tree(S, phi, x, n)
                words = tree.words(n)
                ref = np.array([oracle.cylinder_measure(w) for w in words])
                worst = max(worst, float(np.abs(tree.leaf_weights() - ref).max()))
    ok = worst < 1e-9
    verdict(2, ok, f"max |leaf weight - mu[w]| over n <= 12 = {worst:.2e} (need < 1e-9)")
    assert ok


def test_3_fixed_point_counts(verdict):
    from preimage_gibbs import fixed_points
    got = {}
    for A, want in ((CAT, [1, 5, 16, 45]), (FOLDED, [1, 7, 31, 119])):
        f = LatticeMap(A)
        got[A] = ([len(fixed_points(f, n)) for n in range(1, 5)], [fixed_point_count(f, n) for n in range(1, 5)],
                  want)
    ok = all(a == b == c for a, b, c in got.values())
    verdict(3, ok, "; ".join(f"A={[list(r) for r in A]}: enumerated {a}, |det(A^n-I)| {b}"
                             for A, (a, b, _) in got.items()))
    assert ok


def test_4_pressure_convergence(verdict):
    t0 = time.perf_counter()
    f = LatticeMap(FOLDED)
    torus_err = abs(math.log(fixed_point_count(f, 10)) / 10 - math.log(2 + math.sqrt(2)))
    G = ShiftSystem.golden_mean()
    shift_err = abs(math.log(G.periodic_count(20)) / 20 - math.log((1 + math.sqrt(5)) / 2))
    # the enumerated Fix(sigma^20) agrees with tr(M^20)
    enumerated = len(G.periodic_words(20)) == G.periodic_count(20)
    elapsed = time.perf_counter() - t0
    ok = torus_err < 0.05 and shift_err < 0.02 and enumerated and elapsed < 30
    verdict(4, ok, f"torus n=10 error {torus_err:.4f} (need < 0.05); golden n=20 error {shift_err:.2e} "
                   f"(need < 0.02); {elapsed:.1f}s")
    assert ok


def test_5_inverse_srb_toward_haar(verdict):
    t0 = time.perf_counter()
    f = LatticeMap(FOLDED)
    phi = TrigPotential(0.0)
    ks = [k for k in np.ndindex(7, 7)]
    ks = [(a - 3, b - 3) for a, b in ks if (a - 3, b - 3) > (0, 0)]  # half space; |c(-k)| = |c(k)|
    funcs = [g for k in ks for g in (Character(k, "cos"), Character(k, "sin"))]
    xs = random_rational_points(np.random.default_rng(2024), 2, 20, 10**6)

    def mean_max(n):
        vals = []
        for x in xs:
            e = build_tree(f, phi, x, n).expectations(funcs).reshape(-1, 2)
            vals.append(float(np.hypot(e[:, 0], e[:, 1]).max()))
        return float(np.mean(vals))

    m8, m16 = mean_max(8), mean_max(16)
    elapsed = time.perf_counter() - t0
    ok = m16 < 0.1 and m16 < m8 and elapsed < 120
    verdict(5, ok, f"mean max|c_k| at n=16 = {m16:.4f} (need < 0.1), at n=8 = {m8:.4f}; {elapsed:.1f}s")
    assert ok


def test_6_l1_statistic_decreases(verdict):
    parts = []
    cases = [
        (LatticeMap(FOLDED), TrigPotential(0.0), [Character((1, 0)), Character((2, 0))]),
        (ShiftSystem.full(2), LocallyConstantPotential.symbol_weight(2, BETA), [Cylinder("01"), Cylinder("11")]),
    ]
    ok = True
    for system, phi, funcs in cases:
        for rep in l1_convergence_report(system, phi, funcs, [6, 14], 50, seed=17):
            s6, s14 = rep.statistics
            ok &= s14 < s6
            parts.append(f"{rep.test_function_id}: {s6:.4f} -> {s14:.4f}")
    verdict(6, ok, "stat(6) -> stat(14), N=50: " + "; ".join(parts))
    assert ok


def test_7_cylinder_lift(verdict):
    worst, count = 0.0, 0
    for S in (ShiftSystem.full(2), ShiftSystem.golden_mean()):
        for phi in (LocallyConstantPotential.zero(2), LocallyConstantPotential.symbol_weight(2, BETA)):
            O = MarkovOracle(S, phi)
            for past, future in anchored_words(S, 3, 3):
                res = lifted_cylinder_measure(O, past, future, extra_depth=3)
                worst = max(worst, res.difference)
                count += 1
    ok = worst < 1e-12
    verdict(7, ok, f"max |limit - direct| over {count} anchored cylinders = {worst:.2e} (need < 1e-12)")
    assert ok


def test_8_invariance_suite(verdict, tmp_path):
    checks = {}
    # potential-shift invariance, atom for atom
    lc = LocallyConstantPotential.from_table(2, 2, {"01": 0.7, "10": -0.4, "11": 0.2})
    trig = TrigPotential(0.1, ((1, 0), (1, 1)), (0.5, -0.3), (0.2, 0.0))
    worst = 0.0
    for system, phi, x, n in [(ShiftSystem.full(2), lc, ShiftPoint.parse("", "10"), 10),
                              (ShiftSystem.golden_mean(), lc, ShiftPoint.parse("", "0"), 12),
                              (LatticeMap(FOLDED), trig, TorusPoint.of("1/3", "3/7"), 8)]:
        for c in (-5.0, 2.5, 40.0):
            mu = weighted_preimage_measure(system, phi, x, n)
            nu = weighted_preimage_measure(system, phi.shifted(c), x, n)
            same = mu.points() == nu.points()
            worst = max(worst, float(np.abs(mu.weights - nu.weights).max()) if same else math.inf)
    checks["shift invariance"] = worst < 1e-12

    # mass conservation on every estimator output
    masses = []
    for system, phi, x in [(ShiftSystem.full(2), lc, ShiftPoint.parse("", "0")),
                           (ShiftSystem.golden_mean(), lc, ShiftPoint.parse("", "10")),
                           (LatticeMap(FOLDED), trig, TorusPoint.of("1/5", "1/2")),
                           (LatticeMap(CAT), trig, TorusPoint.of("1/5", "1/2"))]:
        for n in (1, 4, 7):
            masses.append(weighted_preimage_measure(system, phi, x, n).total_mass)
            masses.append(periodic_point_measure(system, phi, n).total_mass)
    checks["mass"] = max(abs(m - 1) for m in masses) < 1e-12

    # preimage/forward round trip, 1000 random points per system
    rng = np.random.default_rng(99)
    rt = True
    for A in (CAT, FOLDED, ((2, 0), (0, 3))):
        f = LatticeMap(A)
        num = rng.integers(0, 10**6, size=(1000, 2))
        parent, child, den = exact_preimage_step(f, num, 10**6)
        rt &= bool(np.array_equal(exact_forward_array(f, child, den), (num[parent] * f.degree) % den))
    pf = LatticeMap(FOLDED, TrigPolynomial(((1, 0), (0, 1)), ((0.5, 0.2), (0.1, -0.3))), 0.01)
    xs = rng.random((1000, 2))
    parent, y = float_preimage_step(pf, xs)
    rt &= bool(torus_distance(pf.lift(y) % 1.0, xs[parent]).max() < 1e-10)
    checks["round trip"] = rt

    # --threads 1 vs 4
    cfgs = [{"kind": "mu-n", "system": {"type": "shift", "adjacency": [[1, 1], [1, 1]]},
             "potential": {"type": "symbol", "beta": BETA}, "depths": [6, 12]},
            {"kind": "mu-n", "system": {"type": "torus", "matrix": [list(r) for r in FOLDED]},
             "potential": {"type": "trig", "terms": [{"frequency": [1, 0], "cos": 0.5}]},
             "depths": [5, 10], "point": ["1/3", "3/7"], "sampler": {"depth": 8}},
            {"kind": "l1-stat", "system": {"type": "shift", "adjacency": [[1, 1], [1, 0]]},
             "depths": [4, 8], "samples": 6, "seed": 1}]
    det_ok = True
    for i, cfg in enumerate(cfgs):
        outs = []
        for threads in (1, 4):
            out = tmp_path / f"{i}-{threads}"
            assert run({**cfg, "threads": threads}, out) == 0
            outs.append([(out / name).read_bytes() for name in json.loads((out / "manifest.json").read_text())
                         ["outputs"]])
        det_ok &= outs[0] == outs[1]
    checks["threads"] = det_ok

    ok = all(checks.values())
    verdict(8, ok, ", ".join(f"{k}: {'ok' if v else 'BROKEN'}" for k, v in checks.items())
            + f" (shift-invariance max diff {worst:.1e})")
    assert ok
