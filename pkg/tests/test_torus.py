import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from preimage_gibbs import (CertificationError, LatticeMap, MapClass, SingularMatrix, TorusPoint,
                            TrigPolynomial, classify, fixed_point_count, fixed_points, forward, preimages,
                            smith_normal_form)
from preimage_gibbs.torus import (adjugate, det, exact_forward_array, exact_preimage_step,
                                  fixed_point_arrays, matmul, torus_distance)

from conftest import CAT, DIAG, FOLDED

SYSTEMS = [CAT, FOLDED, DIAG]


def eig_count(A, n):
    """Independent oracle: prod |lambda_i^n - 1| from floating eigenvalues."""
    lam = np.linalg.eigvals(np.array(A, dtype=float))
    return round(float(np.prod(np.abs(lam ** n - 1))))


class TestClassify:
    @pytest.mark.parametrize("A,cls,h", [
        (CAT, MapClass.HYPERBOLIC_INVERTIBLE, math.log((3 + math.sqrt(5)) / 2)),
        (DIAG, MapClass.EXPANDING, math.log(6)),
        (FOLDED, MapClass.HYPERBOLIC_NONINVERTIBLE, math.log(2 + math.sqrt(2))),
        (((1, 1), (0, 1)), MapClass.NOT_HYPERBOLIC, 0.0),
        (((0, -1), (1, 0)), MapClass.NOT_HYPERBOLIC, 0.0),
    ])
    def test_examples(self, A, cls, h):
        rep = classify(A)
        assert rep.map_class is cls
        assert rep.entropy == pytest.approx(h, abs=1e-12)

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            classify(((1, 2), (2, 4)))

    def test_eigenvalue_order(self):
        ev = classify(FOLDED).eigenvalues
        assert abs(ev[0]) > abs(ev[1])
        assert ev[0].real == pytest.approx(2 + math.sqrt(2))


# ---------------------------------------------------------------------------
# integer linear algebra

int_mats = st.integers(2, 3).flatmap(
    lambda m: st.lists(st.lists(st.integers(-6, 6), min_size=m, max_size=m), min_size=m, max_size=m))


@settings(max_examples=150, deadline=None)
@given(int_mats)
def test_smith_normal_form(A):
    assume(det(A) != 0)
    s = smith_normal_form(A)
    assert matmul(matmul(s.U, s.D), s.V) == [list(r) for r in A]
    assert abs(det(s.U)) == 1 and abs(det(s.V)) == 1
    d = s.diagonal
    assert all(x > 0 for x in d)
    assert all(d[i + 1] % d[i] == 0 for i in range(len(d) - 1))
    assert all(s.D[i][j] == 0 for i in range(len(d)) for j in range(len(d)) if i != j)
    assert math.prod(d) == abs(det(A))


@settings(max_examples=60, deadline=None)
@given(int_mats)
def test_coset_representatives_are_distinct_classes(A):
    D = det(A)
    assume(D != 0 and abs(D) <= 200)
    reps = smith_normal_form(A).coset_representatives()
    assert len(reps) == abs(D)
    # r ~ r' iff adj(A) (r - r') = 0 mod det A
    adj = np.array(adjugate(A), dtype=np.int64)
    keys = {tuple((adj @ r) % abs(D)) for r in reps.astype(np.int64)}
    assert len(keys) == abs(D)


@settings(max_examples=60, deadline=None)
@given(int_mats)
def test_det_matches_numpy(A):
    assert det(A) == round(np.linalg.det(np.array(A, dtype=float)))


# ---------------------------------------------------------------------------
# preimages

class TestPreimages:
    def test_expanding_diagonal(self, diag_map):
        got = set(preimages(diag_map, TorusPoint.of(0, 0)))
        want = {TorusPoint.of(Fraction(i, 2), Fraction(j, 3)) for i in range(2) for j in range(3)}
        assert got == want

    def test_folded_origin(self, folded_map):
        got = set(preimages(folded_map, TorusPoint.of(0, 0)))
        assert got == {TorusPoint.of(0, 0), TorusPoint.of(0, "1/2")}

    def test_forward_exact(self, folded_map):
        assert forward(folded_map, TorusPoint.of("1/2", 0)) == TorusPoint.of(0, "1/2")

    def test_cat_map_is_invertible(self, cat_map):
        x = TorusPoint.of("2/7", "3/5")
        (y,) = preimages(cat_map, x)
        assert forward(cat_map, y) == x

    @pytest.mark.parametrize("A", SYSTEMS)
    def test_roundtrip_1000_random_points(self, A):
        f = LatticeMap(A)
        rng = np.random.default_rng(7)
        q = 997
        num = rng.integers(0, q, size=(1000, 2))
        parent, child, den = exact_preimage_step(f, num, q)
        d = f.degree
        assert len(child) == 1000 * d
        assert den == q * d
        # f(child) = x exactly: A child = num * d  (mod q d)
        img = exact_forward_array(f, child, den)
        assert np.array_equal(img, (num[parent] * d) % den)
        # siblings pairwise distinct
        sib = child.reshape(1000, d, 2)
        for a in range(d):
            for b in range(a + 1, d):
                assert np.all(np.any(sib[:, a] != sib[:, b], axis=1))

    @pytest.mark.parametrize("A", SYSTEMS)
    def test_float_matches_exact(self, A):
        f = LatticeMap(A)
        x = TorusPoint.of("3/11", "5/13")
        exact = np.array([p.as_float() for p in preimages(f, x)])
        approx = np.array([p.as_float() for p in preimages(f, TorusPoint(tuple(x.as_float())))])
        assert torus_distance(exact, approx).max() < 1e-12

    def test_dimension_mismatch(self, cat_map):
        with pytest.raises(ValueError):
            preimages(cat_map, TorusPoint.of(0, 0, 0))


# ---------------------------------------------------------------------------
# periodic points

class TestFixedPoints:
    @pytest.mark.parametrize("A,counts", [(CAT, [1, 5, 16, 45]), (FOLDED, [1, 7, 31, 119])])
    def test_counts(self, A, counts):
        f = LatticeMap(A)
        assert [fixed_point_count(f, n) for n in range(1, 5)] == counts
        assert [len(fixed_points(f, n)) for n in range(1, 5)] == counts

    @pytest.mark.parametrize("A,nmax", [(CAT, 10), (FOLDED, 10), (DIAG, 7)])
    def test_enumeration_matches_determinant(self, A, nmax):
        f = LatticeMap(A)
        for n in range(1, nmax + 1):
            num, den = fixed_point_arrays(f, n)
            assert len(num) == fixed_point_count(f, n) == eig_count(A, n)
            assert len(np.unique(num, axis=0)) == len(num)
            img = num
            for _ in range(n):
                img = exact_forward_array(f, img, den)
            assert np.array_equal(img, num % den)

    @pytest.mark.parametrize("A", [CAT, FOLDED, DIAG])
    def test_entropy_error_decreases(self, A):
        f = LatticeMap(A)
        errs = [abs(math.log(fixed_point_count(f, n)) / n - f.entropy) for n in (4, 6, 8, 10)]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_nesting(self, folded_map):
        fix2 = set(fixed_points(folded_map, 2))
        assert set(fixed_points(folded_map, 1)) <= fix2
        assert fix2 <= set(fixed_points(folded_map, 4))

    def test_not_hyperbolic(self):
        with pytest.raises(SingularMatrix):
            fixed_point_arrays(LatticeMap(((1, 1), (0, 1))), 1)


# ---------------------------------------------------------------------------
# perturbed maps

class TestPerturbed:
    def test_preimages_roundtrip(self, perturbed_folded):
        f = perturbed_folded
        rng = np.random.default_rng(3)
        for x in rng.random((50, 2)):
            pts = preimages(f, TorusPoint(tuple(x)))
            assert len(pts) == f.degree
            back = np.array([forward(f, p).as_float() for p in pts])
            assert torus_distance(back, x[None, :]).max() < 1e-10

    def test_branches_follow_linear_ones(self):
        p = TrigPolynomial(((1, 0), (0, 1)), ((0.5, 0.2), (0.1, -0.3)))
        x = TorusPoint.of(0.3, 0.7)
        lin = np.array([q.as_float() for q in preimages(LatticeMap(FOLDED), x)])
        prev = 0.0
        for eps in (1e-4, 1e-3, 1e-2):
            pert = np.array([q.as_float() for q in preimages(LatticeMap(FOLDED, p, eps), x)])
            dist = torus_distance(pert, lin).max()
            assert dist > prev
            assert dist < 10 * eps
            prev = dist

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 6])
    def test_fixed_points(self, perturbed_folded, n):
        f = perturbed_folded
        y, den = fixed_point_arrays(f, n)
        assert den is None
        assert len(y) == fixed_point_count(f, n)
        z = y
        for _ in range(n):
            z = f.lift(z)
        assert torus_distance(z % 1.0, y).max() < 1e-10

    def test_certification_failure(self):
        p = TrigPolynomial(((1, 0), (0, 1)), ((0.5, 0.2), (0.1, -0.3)))
        f = LatticeMap(FOLDED, p, 0.5)
        with pytest.raises(CertificationError):
            preimages(f, TorusPoint.of(0.1, 0.2))
        with pytest.raises(CertificationError):
            fixed_point_arrays(f, 2)

    def test_negative_epsilon(self):
        with pytest.raises(ValueError):
            LatticeMap(FOLDED, TrigPolynomial(((1, 0),), ((1.0, 0.0),)), -0.1)

    def test_jacobian_matches_finite_differences(self):
        p = TrigPolynomial(((1, 2), (0, 1)), ((0.5, 0.2), (0.1, -0.3)))
        y = np.array([[0.13, 0.77]])
        h = 1e-6
        fd = np.stack([(p(y + h * e) - p(y - h * e))[0] / (2 * h) for e in np.eye(2)], axis=1)
        assert np.allclose(p.jacobian(y)[0], fd, atol=1e-6)
        assert np.linalg.norm(p.jacobian(y)[0], 2) <= p.derivative_bound()
