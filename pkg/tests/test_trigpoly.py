import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apkit.trigpoly import TrigPolynomial, canonical_freq, lattice_box, periodic_nodes


def naive_eval(P, t):
    """Term-by-term summation with cmath."""
    total = [0j] * P.d
    for freq, coef in P.terms.items():
        phase = cmath.exp(1j * sum(f * x for f, x in zip(freq, t)))
        for j in range(P.d):
            total[j] += complex(coef[j]) * phase
    return total


def random_poly(rng, n, terms, lattice=False, order=3):
    if lattice:
        freqs = rng.integers(-order, order + 1, size=(terms, n)).astype(float)
    else:
        freqs = rng.uniform(-5, 5, size=(terms, n))
    coefs = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    return TrigPolynomial(n, zip(map(tuple, freqs), coefs))


def test_constant_and_single_term():
    assert TrigPolynomial(2, {(0, 0): 5}).eval([1.3, -7.0])[0] == 5
    assert abs(TrigPolynomial(2, {(1, -1): 2}).eval([math.pi, 0])[0] + 2) <= 1e-15


def test_eval_matches_naive_oracle():
    rng = np.random.default_rng(7)
    P = random_poly(rng, 3, 6)
    pts = rng.uniform(-10, 10, size=(100, 3))
    vals = P(pts)[:, 0]
    for t, v in zip(pts, vals):
        assert abs(v - naive_eval(P, t)[0]) <= 1e-12


def test_vector_valued_eval():
    P = TrigPolynomial(1, {(1,): [1, 2j], (0,): [0.5, 0]}, d=2)
    t = [0.7]
    np.testing.assert_allclose(P.eval(t), naive_eval(P, t), atol=1e-15)


def test_canonical_form():
    P = TrigPolynomial(1, [((2,), 1.0), ((1,), 3.0), ((2,), -1.0), ((1 + 1e-14,), 1.0)])
    assert list(P.terms) == [(1.0,)]
    assert P.terms[(1.0,)][0] == 4.0
    assert canonical_freq([-0.0]) == (0.0,)
    assert len(TrigPolynomial.zero(2)) == 0


def test_multiply_by_zero():
    P = random_poly(np.random.default_rng(0), 2, 4)
    assert P.multiply(TrigPolynomial.zero(2)) == TrigPolynomial.zero(2)


def test_product_order_is_sum():
    rng = np.random.default_rng(3)
    P = TrigPolynomial.random_lattice(rng, 2, 2, real=False)
    Q = TrigPolynomial.random_lattice(rng, 2, 3, real=False)
    assert (P.lattice_order(), Q.lattice_order()) == (2, 3)
    assert (P * Q).lattice_order() == 5


def test_square_cosine_identity():
    P = TrigPolynomial(1, {(1,): 1, (-1,): 1})
    sq = P.multiply(P).scale(0.25)
    t = np.linspace(-10, 10, 201)[:, None]
    np.testing.assert_allclose(sq(t)[:, 0], (1 + np.cos(2 * t[:, 0])) / 2, atol=1e-12)


def test_multiply_vector_unsupported():
    P = TrigPolynomial(1, {(1,): [1, 1]}, d=2)
    with pytest.raises(NotImplementedError):
        P.multiply(P)


def test_wiener_norm():
    assert TrigPolynomial.zero(1).wiener_norm() == 0
    assert TrigPolynomial(1, {(1,): 3, (2,): -4}).wiener_norm() == 7


def test_wiener_submultiplicative_and_subadditive():
    rng = np.random.default_rng(11)
    for _ in range(20):
        P, Q = random_poly(rng, 2, 5), random_poly(rng, 2, 4)
        assert (P * Q).wiener_norm() <= P.wiener_norm() * Q.wiener_norm() + 1e-12
        assert (P + Q).wiener_norm() <= P.wiener_norm() + Q.wiener_norm() + 1e-12


def test_sup_norm_grid():
    assert TrigPolynomial(2, {(0, 0): 3 - 4j}).sup_norm_grid(5) == pytest.approx(5)
    assert TrigPolynomial(1, {(1,): 1}).sup_norm_grid(4) == pytest.approx(1)
    with pytest.raises(ValueError):
        TrigPolynomial(1, {(0.5,): 1}).sup_norm_grid(4)


def test_sup_norm_grid_below_dense_oracle():
    rng = np.random.default_rng(5)
    P = TrigPolynomial.random_lattice(rng, 1, 2, real=True)
    coarse = P.sup_norm_grid(64)
    dense_pts = periodic_nodes(4096)[:, None]
    dense = float(np.max(np.abs(P(dense_pts))))
    cap = (1 - 2 * 2 / 64) ** -0.5
    assert coarse <= dense + 1e-12
    assert dense <= cap * coarse


def test_tensor_values_match_pointwise():
    rng = np.random.default_rng(2)
    P = TrigPolynomial.random_lattice(rng, 2, 2, real=False)
    x = periodic_nodes(6)
    grid = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    np.testing.assert_allclose(P.tensor_values(x), P(grid)[..., 0], atol=1e-12)


def test_real_projection():
    rng = np.random.default_rng(4)
    P = TrigPolynomial.random_lattice(rng, 2, 2, real=True)
    for k, c in P.terms.items():
        mirror = P.terms[canonical_freq(-np.asarray(k))]
        assert np.allclose(mirror, np.conj(c))
    assert np.max(np.abs(P(rng.normal(size=(30, 2))).imag)) <= 1e-12


def test_lattice_order_absent_off_lattice():
    assert TrigPolynomial(1, {(math.sqrt(2),): 1}).lattice_order() is None
    assert TrigPolynomial.zero(1).lattice_order() == 0
    assert lattice_box(2, 1).shape == (9, 2)


def test_json_round_trip():
    P = TrigPolynomial(2, {(1, math.sqrt(2)): [1 + 2j, -0.5]}, d=2)
    assert TrigPolynomial.from_json(P.to_json()) == P
    doc = P.to_dict()
    assert doc["terms"][0]["freq"] == [1.0, math.sqrt(2)]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_ring_homomorphism(seed):
    rng = np.random.default_rng(seed)
    P, Q = random_poly(rng, 2, 4), random_poly(rng, 2, 3)
    pts = rng.uniform(-3, 3, size=(20, 2))
    np.testing.assert_allclose((P + Q)(pts), P(pts) + Q(pts), atol=1e-12)
    np.testing.assert_allclose((P * Q)(pts), P(pts) * Q(pts), atol=1e-11)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 3), st.integers(0, 3))
def test_order_subadditive(seed, a, b):
    rng = np.random.default_rng(seed)
    P = TrigPolynomial.random_lattice(rng, 2, a, real=False)
    Q = TrigPolynomial.random_lattice(rng, 2, b, real=False)
    assert (P * Q).lattice_order() <= a + b
