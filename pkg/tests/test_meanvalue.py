import math
from fractions import Fraction

import numpy as np
import pytest

from apkit.exprlang import function_from_source
from apkit.field import FieldFunction
from apkit.meanvalue import bohr_coefficient, default_nodes, mean_value, spectrum_scan
from apkit.trigpoly import TrigPolynomial


def test_constant_mean():
    est = mean_value(FieldFunction.constant(2.5 - 1j, 2), T_seq=(5, 10), nodes=41)
    assert abs(est.value[0] - (2.5 - 1j)) <= 1e-12
    assert est.gap <= 1e-12
    assert len(est.partials) == 2


def test_oscillatory_average():
    est = mean_value(function_from_source("cis(t1)", 1))
    assert abs(est.value[0]) <= 0.011
    for T, p in zip(est.T_seq, est.partials):
        assert abs(p[0] - math.sin(T) / T) <= 1e-5


def test_hs_mean_harmonic_oracle():
    half_h10 = float(sum(Fraction(1, 2 * k) for k in range(1, 11)))
    est = mean_value(function_from_source("hs(t1, 10)", 1), T_seq=(10_000, 20_000), nodes=200_001)
    assert abs(est.value[0].real - half_h10) <= 0.02 * half_h10


def test_orthogonality_2d():
    f = TrigPolynomial(2, {(1, 2): 3}).as_field()
    hit = bohr_coefficient(f, [1, 2], T_seq=(10, 20), nodes=401)
    assert abs(hit.value[0] - 3) <= 1e-9
    miss = bohr_coefficient(f, [0, 0], T_seq=(10, 20), nodes=401)
    assert abs(miss.value[0]) <= 3 / 20
    assert hit.frequency == [1.0, 2.0]


def test_coefficient_closed_form_per_T():
    f = function_from_source("2*cis(t1) + 0.5", 1)
    est = bohr_coefficient(f, [1.0])
    for T, p in zip(est.T_seq, est.partials):
        closed = 2 + 0.5 * math.sin(T) / T  # exact average of 2 + 0.5 e^{-it}
        assert abs(p[0] - closed) <= 1e-5
    assert abs(est.value[0] - 2) <= 0.5 / 100 + 1e-5


def test_spectrum_round_trip():
    P = TrigPolynomial(2, {(1, 0): 1.0, (0, math.sqrt(2)): -0.7j})
    decoys = [(0, 0), (2, 0), (0, 1), (1, 1), (-1, 0), (0.5, 0.5), (3, -1), (0, -math.sqrt(2)),
              (1.5, 0), (0, 2)]
    cands = [(1, 0), (0, math.sqrt(2))] + decoys
    est = spectrum_scan(P.as_field(), cands, 0.1)
    assert est.accepted == [0, 1]
    assert abs(est.coefficients[0][0] - 1.0) <= 0.02
    assert abs(est.coefficients[1][0] + 0.7j) <= 0.02


def test_spectrum_trivial_cases():
    zero = FieldFunction.constant(0.0, 1)
    assert spectrum_scan(zero, [[0.0], [1.0]], 0.1, T=10).accepted == []
    f = function_from_source("cis(t1)", 1)
    assert spectrum_scan(f, [[1.0]], 5.0, T=10).accepted == []
    with pytest.raises(ValueError):
        spectrum_scan(f, [[1.0]], 0.0)
    with pytest.raises(ValueError):
        spectrum_scan(f, np.zeros((0, 1)), 0.1)


def test_validation():
    f = FieldFunction.constant(1.0, 1)
    with pytest.raises(ValueError):
        mean_value(f, T_seq=(10,))
    with pytest.raises(ValueError):
        mean_value(f, T_seq=(10, 5))


def test_default_nodes_budget():
    assert default_nodes(100, 1) == 12801
    assert default_nodes(100, 2) == 2000
    assert default_nodes(100, 3) ** 3 <= 4_000_000


def test_center_independence_bound():
    rng = np.random.default_rng(9)
    for _ in range(5):
        freqs = rng.integers(-3, 4, size=(4, 2)).astype(float) + rng.uniform(-0.2, 0.2, size=(4, 2))
        coefs = rng.normal(size=4) + 1j * rng.normal(size=4)
        P = TrigPolynomial(2, zip(map(tuple, freqs), coefs))
        T = 50.0
        a = mean_value(P.as_field(), [0, 0], (25, T), nodes=1001).value[0]
        b = mean_value(P.as_field(), [37.0, -12.5], (25, T), nodes=1001).value[0]
        C = 2 * sum(abs(c[0]) / np.max(np.abs(lam)) for lam, c in zip(P.frequencies, P.coefficients)
                    if np.any(lam))
        assert abs(a - b) <= C / T + 1e-6


def test_linearity():
    f = function_from_source("cis(2*t1) + sin(t1)", 1)
    g = function_from_source("cos(sqrt(3)*t1)", 1)
    h = FieldFunction(1, 1, lambda p: 2 * f(p) - 3j * g(p))
    lam = [1.0]
    kw = dict(T_seq=(20, 40), nodes=4001)
    lhs = bohr_coefficient(h, lam, **kw).value[0]
    rhs = 2 * bohr_coefficient(f, lam, **kw).value[0] - 3j * bohr_coefficient(g, lam, **kw).value[0]
    assert abs(lhs - rhs) <= 1e-12


def test_trig_poly_coefficients_within_tail_bound():
    rng = np.random.default_rng(1)
    freqs = [(-2.0,), (-0.5,), (0.7,), (1.9,)]
    coefs = rng.normal(size=4) + 1j * rng.normal(size=4)
    P = TrigPolynomial(1, zip(freqs, coefs))
    T = 100.0
    est = spectrum_scan(P.as_field(), [f for f in freqs], 1e-9, T=T)
    wn = P.wiener_norm()
    for lam, c, got in zip(freqs, coefs, est.coefficients):
        sep = min(abs(lam[0] - mu[0]) for mu in freqs if mu != lam)
        assert abs(got[0] - c) <= wn / (T * sep)
