"""Vallee-Poussin singular integrals and sampling bounds for trigonometric polynomials."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .field import BoxGrid, FieldFunction
from .trigpoly import TrigPolynomial, lattice_box, periodic_nodes


def wallis_ratio(k: int) -> float:
    """``(2k)!! / (2k-1)!!`` via log-gamma: ``4^k (k!)^2 / (2k)!``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return math.exp(k * math.log(4.0) + 2 * math.lgamma(k + 1) - math.lgamma(2 * k + 1))


def _periodic_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid rule on ``[-pi, pi]`` with both endpoints (exact for degree < nodes - 1)."""
    t = np.linspace(-np.pi, np.pi, nodes)
    w = np.full(nodes, 2 * np.pi / (nodes - 1))
    w[0] = w[-1] = w[0] / 2
    return t, w


def default_vp_nodes(k: int) -> int:
    return max(256, 4 * k + 1)


def vp_kernel(k: int, u: np.ndarray) -> np.ndarray:
    """Normalized kernel ``(1/2pi) (2k)!!/(2k-1)!! cos^{2k}(u/2)``."""
    return wallis_ratio(k) / (2 * np.pi) * np.cos(np.asarray(u) / 2) ** (2 * k)


def vp_kernel_mass(k: int, nodes: int | None = None) -> float:
    t, w = _periodic_rule(nodes or default_vp_nodes(k))
    return float(np.sum(w * vp_kernel(k, t)))


def vp_1d(f: FieldFunction, k: int, x, nodes: int | None = None) -> np.ndarray:
    """``V_k f(x)``; ``x`` may be a scalar or an array of points.  Returns ``(..., d)``."""
    if f.n != 1:
        raise ValueError("vp_1d needs a function of one variable")
    if k < 1:
        raise ValueError("k must be >= 1")
    t, w = _periodic_rule(nodes or default_vp_nodes(k))
    x = np.asarray(x, dtype=float)
    fv = f(t[:, None])  # (J, d)
    kern = vp_kernel(k, t[None, :] - x.reshape(-1, 1)) * w[None, :]  # (m, J)
    return (kern @ fv).reshape(x.shape + (f.d,))


def vp_2d(f: FieldFunction, k: int, m: int, xy, nodes: int | None = None) -> np.ndarray:
    """``V_{k,m} f(x, y)`` with independent orders ``k`` (in ``x``) and ``m`` (in ``y``).

    ``xy`` is ``(2,)`` or ``(..., 2)``; returns ``(..., d)``.
    """
    if f.n != 2:
        raise ValueError("vp_2d needs a function of two variables")
    if k < 1 or m < 1:
        raise ValueError("orders must be >= 1")
    J = nodes or default_vp_nodes(max(k, m))
    t, w = _periodic_rule(J)
    xy = np.asarray(xy, dtype=float)
    pts = xy.reshape(-1, 2)
    grid = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
    fv = f(grid).reshape(J, J, f.d)
    kx = vp_kernel(k, t[None, :] - pts[:, :1]) * w[None, :]  # (P, J)
    ky = vp_kernel(m, t[None, :] - pts[:, 1:]) * w[None, :]
    out = np.einsum("pi,pj,ijd->pd", kx, ky, fv)
    return out.reshape(xy.shape[:-1] + (f.d,))


@dataclass
class VPReport:
    k: int
    m: int | None
    sup_error: float
    kernel_mass: float
    nodes: int
    test_grid: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def vp_report(f: FieldFunction, k: int, test_grid: BoxGrid, m: int | None = None,
              nodes: int | None = None) -> VPReport:
    """Sup error ``|V f - f|`` over ``test_grid`` and the kernel mass at the node count used."""
    pts = test_grid.nodes()
    J = nodes or default_vp_nodes(max(k, m or 0))
    if f.n == 1:
        approx = vp_1d(f, k, pts[:, 0], J)
        mass = vp_kernel_mass(k, J)
    else:
        m = k if m is None else m
        approx = vp_2d(f, k, m, pts, J)
        mass = vp_kernel_mass(k, J) * vp_kernel_mass(m, J)
    err = float(np.max(np.linalg.norm(approx - f(pts), axis=-1)))
    return VPReport(k, m, err, mass, J, test_grid.to_dict())


# --- even polynomials in two variables ----------------------------------------------

class SymmetryError(ValueError):
    def __init__(self, symmetry: str, point, gap: float):
        self.symmetry, self.point, self.gap = symmetry, list(point), gap
        super().__init__(f"polynomial violates {symmetry} at (x, y) = {self.point} (gap {gap:.3g})")


@dataclass
class CosineForm:
    """``A + sum_{k,l>=1} a[k,l] cos kx cos ly + sum_k b[k] cos kx + sum_l c[l] cos ly``.

    Arrays are indexed from 1 (index 0 unused and zero).
    """

    A: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        K, L = self.a.shape
        cx = np.cos(np.multiply.outer(x, np.arange(K)))
        cy = np.cos(np.multiply.outer(y, np.arange(L)))
        return (self.A + np.einsum("...k,kl,...l->...", cx, self.a, cy)
                + cx @ self.b + cy @ self.c)

    def to_dict(self) -> dict:
        return {"A": self.A, "a": self.a.tolist(), "b": self.b.tolist(), "c": self.c.tolist()}


def even_poly_form(P: TrigPolynomial, samples: int = 64, seed: int = 0, atol: float = 1e-10) -> CosineForm:
    """Cosine-basis coefficients of a real polynomial that is even in each variable.

    Symmetry and reality are checked at random points first; a violation raises
    :class:`SymmetryError` with the witness point.
    """
    if P.n != 2 or P.d != 1 or not P.is_lattice():
        raise ValueError("even_poly_form needs a scalar lattice polynomial in two variables")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-np.pi, np.pi, size=(samples, 2))
    base = P(pts)[:, 0]
    checks = [("reality", np.abs(base.imag)),
              ("T(-x,y)=T(x,y)", np.abs(P(pts * [-1, 1])[:, 0] - base)),
              ("T(x,-y)=T(x,y)", np.abs(P(pts * [1, -1])[:, 0] - base)),
              ("T(-x,-y)=T(x,y)", np.abs(P(-pts)[:, 0] - base))]
    for name, gap in checks:
        i = int(np.argmax(gap))
        if gap[i] > atol:
            raise SymmetryError(name, pts[i], float(gap[i]))
    order = P.lattice_order()
    a = np.zeros((order + 1, order + 1))
    b, c = np.zeros(order + 1), np.zeros(order + 1)
    A = 0.0
    for (k1, k2), coef in P.terms.items():
        k, l, v = abs(int(k1)), abs(int(k2)), float(coef[0].real)
        # each term c e^{i(kx+ly)} contributes via its four sign mirrors
        if k and l:
            a[k, l] += v
        elif k:
            b[k] += v
        elif l:
            c[l] += v
        else:
            A += v
    return CosineForm(A, a, b, c)


# --- sampling bounds -----------------------------------------------------------

@dataclass
class SamplingExperiment:
    n: int
    l: int
    N: int
    trials: int
    dense_factor: int
    seed: int
    ratios: list[float] = field(repr=False)

    @property
    def alpha(self) -> float:
        return 2 * self.l / self.N

    @property
    def cap(self) -> float:
        return (1 - self.alpha) ** (-self.n / 2)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)

    @property
    def min_ratio(self) -> float:
        return min(self.ratios)

    @property
    def violations(self) -> int:
        return sum(1 for r in self.ratios if r > self.cap or r < 1)

    @property
    def log_bound(self) -> float:
        """Classical factor ``(1 + 4/pi + (2/pi) ln(2l+1))^n`` for the ``(2l+1)^n`` grid."""
        return (1 + 4 / math.pi + 2 / math.pi * math.log(2 * self.l + 1)) ** self.n

    def to_dict(self) -> dict:
        return {"n": self.n, "l": self.l, "N": self.N, "alpha": self.alpha, "trials": self.trials,
                "dense_factor": self.dense_factor, "seed": self.seed, "max_ratio": self.max_ratio,
                "min_ratio": self.min_ratio, "cap": self.cap, "violations": self.violations,
                "log_bound": self.log_bound, "ratios": self.ratios}


def sampling_experiment(n: int, l: int, N: int, trials: int, dense_factor: int = 64,
                        seed: int = 0) -> SamplingExperiment:
    """Ratio of dense-grid to ``Theta_N^n``-grid maxima for random real polynomials of order ``l``.

    Trial ``i`` draws standard-normal coefficients from its own stream
    ``default_rng([seed, i])``.  The dense grid contains the coarse grid, so
    every ratio is at least 1; the dense maximum is a lower bound on the true
    supremum.
    """
    if N < 1 or trials < 1 or l < 0:
        raise ValueError("need N >= 1, trials >= 1 and l >= 0")
    if 2 * l / N >= 1:
        raise ValueError(f"alpha = 2l/N = {2 * l / N:g} >= 1; the sampling bound does not apply")
    coarse = periodic_nodes(N)
    dense = np.union1d(periodic_nodes(N * dense_factor), coarse)
    ratios = []
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        P = TrigPolynomial.random_lattice(rng, n, l, real=True)
        if len(P) == 0:
            P = TrigPolynomial(n, {(0,) * n: 1.0})
        grid_max = float(np.max(np.abs(P.tensor_values(coarse))))
        dense_max = float(np.max(np.abs(P.tensor_values(dense))))
        ratios.append(dense_max / grid_max)
    return SamplingExperiment(n, l, N, trials, dense_factor, seed, ratios)


def lattice_candidates(n: int, order: int) -> np.ndarray:
    return lattice_box(n, order).astype(float)
