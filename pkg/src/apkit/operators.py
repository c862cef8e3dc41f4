"""Convolutions, semigroup actions and compositions that preserve almost periodicity.

Every integral is a tensor trapezoid rule on a caller-controlled box.  The
returned functions are lazy :class:`FieldFunction` objects: each evaluation
re-runs the quadrature (results are memoized per point) and ``meta`` records
the truncation box, the node counts and the captured kernel mass.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special, stats

from .field import BoxGrid, DimensionError, FieldFunction, ParamFieldFunction, range_norm

# Rows of (evaluation point x quadrature node) handed to ``f`` at once.
QUAD_BATCH = 1 << 21


class MassFractionError(ValueError):
    def __init__(self, fraction: float, required: float):
        self.fraction, self.required = fraction, required
        super().__init__(f"truncation box captures {fraction:.6g} of the kernel's L1 mass; "
                         f"{required:.6g} required")


@dataclass
class Kernel:
    """Integrable kernel on ``R^n``.

    ``support`` is ``"full"``, ``"orthant"`` (``(0, inf)^n``) or ``"box"`` (then
    ``box`` holds ``(lower, upper)``); ``l1`` is the declared L1 norm.
    """

    n: int
    func: Callable[[np.ndarray], np.ndarray]
    l1: float
    support: str = "full"
    box: tuple | None = None
    label: str = ""
    l1_source: str = "declared"

    def __post_init__(self):
        if self.l1 < 0:
            raise ValueError("L1 bound must be nonnegative")
        if self.support not in ("full", "orthant", "box"):
            raise ValueError(f"unknown support {self.support!r}")
        if self.support == "box" and self.box is None:
            raise ValueError("box support needs box bounds")

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.asarray(self.func(pts.reshape(-1, self.n))).reshape(pts.shape[:-1])

    def inside_support(self, pts: np.ndarray) -> np.ndarray:
        if self.support == "orthant":
            return np.all(pts > 0, axis=-1)
        if self.support == "box":
            lo, hi = (np.asarray(b, float) for b in self.box)
            return np.all((pts >= lo) & (pts <= hi), axis=-1)
        return np.ones(pts.shape[:-1], dtype=bool)

    def check_support(self, rng: np.random.Generator, samples: int = 256, scale: float = 10.0) -> bool:
        """Spot-check that the kernel vanishes at random points outside its declared support."""
        if self.support == "full":
            return True
        pts = rng.uniform(-scale, scale, size=(samples, self.n))
        outside = pts[~self.inside_support(pts)]
        return bool(np.all(self(outside) == 0)) if outside.size else True

    def to_dict(self) -> dict:
        return {"label": self.label, "n": self.n, "support": self.support, "l1": self.l1,
                "l1_source": self.l1_source, "box": self.box}


# --- builtin kernels ------------------------------------------------------------

def gaussian_kernel(n: int, t0: float) -> Kernel:
    """Heat kernel ``(4 pi t0)^{-n/2} exp(-|y|^2 / 4 t0)`` (variance ``2 t0`` per axis)."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    c = (4 * math.pi * t0) ** (-n / 2)
    return Kernel(n, lambda y: c * np.exp(-np.sum(y * y, axis=-1) / (4 * t0)), 1.0,
                  label=f"gauss(t0={t0})", l1_source="exact")


def poisson_kernel(n: int, t0: float) -> Kernel:
    """``Gamma((n+1)/2) pi^{-(n+1)/2} t0 / (t0^2 + |y|^2)^{(n+1)/2}``."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    c = math.gamma((n + 1) / 2) * math.pi ** (-(n + 1) / 2) * t0
    return Kernel(n, lambda y: c / (t0 * t0 + np.sum(y * y, axis=-1)) ** ((n + 1) / 2), 1.0,
                  label=f"poisson(t0={t0})", l1_source="exact")


def poisson_radius(n: int, t0: float, mass: float) -> float:
    """Radius of the ball holding ``mass`` of the Poisson kernel.

    The kernel is a multivariate Cauchy law, so ``|Y|^2 / (n t0^2)`` follows an
    F(n, 1) distribution.
    """
    return float(t0 * math.sqrt(n * stats.f.ppf(mass, n, 1)))


def exp_orthant_kernel(n: int, rate: float = 1.0) -> Kernel:
    """``exp(-rate (s_1 + ... + s_n))`` on the open orthant; L1 norm ``rate^{-n}``."""
    def R(s):
        inside = np.all(s > 0, axis=-1)
        return np.where(inside, np.exp(-rate * np.sum(np.where(inside[..., None], s, 0), axis=-1)), 0.0)
    return Kernel(n, R, rate ** (-n), support="orthant", label=f"exp_orthant(rate={rate})",
                  l1_source="exact")


def laplace_kernel(n: int, scale: float = 1.0, rate: float = 1.0) -> Kernel:
    """``scale * exp(-rate |s|_1)``; L1 norm ``scale (2/rate)^n``."""
    return Kernel(n, lambda s: scale * np.exp(-rate * np.sum(np.abs(s), axis=-1)),
                  scale * (2.0 / rate) ** n, label=f"laplace(scale={scale},rate={rate})",
                  l1_source="exact")


# --- quadrature core ----------------------------------------------------------

def _mass_fraction(h: Kernel, nodes: np.ndarray, w: np.ndarray, kvals: np.ndarray) -> float:
    if h.l1 == 0:
        return 1.0
    return float(np.sum(np.abs(kvals) * w) / h.l1)


def _quadrature_function(f: FieldFunction, offsets: np.ndarray, weights: np.ndarray,
                         label: str, meta: dict, sign: float = -1.0) -> FieldFunction:
    """``t -> sum_j weights_j f(t + sign * offsets_j)``."""
    J = offsets.shape[0]
    per_batch = max(1, QUAD_BATCH // max(J, 1))

    def evaluate(pts):
        out = np.empty((pts.shape[0], f.d), dtype=np.result_type(weights, complex))
        for s in range(0, pts.shape[0], per_batch):
            blk = pts[s:s + per_batch]
            vals = f(blk[:, None, :] + sign * offsets[None, :, :])  # (b, J, d)
            out[s:s + per_batch] = np.einsum("bjd,j->bd", vals, weights)
        if not np.iscomplexobj(weights) and np.all(out.imag == 0):
            return out.real
        return out

    return FieldFunction(f.n, f.d, evaluate, label=label, meta=meta, memoize=True)


def convolve_full(h: Kernel, f: FieldFunction, trunc_box: BoxGrid,
                  min_mass: float = 0.0) -> FieldFunction:
    """``(h * f)(t) = int h(s) f(t - s) ds`` with ``s`` restricted to ``trunc_box``.

    Raises :class:`MassFractionError` when the box holds less than ``min_mass``
    of the declared L1 norm of ``h``.
    """
    if h.n != f.n or trunc_box.n != f.n:
        raise DimensionError("kernel, function and truncation box dimensions differ")
    nodes = trunc_box.nodes()
    w = trunc_box.trapezoid_weights()
    kvals = h(nodes)
    frac = _mass_fraction(h, nodes, w, kvals)
    if frac < min_mass:
        raise MassFractionError(frac, min_mass)
    meta = {"operator": "convolve", "kernel": h.to_dict(), "trunc_box": trunc_box.to_dict(),
            "mass_fraction": frac, "kernel_quadrature_mass": complex(np.sum(kvals * w))}
    return _quadrature_function(f, nodes, kvals * w, f"({h.label}*{f.label})", meta)


def convolve_causal(R: Kernel, f: FieldFunction, tail_box: BoxGrid,
                    min_mass: float = 0.0) -> FieldFunction:
    """``int_{t_1}...int_{t_n} R(t - s) f(s) ds``, evaluated as ``int_{[0,inf)^n} R(s) f(t - s) ds``.

    ``tail_box`` must lie in the closed positive orthant.
    """
    if R.support != "orthant":
        raise ValueError("causal convolution needs a kernel supported on the positive orthant")
    if any(a < 0 for a in tail_box.lower):
        raise ValueError("tail box must lie in [0, inf)^n")
    # the kernel may vanish on the open orthant's boundary; sample it from the inside
    inner = Kernel(R.n, lambda s: R(np.maximum(s, np.finfo(float).tiny)), R.l1,
                   label=R.label, l1_source=R.l1_source)
    out = convolve_full(inner, f, tail_box, min_mass)
    out.meta["operator"] = "convolve_causal"
    out.meta["kernel"] = R.to_dict()
    return out


def window_average(f: FieldFunction, K: BoxGrid) -> FieldFunction:
    """``G(t) = int_K f(t + s) ds`` (not normalized by the volume of ``K``)."""
    if K.n != f.n:
        raise DimensionError("window and function dimensions differ")
    nodes = K.nodes()
    w = K.trapezoid_weights()
    meta = {"operator": "window_average", "window": K.to_dict(), "volume": float(np.sum(w))}
    return _quadrature_function(f, nodes, w, f"window({f.label})", meta, sign=1.0)


def _centered_box(n: int, radius: float, step: float) -> BoxGrid:
    count = int(math.ceil(2 * radius / step)) + 1
    return BoxGrid([-radius] * n, [radius] * n, [count] * n)


def gaussian_semigroup(f: FieldFunction, t0: float, tail_radius: float | None = None,
                       nodes: int | None = None, min_mass: float = 0.0) -> FieldFunction:
    """Heat semigroup at time ``t0``: convolution with the Gaussian of variance ``2 t0``.

    Defaults: ``tail_radius = 10 sqrt(2 t0)`` and a step of ``sqrt(2 t0) / 20``.
    """
    h = gaussian_kernel(f.n, t0)
    sd = math.sqrt(2 * t0)
    radius = 10 * sd if tail_radius is None else float(tail_radius)
    box = _centered_box(f.n, radius, sd / 20) if nodes is None else \
        BoxGrid([-radius] * f.n, [radius] * f.n, [nodes] * f.n)
    out = convolve_full(h, f, box, min_mass)
    out.meta.update(operator="gaussian_semigroup", t0=t0,
                    ball_mass=float(special.gammainc(f.n / 2, radius**2 / (4 * t0))))
    return out


def poisson_semigroup(f: FieldFunction, t0: float, tail_radius: float | None = None,
                      nodes: int | None = None, min_mass: float = 0.999) -> FieldFunction:
    """Poisson semigroup at ``t0`` (Fourier multiplier ``exp(-t0 |xi|)``).

    The default tail radius holds a 0.9995 ball mass; the box is refused when its
    captured mass falls below ``min_mass``.
    """
    h = poisson_kernel(f.n, t0)
    # aim slightly above the refusal level so the trapezoid sum is not cut by round-off
    radius = poisson_radius(f.n, t0, 0.9995) if tail_radius is None else float(tail_radius)
    step = min(t0, 1.0) / 20
    box = _centered_box(f.n, radius, step) if nodes is None else \
        BoxGrid([-radius] * f.n, [radius] * f.n, [nodes] * f.n)
    out = convolve_full(h, f, box, min_mass)
    out.meta.update(operator="poisson_semigroup", t0=t0)
    return out


# --- heat equation on the quarter plane ------------------------------------------

def heat_mixed_ivp(u0: FieldFunction, x: float, t: float, nodes: int = 2001) -> float | complex:
    """``u(x, t) = 1/2 int_{-x}^{x} (pi t)^{-1/2} exp(-y^2/4t) u0(x - y) dy`` (zero boundary data)."""
    if not (x > 0 and t > 0):
        raise ValueError("need x > 0 and t > 0")
    val = heat_solution(u0, nodes)(np.array([[x, t]]))[0, 0]
    return complex(val) if np.iscomplexobj(val) else float(val)


def heat_solution(u0: FieldFunction, nodes: int = 2001) -> FieldFunction:
    """The quarter-plane heat solution as a function of ``(x, t)``.

    The window ``[-x, x]`` changes with ``x``, so the quadrature uses ``nodes``
    points on the reference interval ``[-1, 1]`` scaled by ``x``.
    """
    if u0.n != 1:
        raise DimensionError("initial datum must be a function of one variable")
    ref = np.linspace(-1.0, 1.0, nodes)
    wref = np.full(nodes, ref[1] - ref[0])
    wref[0] = wref[-1] = wref[0] / 2
    per_batch = max(1, QUAD_BATCH // nodes)

    def evaluate(pts):
        out = []
        for s in range(0, pts.shape[0], per_batch):
            x, t = pts[s:s + per_batch, 0:1], pts[s:s + per_batch, 1:2]
            if np.any(x <= 0) or np.any(t <= 0):
                raise ValueError("heat solution is defined on x > 0, t > 0")
            y = x * ref[None, :]
            kern = np.exp(-y * y / (4 * t)) / np.sqrt(np.pi * t)
            vals = u0((x - y)[..., None])  # (b, J, d)
            out.append(0.5 * np.einsum("bj,bjd->bd", kern * (x * wref[None, :]), vals))
        return np.concatenate(out)

    return FieldFunction(2, u0.d, evaluate, label=f"heat[{u0.label}]",
                         meta={"operator": "heat_mixed_ivp", "nodes": nodes}, memoize=True)


# --- compositions --------------------------------------------------------------

@dataclass
class LipschitzEstimate:
    declared: float
    sampled: float
    exceeded: bool
    samples: int
    hull: list = field(default_factory=list)


def sampled_lipschitz(G: ParamFieldFunction, values: np.ndarray, pts: np.ndarray,
                      rng: np.random.Generator, samples: int = 2000) -> tuple[float, list]:
    """Largest ``|G(t;y1) - G(t;y2)| / |y1 - y2|`` over random ``y`` in the bounding hull of ``values``."""
    re_lo, re_hi = values.real.min(axis=0), values.real.max(axis=0)
    cplx = np.iscomplexobj(values) and np.any(values.imag != 0)

    def draw():
        y = rng.uniform(re_lo, re_hi + (re_hi == re_lo), size=(samples, values.shape[1]))
        if cplx:
            im_lo, im_hi = values.imag.min(axis=0), values.imag.max(axis=0)
            y = y + 1j * rng.uniform(im_lo, im_hi + (im_hi == im_lo), size=y.shape)
        return y

    t = pts[rng.integers(0, pts.shape[0], size=samples)]
    y1, y2 = draw(), draw()
    num = range_norm(G(t, y1) - G(t, y2))
    den = range_norm(y1 - y2)
    ok = den > 0
    hull = [re_lo.tolist(), re_hi.tolist()]
    return (float(np.max(num[ok] / den[ok])) if np.any(ok) else 0.0), hull


def nemytskii(G: ParamFieldFunction, f: FieldFunction, L: float | None = None,
              grid: BoxGrid | None = None, seed: int = 0, samples: int = 2000) -> FieldFunction:
    """``W(t) = G(t; f(t))``.

    With a ``grid`` the Lipschitz quotient of ``G`` in its parameter is sampled
    over the range hull of ``f`` on the grid; a quotient above the declared
    ``L`` is recorded in ``meta`` and raised as a warning.
    """
    if G.n != f.n or G.p != f.d:
        raise DimensionError("G must take points of f's domain and parameters in f's range")
    meta: dict = {"operator": "nemytskii", "declared_L": L}
    if grid is not None:
        pts = grid.nodes()
        est, hull = sampled_lipschitz(G, f(pts), pts, np.random.default_rng(seed), samples)
        exceeded = L is not None and est > L * (1 + 1e-9)
        meta["lipschitz"] = LipschitzEstimate(L if L is not None else float("nan"), est,
                                              exceeded, samples, hull).__dict__
        if exceeded:
            meta["warning"] = f"sampled Lipschitz quotient {est:.6g} exceeds declared L={L}"
            warnings.warn(meta["warning"], RuntimeWarning, stacklevel=2)
    return FieldFunction(f.n, G.d, lambda p: G(p, f(p)), label=f"{G.label}(.;{f.label})", meta=meta)


def pointwise_product(f: FieldFunction, F: FieldFunction) -> FieldFunction:
    """``t -> f(t) F(t)`` for scalar ``f``."""
    if f.d != 1:
        raise DimensionError("the first factor must be scalar")
    if f.n != F.n:
        raise DimensionError("factors must share the domain dimension")
    return FieldFunction(F.n, F.d, lambda p: f(p) * F(p), label=f"{f.label}*{F.label}",
                         meta={"operator": "pointwise_product"})
