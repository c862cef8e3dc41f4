"""Contraction solvers for the Hammerstein convolution equation and a delayed evolution equation.

Both solvers discretize on a uniform grid that is wider than the region of
interest by a margin; outside the iteration grid the unknown is frozen to a
known function (``g`` for Hammerstein, the history for the delay equation).
The influence of that boundary decays into the interior through the kernel,
so results on the region of interest are insensitive to it once the margin
is a few kernel widths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import interpolate, signal

from .field import BoxGrid, DimensionError, FieldFunction, ParamFieldFunction, range_norm
from .operators import Kernel


class ContractionError(ValueError):
    """The map is not certified as a contraction (``q >= 1``)."""

    def __init__(self, message: str, q: float):
        self.q = q
        super().__init__(message)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: "SolveTrace"):
        self.trace = trace
        super().__init__(message)


@dataclass
class SolveTrace:
    distances: list[float]
    residual: float
    q: float
    q_quadrature: float
    iterations: int
    converged: bool
    tol: float
    grid: dict
    details: dict = field(default_factory=dict)

    def envelope_ok(self, slack: float = 0.1) -> bool:
        """``d_{k+1} <= q d_k (1 + slack)`` for every consecutive pair."""
        d = self.distances
        return all(b <= self.q * a * (1 + slack) for a, b in zip(d, d[1:]) if a > 0)

    def to_dict(self) -> dict:
        return {"distances": self.distances, "residual": self.residual, "q": self.q,
                "q_quadrature": self.q_quadrature, "iterations": self.iterations,
                "converged": self.converged, "tol": self.tol, "grid": self.grid, **self.details}


def _uniform_steps(grid: BoxGrid) -> np.ndarray:
    if min(grid.counts) < 4:
        raise ValueError("working grid needs at least 4 nodes per axis")
    return grid.spacing


def grid_interpolant(grid: BoxGrid, values: np.ndarray, label: str, meta: dict) -> FieldFunction:
    """Cubic interpolant of ``values`` (shape ``grid.shape + (d,)``) as a :class:`FieldFunction`."""
    d = values.shape[-1]
    parts = [values.real] + ([values.imag] if np.iscomplexobj(values) else [])
    if grid.n == 1:
        x = grid.axes()[0]
        splines = [interpolate.make_interp_spline(x, p, k=3) for p in parts]
    else:
        splines = [interpolate.RegularGridInterpolator(grid.axes(), p, method="cubic") for p in parts]

    def evaluate(pts):
        lo, hi = np.asarray(grid.lower), np.asarray(grid.upper)
        if np.any(pts < lo - 1e-9) or np.any(pts > hi + 1e-9):
            raise ValueError(f"{label} is only known on {grid}")
        q = np.clip(pts, lo, hi)
        vals = [s(q[:, 0]) if grid.n == 1 else s(q) for s in splines]
        return vals[0] + 1j * vals[1] if len(vals) == 2 else vals[0]

    return FieldFunction(grid.n, d, evaluate, label=label, meta=meta)


def _iterate(step: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, tol: float, max_iter: int):
    y, distances = y0, []
    for _ in range(max_iter):
        y_new = step(y)
        d = float(np.max(range_norm(y_new - y))) if y.size else 0.0
        distances.append(d)
        y = y_new
        if d <= tol:
            return y, distances, True
    return y, distances, False


# --- Hammerstein -------------------------------------------------------------

class HammersteinProblem:
    """``y(t) = g(t) + int k(t - s) F(s, y(s)) ds`` on a grid.

    The iteration grid is ``grid`` widened by ``margin`` per side (default: the
    kernel radius), rounded to whole steps; the kernel is truncated to
    ``[-kernel_radius, kernel_radius]^n``.
    """

    def __init__(self, g: FieldFunction, k: Kernel, F: ParamFieldFunction, L: float, grid: BoxGrid,
                 kernel_radius: float = 40.0, margin: float | None = None):
        if not (g.n == k.n == F.n == grid.n) or F.p != g.d or F.d != g.d:
            raise DimensionError("g, k, F and the grid have inconsistent dimensions")
        q = L * k.l1
        if q >= 1:
            raise ContractionError(f"L*|k|_1 = {q:.6g} >= 1; no contraction certified", q)
        self.g, self.k, self.F, self.L, self.q = g, k, F, float(L), float(q)
        self.grid = grid
        h = _uniform_steps(grid)
        J = np.ceil(kernel_radius / h).astype(int)
        M = np.ceil((kernel_radius if margin is None else margin) / h).astype(int)
        self.J, self.M = J, M
        lo, hi = np.asarray(grid.lower), np.asarray(grid.upper)
        self.ext = BoxGrid(lo - M * h, hi + M * h, np.asarray(grid.counts) + 2 * M)
        self.pad = BoxGrid(lo - (M + J) * h, hi + (M + J) * h, np.asarray(grid.counts) + 2 * (M + J))
        kbox = BoxGrid(-J * h, J * h, 2 * J + 1)
        self.kernel_weights = (k(kbox.nodes()) * kbox.trapezoid_weights()).reshape(kbox.shape)
        self.q_quadrature = float(L * np.sum(np.abs(self.kernel_weights)))
        self.ext_nodes = self.ext.nodes()
        self.pad_nodes = self.pad.nodes()
        self.g_ext = g(self.ext_nodes)
        pad_g = g(self.pad_nodes)
        self._inner = tuple(slice(j, j + c) for j, c in zip(J, self.ext.counts))
        # F(s, g(s)) on the padding ring; overwritten inside by the iterate
        self._pad_F = F(self.pad_nodes, pad_g).reshape(self.pad.shape + (g.d,))

    def integral(self, y_ext: np.ndarray) -> np.ndarray:
        """``int k(t - s) F(s, y(s)) ds`` at the extended-grid nodes, ``(m, d)``."""
        Fp = self._pad_F.copy()
        Fp[self._inner] = self.F(self.ext_nodes, y_ext).reshape(self.ext.shape + (self.g.d,))
        out = []
        for c in range(self.g.d):
            comp = Fp[..., c]
            if not np.any(comp):
                out.append(np.zeros(self.ext.shape, dtype=comp.dtype))
                continue
            out.append(signal.convolve(comp, self.kernel_weights, mode="valid"))
        return np.stack(out, axis=-1).reshape(-1, self.g.d)

    def apply(self, y_ext: np.ndarray) -> np.ndarray:
        return self.g_ext + self.integral(y_ext)

    def residual(self, y_ext: np.ndarray) -> float:
        """Fixed-point residual on the region of interest."""
        r = range_norm(y_ext - self.apply(y_ext)).reshape(self.ext.shape)
        inner = tuple(slice(m, m + c) for m, c in zip(self.M, self.grid.counts))
        return float(np.max(r[inner]))

    def grid_info(self) -> dict:
        return {"region": self.grid.to_dict(), "iteration_grid": self.ext.to_dict(),
                "kernel_radius_steps": self.J.tolist(), "margin_steps": self.M.tolist()}


def hammerstein_solve(g: FieldFunction, k: Kernel, F: ParamFieldFunction, L: float, grid: BoxGrid,
                      tol: float = 1e-8, max_iter: int = 200, start: str | np.ndarray = "g",
                      kernel_radius: float = 40.0, margin: float | None = None):
    """Picard iteration ``y <- g + k * F(., y)`` from ``y0 = g`` (or ``start="zero"``).

    Returns ``(solution, trace)``.  Refuses with :class:`ContractionError` when
    ``L |k|_1 >= 1``; raises :class:`ConvergenceError` after ``max_iter`` steps.
    """
    prob = HammersteinProblem(g, k, F, L, grid, kernel_radius, margin)
    if isinstance(start, str):
        if start not in ("g", "zero"):
            raise ValueError("start must be 'g', 'zero' or an array")
        y0 = prob.g_ext.copy() if start == "g" else np.zeros_like(prob.g_ext)
    else:
        y0 = np.asarray(start).reshape(prob.g_ext.shape)
    y, dists, ok = _iterate(prob.apply, y0, tol, max_iter)
    trace = SolveTrace(dists, prob.residual(y), prob.q, prob.q_quadrature, len(dists), ok, tol,
                       prob.grid_info(), {"equation": "hammerstein", "kernel": k.to_dict(),
                                          "L": prob.L, "start": start if isinstance(start, str) else "array"})
    if not ok:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (last distance {dists[-1]:.3g})",
                               trace)
    sol = grid_interpolant(prob.ext, y.reshape(prob.ext.shape + (g.d,)), "hammerstein_solution",
                           {"trace": trace.to_dict()})
    sol.meta["samples"] = y
    sol.meta["problem"] = prob
    return sol, trace


# --- delayed evolution equation ---------------------------------------------------

@dataclass
class EvolutionFamilySpec:
    """``U(t, s) = exp(int_s^t alpha) T(int_s^t delta)`` with ``T`` the heat semigroup
    restricted to the retained frequencies ``freqs`` (a diagonal action
    ``exp(-xi^2 tau)`` per frequency)."""

    alpha: FieldFunction
    delta: FieldFunction
    omega_tilde: float
    freqs: tuple[float, ...] = (0.0,)
    delta0: float = 0.0

    @property
    def d(self) -> int:
        return len(self.freqs)

    @property
    def spectral_gap(self) -> float:
        return float(min(x * x for x in self.freqs))

    @property
    def omega(self) -> float:
        return self.omega_tilde + self.spectral_gap * self.delta0

    def validate(self, t: np.ndarray) -> None:
        if not self.omega > 0:
            raise ValueError(f"decay rate omega = {self.omega} must be positive")
        a = np.real(self.alpha(t[:, None])[:, 0])
        if np.any(a > -self.omega_tilde + 1e-12):
            i = int(np.argmax(a))
            raise ValueError(f"alpha({t[i]:g}) = {a[i]:g} exceeds -omega_tilde = {-self.omega_tilde:g}")
        dl = np.real(self.delta(t[:, None])[:, 0])
        if np.any(dl < self.delta0 - 1e-12):
            i = int(np.argmin(dl))
            raise ValueError(f"delta({t[i]:g}) = {dl[i]:g} is below delta0 = {self.delta0:g}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.label, "delta": self.delta.label, "omega_tilde": self.omega_tilde,
                "delta0": self.delta0, "freqs": list(self.freqs), "omega": self.omega,
                "omega_derivation": "omega_tilde + min(freqs^2) * delta0"}


def _cumulative(vals: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(vals, dtype=float)
    out[1:] = np.cumsum((vals[1:] + vals[:-1]) * (h / 2))
    return out


class DelayProblem:
    """Mild-solution map ``(Gamma u)(t) = int_{t - T_h}^{t} U(t, s) f(s, u(s - r)) ds`` on a grid."""

    def __init__(self, spec: EvolutionFamilySpec, f: ParamFieldFunction, L_f: float, r: float,
                 grid: BoxGrid, history_depth: float | None = None, margin: float | None = None,
                 history: FieldFunction | None = None):
        if grid.n != 1 or f.n != 1 or f.p != spec.d or f.d != spec.d:
            raise DimensionError("delay problem needs a 1-D grid and f: R x C^d -> C^d")
        if r < 0:
            raise ValueError("delay must be nonnegative")
        omega = spec.omega
        self.q = float(L_f / omega) if omega > 0 else math.inf
        if self.q >= 1:
            raise ContractionError(f"L_f/omega = {self.q:.6g} >= 1; no contraction certified", self.q)
        h = float(_uniform_steps(grid)[0])
        m = r / h
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ValueError(f"delay r={r} must be a multiple of the grid step {h}")
        self.m = int(round(m))
        depth = 40.0 / omega if history_depth is None else float(history_depth)
        width = depth if margin is None else float(margin)
        if width < r:
            raise ValueError(f"history window {width} is shorter than the delay {r}")
        self.J = int(math.ceil(depth / h))
        self.W = int(math.ceil(width / h))
        self.h, self.r, self.depth, self.L_f = h, float(r), self.J * h, float(L_f)
        self.spec, self.f, self.grid = spec, f, grid
        a = grid.lower[0]
        n_e = grid.counts[0] + self.W
        self.ext = BoxGrid(a - self.W * h, grid.upper[0], n_e)
        pre = self.J + self.m
        self.t_all = self.ext.lower[0] + h * np.arange(-pre, n_e)
        spec.validate(self.t_all)
        self.pre = pre
        hist = history if history is not None else FieldFunction.constant(np.zeros(spec.d), 1)
        self.u_pre = hist(self.t_all[:pre, None])
        A = _cumulative(np.real(spec.alpha(self.t_all[:, None])[:, 0]), h)
        D = _cumulative(np.real(spec.delta(self.t_all[:, None])[:, 0]), h)
        xi2 = np.asarray(spec.freqs, dtype=float) ** 2
        self._A, self._D, self._xi2 = A, D, xi2
        w = np.full(self.J + 1, h)
        w[0] = w[-1] = h / 2
        self._w = w
        self.decay_tail = math.exp(-omega * self.depth)

    def apply(self, u_ext: np.ndarray) -> np.ndarray:
        u_all = np.concatenate([self.u_pre, u_ext])
        # phi(s) = f(s, u(s - r)) for s from index m onward of t_all
        s_idx = np.arange(self.m, u_all.shape[0])
        phi = self.f(self.t_all[s_idx, None], u_all[s_idx - self.m])  # aligned with t_all[m:]
        n_e = u_ext.shape[0]
        i = np.arange(self.pre, self.pre + n_e)
        out = np.zeros((n_e, self.spec.d), dtype=np.result_type(phi, u_ext, float))
        A, D, xi2 = self._A, self._D, self._xi2
        for j in range(self.J + 1):
            src = i - j
            prop = np.exp((A[i] - A[src])[:, None] - (D[i] - D[src])[:, None] * xi2[None, :])
            out += self._w[j] * prop * phi[src - self.m]
        return out

    def residual(self, u_ext: np.ndarray) -> float:
        r = range_norm(u_ext - self.apply(u_ext))
        return float(np.max(r[self.W:]))

    def grid_info(self) -> dict:
        return {"region": self.grid.to_dict(), "iteration_grid": self.ext.to_dict(),
                "history_depth": self.depth, "history_tail_factor": self.decay_tail,
                "history": "zero before the iteration grid", "delay_steps": self.m}


def delay_evolution_solve(spec: EvolutionFamilySpec, f: ParamFieldFunction, L_f: float, r: float,
                          grid: BoxGrid, tol: float = 1e-8, max_iter: int = 200,
                          history_depth: float | None = None, margin: float | None = None,
                          start: np.ndarray | None = None):
    """Picard iteration for the mild solution of ``u' = A(t) u + f(t, u(t - r))``.

    Starts from ``u0 = 0``; the contraction constant is ``L_f / omega``.
    """
    prob = DelayProblem(spec, f, L_f, r, grid, history_depth, margin)
    u0 = np.zeros((prob.ext.size, spec.d)) if start is None else np.asarray(start).reshape(prob.ext.size, spec.d)
    u, dists, ok = _iterate(prob.apply, u0, tol, max_iter)
    trace = SolveTrace(dists, prob.residual(u), prob.q, prob.q, len(dists), ok, tol, prob.grid_info(),
                       {"equation": "delay_evolution", "family": spec.to_dict(), "L_f": L_f, "r": r})
    if not ok:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (last distance {dists[-1]:.3g})",
                               trace)
    sol = grid_interpolant(prob.ext, u, "delay_solution", {"trace": trace.to_dict()})
    sol.meta["samples"] = u
    sol.meta["problem"] = prob
    return sol, trace


# --- contraction certificates ----------------------------------------------------

@dataclass
class Certificate:
    q_estimate: float
    ratios: list[float]
    skipped: int
    analytic: float | None = None

    def to_dict(self) -> dict:
        return {"q_estimate": self.q_estimate, "ratios": self.ratios, "skipped": self.skipped,
                "analytic_q": self.analytic}


def contraction_certificate(op: Callable[[np.ndarray], np.ndarray], probes: Sequence,
                            grid: BoxGrid | None = None, analytic: float | None = None) -> Certificate:
    """Estimate ``max |op(u) - op(v)| / |u - v|`` (sup norms on grid samples) over probe pairs.

    Probes are pairs of sample arrays, or of :class:`FieldFunction` objects that
    are sampled on ``grid``.  Pairs at zero distance are skipped.
    """
    if not probes:
        raise ValueError("need at least one probe pair")
    ratios, skipped = [], 0
    nodes = grid.nodes() if grid is not None else None
    for u, v in probes:
        if isinstance(u, FieldFunction):
            if nodes is None:
                raise ValueError("sampling FieldFunction probes needs a grid")
            u, v = u(nodes), v(nodes)
        u, v = np.asarray(u), np.asarray(v)
        du = float(np.max(range_norm(u - v))) if u.ndim > 1 else float(np.max(np.abs(u - v)))
        if du == 0:
            skipped += 1
            continue
        ou, ov = op(u), op(v)
        dv = float(np.max(range_norm(ou - ov))) if ou.ndim > 1 else float(np.max(np.abs(ou - ov)))
        ratios.append(dv / du)
    return Certificate(max(ratios) if ratios else float("nan"), ratios, skipped, analytic)
