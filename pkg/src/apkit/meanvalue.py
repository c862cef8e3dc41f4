"""Mean values, Bohr-Fourier coefficients and spectrum scans.

The mean of ``F`` is the limit of averages over the cubes ``s + [-T, T]^n``.
Each average here is a tensor trapezoid quadrature; a :class:`MeanEstimate`
keeps every partial average so the caller can judge convergence from the
gap between the last two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import BoxGrid, DimensionError, FieldFunction, as_point, range_norm

DEFAULT_T_SEQ = (25.0, 50.0, 100.0)
NODES_PER_UNIT = 64
NODE_BUDGET = 4_000_000


def default_nodes(T: float, n: int, per_unit: int = NODES_PER_UNIT,
                  budget: int = NODE_BUDGET) -> int:
    """Nodes per axis for the cube of half-side ``T``, capped so the total stays in budget."""
    want = int(np.ceil(per_unit * 2 * T)) + 1
    cap = int(np.floor(budget ** (1.0 / n)))
    return max(2, min(want, cap))


def _cube(s: np.ndarray, T: float, nodes: int) -> BoxGrid:
    return BoxGrid(s - T, s + T, [nodes] * s.size)


def _check_T_seq(T_seq) -> list[float]:
    T_seq = [float(T) for T in T_seq]
    if len(T_seq) < 2:
        raise ValueError("T_seq needs at least two values")
    if any(b <= a for a, b in zip(T_seq, T_seq[1:])) or T_seq[0] <= 0:
        raise ValueError("T_seq must be positive and strictly increasing")
    return T_seq


@dataclass
class MeanEstimate:
    value: np.ndarray
    T_seq: list[float]
    partials: list[np.ndarray]
    gap: float
    nodes: list[int]
    center: list[float]
    frequency: list[float] | None = None

    def to_dict(self) -> dict:
        doc = {"value": self.value, "T_seq": self.T_seq, "partials": self.partials,
               "gap": self.gap, "nodes_per_axis": self.nodes, "center": self.center}
        if self.frequency is not None:
            doc["frequency"] = self.frequency
        return doc


def _averages(f: FieldFunction, s: np.ndarray, T: float, nodes: int,
              freqs: np.ndarray) -> np.ndarray:
    """Trapezoid averages of ``exp(-i<lambda,t>) f(t)`` over ``s + [-T,T]^n``
    for each row ``lambda`` of ``freqs``; returns ``(len(freqs), d)``."""
    grid = _cube(s, T, nodes)
    pts = grid.nodes()
    w = grid.trapezoid_weights() / (2 * T) ** s.size
    vals = f(pts)
    out = np.empty((freqs.shape[0], f.d), dtype=complex)
    for i, lam in enumerate(freqs):
        if np.any(lam):
            out[i] = (w * np.exp(-1j * (pts @ lam))) @ vals
        else:
            out[i] = w @ vals
    return out


def _estimate(f: FieldFunction, s, T_seq, nodes, lam) -> MeanEstimate:
    s = as_point(s if s is not None else np.zeros(f.n), f.n)
    lam = as_point(lam, f.n)
    T_seq = _check_T_seq(T_seq)
    counts = [default_nodes(T, f.n) if nodes is None else int(nodes) for T in T_seq]
    if min(counts) < 2:
        raise ValueError("need at least two nodes per axis")
    partials = [_averages(f, s, T, c, lam[None, :])[0] for T, c in zip(T_seq, counts)]
    gap = float(range_norm(partials[-1] - partials[-2]))
    return MeanEstimate(partials[-1], T_seq, partials, gap, counts, s.tolist())


def mean_value(f: FieldFunction, s=None, T_seq=DEFAULT_T_SEQ, nodes: int | None = None) -> MeanEstimate:
    """Average of ``f`` over ``s + [-T, T]^n`` for each ``T`` in ``T_seq``.

    ``nodes`` is the node count per axis (including endpoints); by default it
    follows 64 nodes per unit length, capped by a total-node budget.
    """
    return _estimate(f, s, T_seq, nodes, np.zeros(f.n))


def bohr_coefficient(f: FieldFunction, lam, s=None, T_seq=DEFAULT_T_SEQ,
                     nodes: int | None = None) -> MeanEstimate:
    """Mean value of ``t -> exp(-i <lam, t>) f(t)``."""
    est = _estimate(f, s, T_seq, nodes, lam)
    est.frequency = as_point(lam, f.n).tolist()
    return est


@dataclass
class SpectrumEstimate:
    tested: list[list[float]]
    coefficients: list[np.ndarray]
    accepted: list[int]
    threshold: float
    T: float
    nodes: int
    center: list[float] = field(default_factory=list)

    @property
    def accepted_frequencies(self) -> list[list[float]]:
        return [self.tested[i] for i in self.accepted]

    def coefficient(self, i: int) -> np.ndarray:
        return self.coefficients[i]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold, "T": self.T, "nodes_per_axis": self.nodes,
            "center": self.center,
            "tested": [{"freq": lam, "coef": c, "abs": float(range_norm(c))}
                       for lam, c in zip(self.tested, self.coefficients)],
            "accepted": [{"freq": self.tested[i], "coef": self.coefficients[i]} for i in self.accepted],
        }


def spectrum_scan(f: FieldFunction, candidates, threshold: float, T: float = DEFAULT_T_SEQ[-1],
                  nodes: int | None = None, s=None) -> SpectrumEstimate:
    """Test each candidate frequency; accept those with ``|F_lambda| >= threshold``.

    ``f`` is sampled once on the cube and reused for every candidate.
    """
    cands = np.atleast_2d(np.asarray(candidates, dtype=float))
    if cands.size == 0:
        raise ValueError("spectrum_scan needs at least one candidate frequency")
    if cands.shape[1] != f.n:
        raise DimensionError(f"candidates must be vectors in R^{f.n}")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    s = as_point(s if s is not None else np.zeros(f.n), f.n)
    count = default_nodes(T, f.n) if nodes is None else int(nodes)
    coefs = _averages(f, s, float(T), count, cands)
    mags = range_norm(coefs)
    accepted = [i for i in range(len(cands)) if mags[i] >= threshold]
    return SpectrumEstimate(cands.tolist(), list(coefs), accepted, float(threshold),
                            float(T), count, s.tolist())
