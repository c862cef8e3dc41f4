"""epsilon-periods, relative density, recurrence, decay and asymptotic splits.

All statements are about finite grids.  An epsilon-period search scans the
nodes of a ``tau_box`` grid and accepts ``tau`` when
``sup_diff(f, tau, domain) <= eps``.  Relative density at length ``l`` is
checked with Euclidean balls: the accepted set is dense at ``l`` on the box
when every node ``t0`` of the tau grid has an accepted ``tau`` with
``|tau - t0| < l``.  The smallest such radius is the *covering radius*.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .field import (CHUNK_POINTS, BoxGrid, DimensionError, FieldFunction, as_point,
                    ordered_map, range_norm)


# --- epsilon-period search ------------------------------------------------------

PRUNE_NODES = 512


def sup_diff_scan(f: FieldFunction, taus: np.ndarray, domain: BoxGrid,
                  base: np.ndarray | None = None, prune_eps: float | None = None) -> np.ndarray:
    """``sup_diff(f, tau, domain)`` for every row of ``taus``.

    With ``prune_eps`` the shifts are first screened on an evenly strided
    subset of the domain; a shift already above ``prune_eps`` there is
    rejected and its entry is that subset maximum (a lower bound, still
    ``> prune_eps``).  Every other entry is the exact grid supremum.
    """
    if f.n != domain.n or taus.shape[-1] != f.n:
        raise DimensionError("function, domain and shifts must share the dimension")
    nodes = domain.nodes()
    if base is None:
        base = f(nodes)

    def exact(sub_nodes, sub_base, sub_taus):
        per_chunk = max(1, CHUNK_POINTS // sub_nodes.shape[0])
        chunks = [sub_taus[s:s + per_chunk] for s in range(0, sub_taus.shape[0], per_chunk)]

        def scan(chunk):
            vals = f(sub_nodes[None, :, :] + chunk[:, None, :])
            return range_norm(vals - sub_base[None]).max(axis=1)

        return np.concatenate(ordered_map(scan, chunks)) if chunks else np.zeros(0)

    stride = nodes.shape[0] // PRUNE_NODES
    if prune_eps is None or stride < 2:
        out = exact(nodes, base, taus)
    else:
        out = exact(nodes[::stride], base[::stride], taus)
        keep = out <= prune_eps
        if np.any(keep):
            out[keep] = exact(nodes, base, taus[keep])
    # a zero shift is an exact period
    out[~np.any(taus, axis=1)] = 0.0
    return out


def covering_radius(accepted: np.ndarray, probes: np.ndarray) -> float:
    """``max_{t0 in probes} min_{tau in accepted} |t0 - tau|`` (Euclidean)."""
    if accepted.shape[0] == 0:
        return float("inf")
    dist, _ = cKDTree(accepted).query(probes)
    return float(np.max(dist))


def axis_sweep_gaps(mask: np.ndarray, grid: BoxGrid) -> list[float]:
    """Largest empty stretch along axis-parallel lines of the tau grid, per axis.

    A stretch runs between consecutive accepted nodes or from a box face to the
    nearest accepted node; a line with no accepted node counts as a full edge.
    In more than one dimension this under-reports emptiness off the lines.
    """
    gaps = []
    for axis, (h, c) in enumerate(zip(grid.spacing, grid.counts)):
        lines = np.moveaxis(mask, axis, -1).reshape(-1, c)
        worst = 0.0
        for line in lines:
            idx = np.flatnonzero(line)
            if idx.size == 0:
                worst = max(worst, (c - 1) * h)
                break
            bounds = np.concatenate([[0], idx, [c - 1]])
            worst = max(worst, float(np.max(np.diff(bounds))) * h)
        gaps.append(float(worst))
    return gaps


@dataclass
class EpsPeriodReport:
    eps: float
    domain: BoxGrid
    tau_box: BoxGrid
    accepted: np.ndarray  # (k, n)
    accepted_values: np.ndarray  # (k,)
    covering_radius: float
    max_gap: list[float]
    verdicts: dict[float, bool]
    sup_values: np.ndarray = field(repr=False)
    ball_norm: str = "euclidean"

    @property
    def tau_spacing(self) -> list[float]:
        return self.tau_box.spacing.tolist()

    def relatively_dense(self, l: float) -> bool:
        """Every tau-grid node is within distance ``< l`` of an accepted tau."""
        return self.covering_radius < l

    def accepted_mask(self, eps: float | None = None) -> np.ndarray:
        """Acceptance at ``eps <= self.eps`` (rejected entries are only lower bounds)."""
        if eps is not None and eps > self.eps:
            raise ValueError("sup values of rejected shifts are lower bounds; rerun at the larger eps")
        return self.sup_values <= (self.eps if eps is None else eps)

    def accepted_set(self) -> set[tuple[float, ...]]:
        return {tuple(row) for row in self.accepted.tolist()}

    def to_dict(self) -> dict:
        return {
            "eps": self.eps, "domain": self.domain.to_dict(), "tau_box": self.tau_box.to_dict(),
            "tau_spacing": self.tau_spacing, "ball_norm": self.ball_norm,
            "accepted": [{"tau": t, "sup_diff": v}
                         for t, v in zip(self.accepted.tolist(), self.accepted_values.tolist())],
            "covering_radius": self.covering_radius, "max_gap_per_axis": self.max_gap,
            "verdicts": [{"l": l, "relatively_dense": v} for l, v in self.verdicts.items()],
        }


def eps_period_search(f: FieldFunction, eps: float, domain: BoxGrid, tau_box: BoxGrid,
                      ls: Sequence[float] = ()) -> EpsPeriodReport:
    """Accept every tau-grid node whose shift moves ``f`` by at most ``eps`` on ``domain``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if f.n != domain.n or f.n != tau_box.n:
        raise DimensionError("function, domain and tau box must share the dimension")
    taus = tau_box.nodes()
    if taus.shape[0] == 0:
        raise ValueError("empty tau box")
    sups = sup_diff_scan(f, taus, domain, prune_eps=eps)
    mask = sups <= eps
    radius = covering_radius(taus[mask], taus)
    return EpsPeriodReport(
        eps=float(eps), domain=domain, tau_box=tau_box,
        accepted=taus[mask], accepted_values=sups[mask],
        covering_radius=radius, max_gap=axis_sweep_gaps(mask.reshape(tau_box.shape), tau_box),
        verdicts={float(l): radius < l for l in ls}, sup_values=sups)


# --- recurrence and supremum formula ---------------------------------------------

@dataclass
class RecurrenceReport:
    taus: list[list[float]]
    values: list[float]
    monotone: bool
    last: float
    log_slope: float | None
    domain: BoxGrid

    def to_dict(self) -> dict:
        return {"taus": self.taus, "sup_diff": self.values, "monotone_envelope": self.monotone,
                "last": self.last, "log_slope": self.log_slope, "domain": self.domain.to_dict()}


def recurrence_check(f: FieldFunction, taus, domain: BoxGrid) -> RecurrenceReport:
    """``sup_diff`` along a candidate recurrence sequence ``tau_k``."""
    taus = np.atleast_2d(np.asarray(taus, dtype=float))
    if taus.size == 0:
        raise ValueError("recurrence_check needs at least one shift")
    if taus.shape[1] != f.n:
        raise DimensionError(f"shifts must be vectors in R^{f.n}")
    norms = np.linalg.norm(taus, axis=1)
    if np.any(np.diff(norms) < 0):
        raise ValueError("|tau_k| must be nondecreasing")
    values = sup_diff_scan(f, taus, domain)
    pos = values > 0
    slope = None
    if np.count_nonzero(pos) >= 2:
        k = np.flatnonzero(pos)
        slope = float(np.polyfit(k, np.log(values[pos]), 1)[0])
    return RecurrenceReport(taus.tolist(), values.tolist(), bool(np.all(np.diff(values) <= 0)),
                            float(values[-1]), slope, domain)


def supremum_formula_check(f: FieldFunction, a: float, domain: BoxGrid) -> tuple[float, float]:
    """``(sup over all nodes, sup over nodes with |t| >= a)`` of ``|f|``."""
    if f.n != domain.n:
        raise DimensionError("function and domain dimensions differ")
    nodes = domain.nodes()
    far = np.linalg.norm(nodes, axis=1) >= a
    if not np.any(far):
        raise ValueError(f"domain has no nodes with |t| >= {a}")
    norms = range_norm(f(nodes))
    return float(norms.max()), float(norms[far].max())


# --- unbounded sets D and decay -------------------------------------------------

@dataclass(frozen=True)
class Mask:
    """Membership predicate for a subset ``D`` of ``R^n``."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    params: tuple = ()

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(pts, dtype=float)), dtype=bool)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": list(self.params)}


def full_space() -> Mask:
    return Mask("full", lambda p: np.ones(p.shape[0], dtype=bool))


def orthant() -> Mask:
    """Closed positive orthant ``[0, inf)^n``."""
    return Mask("orthant", lambda p: np.all(p >= 0, axis=1))


def diagonal_sector(c1: float, c2: float) -> Mask:
    """``{(t1, t2) : t1 >= 0, c1 t1 <= t2 <= c2 t1}`` in the plane."""
    if not c1 < c2:
        raise ValueError("sector slopes need c1 < c2")

    def inside(p):
        if p.shape[1] != 2:
            raise DimensionError("diagonal sector is a planar set")
        t1, t2 = p[:, 0], p[:, 1]
        return (t1 >= 0) & (c1 * t1 <= t2) & (t2 <= c2 * t1)
    return Mask("diagonal_sector", inside, (float(c1), float(c2)))


@dataclass
class DecayReport:
    radii: list[float]
    sups: list[float]
    counts: list[int]
    strictly_decreasing: bool
    below_tol: bool
    tol: float
    mask: dict

    @property
    def passed(self) -> bool:
        return self.strictly_decreasing or self.below_tol

    def to_dict(self) -> dict:
        return {"radii": self.radii, "sups": self.sups, "node_counts": self.counts,
                "strictly_decreasing": self.strictly_decreasing, "below_tol": self.below_tol,
                "tol": self.tol, "mask": self.mask, "passed": self.passed}


def decay_check(q: FieldFunction, mask: Mask, radii: Sequence[float], domain: BoxGrid,
                tol: float = 0.0) -> DecayReport:
    """Supremum of ``|q|`` over masked nodes with ``|t| >= R`` for each radius ``R``.

    Passes when the suprema strictly decrease, or when the last one is ``<= tol``.
    """
    radii = [float(r) for r in radii]
    if not radii or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be nonempty and strictly increasing")
    if q.n != domain.n:
        raise DimensionError("function and domain dimensions differ")
    nodes = domain.nodes()
    inside = mask(nodes)
    pts = nodes[inside]
    dist = np.linalg.norm(pts, axis=1)
    norms = range_norm(q(pts)) if pts.shape[0] else np.zeros(0)
    sups, counts = [], []
    for R in radii:
        sel = dist >= R
        if not np.any(sel):
            raise ValueError(f"no masked domain nodes beyond radius {R}")
        sups.append(float(norms[sel].max()))
        counts.append(int(np.count_nonzero(sel)))
    return DecayReport(radii, sups, counts, bool(np.all(np.diff(sups) < 0)),
                       sups[-1] <= tol, float(tol), mask.to_dict())


def windowed_sup_diff(f: FieldFunction, tau, domain: BoxGrid, mask: Mask, M: float) -> tuple[float, int]:
    """``sup |f(t + tau) - f(t)|`` over nodes with ``t`` and ``t + tau`` in ``D`` beyond ``|.| >= M``.

    Returns the supremum and the number of nodes that qualified.
    """
    tau = as_point(tau, f.n)
    nodes = domain.nodes()
    moved = nodes + tau
    sel = (mask(nodes) & mask(moved) & (np.linalg.norm(nodes, axis=1) >= M)
           & (np.linalg.norm(moved, axis=1) >= M))
    if not np.any(sel):
        raise ValueError(f"no domain nodes qualify at M={M}")
    diff = range_norm(f(moved[sel]) - f(nodes[sel]))
    return float(diff.max()), int(np.count_nonzero(sel))


# --- asymptotic decompositions -----------------------------------------------------

@dataclass
class SplitReport:
    passed: bool
    pointwise_ok: bool
    worst_node: list[float]
    worst_mismatch: float
    eps: float
    decay: DecayReport
    periods: EpsPeriodReport
    l: float

    def to_dict(self) -> dict:
        return {"passed": self.passed, "pointwise_ok": self.pointwise_ok,
                "worst_node": self.worst_node, "worst_mismatch": self.worst_mismatch,
                "eps": self.eps, "l": self.l, "decay": self.decay.to_dict(),
                "periods": self.periods.to_dict()}


def asymptotic_split_check(f: FieldFunction, g: FieldFunction, q: FieldFunction, domain: BoxGrid,
                           mask: Mask, radii: Sequence[float], eps: float, tau_box: BoxGrid,
                           l: float, period_eps: float | None = None,
                           decay_tol: float = 0.0) -> SplitReport:
    """Check ``f = g + q`` with ``g`` almost periodic and ``q`` decaying on ``D``.

    ``eps`` bounds the pointwise mismatch; ``period_eps`` (default ``eps``) is the
    level of the epsilon-period search for ``g``, whose accepted set must be
    relatively dense at ``l`` on ``tau_box``.
    """
    for h in (g, q):
        if (h.n, h.d) != (f.n, f.d):
            raise DimensionError("f, g and q must have identical shapes")
    nodes = domain.nodes()
    mismatch = range_norm(f(nodes) - g(nodes) - q(nodes))
    worst = int(np.argmax(mismatch))
    pointwise_ok = bool(mismatch[worst] <= eps)
    decay = decay_check(q, mask, radii, domain, decay_tol)
    periods = eps_period_search(g, eps if period_eps is None else period_eps, domain, tau_box, [l])
    dense = bool(periods.accepted.shape[0] > 0 and periods.verdicts[float(l)])
    return SplitReport(pointwise_ok and decay.passed and dense, pointwise_ok,
                       nodes[worst].tolist(), float(mismatch[worst]), float(eps),
                       decay, periods, float(l))
