"""Function model and box grids.

Everything downstream works with :class:`FieldFunction`, a vectorized
evaluator ``R^n -> C^d``, sampled on finite :class:`BoxGrid` domains.  A
supremum "over R^n" is always a maximum over the nodes of some grid, and
reports carry the grid they were computed on.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

# Maximum number of evaluation points handed to an evaluator in one call.
CHUNK_POINTS = 1 << 20


class DimensionError(ValueError):
    """Raised when dimensions of functions, points and grids disagree."""


def as_point(t: Sequence[float] | float, n: int | None = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(t, dtype=float))
    if p.ndim != 1:
        raise DimensionError(f"a point must be a flat sequence, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"point has non-finite coordinates: {p.tolist()}")
    if n is not None and p.size != n:
        raise DimensionError(f"expected a point in R^{n}, got {p.size} coordinates")
    return p


def range_norm(values: np.ndarray) -> np.ndarray:
    """Euclidean norm over the trailing (range) axis."""
    if np.iscomplexobj(values):
        return np.sqrt(np.sum(values.real**2 + values.imag**2, axis=-1))
    return np.sqrt(np.sum(values * values, axis=-1))


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("AP_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable[[Any], Any], items: Iterable[Any]) -> list:
    """Map ``fn`` over ``items`` (threaded when AP_THREADS > 1), keeping order."""
    items = list(items)
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class BoxGrid:
    """Tensor grid on ``[lower_1, upper_1] x ... x [lower_n, upper_n]``.

    ``counts`` are node counts per axis and include both endpoints.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __init__(self, lower, upper, counts):
        lo = tuple(float(v) for v in np.atleast_1d(lower))
        hi = tuple(float(v) for v in np.atleast_1d(upper))
        cn = tuple(int(c) for c in np.atleast_1d(counts))
        if not (len(lo) == len(hi) == len(cn)) or not lo:
            raise DimensionError("lower, upper and counts must have the same positive length")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("grid bounds must be finite")
        for i, (a, b, c) in enumerate(zip(lo, hi, cn)):
            if not a < b:
                raise ValueError(f"axis {i}: lower {a} must be < upper {b}")
            if c < 1:
                raise ValueError(f"axis {i}: node count must be positive, got {c}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "counts", cn)

    @classmethod
    def parse(cls, text: str, number: Callable[[str], float] = float) -> "BoxGrid":
        """Parse ``lo:hi:count`` per axis, axes joined by commas.

        ``number`` converts the bounds (the CLI passes a constant-expression
        evaluator so ``0:16*pi:9`` works).
        """
        lo, hi, cn = [], [], []
        for part in text.split(","):
            fields = part.strip().split(":")
            if len(fields) != 3:
                raise ValueError(f"bad grid axis {part!r}; expected lo:hi:count")
            lo.append(number(fields[0]))
            hi.append(number(fields[1]))
            cn.append(int(fields[2]))
        return cls(lo, hi, cn)

    @classmethod
    def with_step(cls, lower, upper, step) -> "BoxGrid":
        """Grid whose spacing is ``step`` (per axis) as closely as the box allows."""
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        st = np.broadcast_to(np.asarray(step, dtype=float), lo.shape)
        counts = np.rint((hi - lo) / st).astype(int) + 1
        return cls(lo, hi, counts)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts, dtype=np.int64))

    @property
    def spacing(self) -> np.ndarray:
        lo, hi, cn = map(np.asarray, (self.lower, self.upper, self.counts))
        return np.where(cn > 1, (hi - lo) / np.maximum(cn - 1, 1), 0.0)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, c) if c > 1 else np.array([a])
                for a, b, c in zip(self.lower, self.upper, self.counts)]

    def nodes(self) -> np.ndarray:
        """All nodes as an ``(size, n)`` array in C (last axis fastest) order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def trapezoid_weights(self) -> np.ndarray:
        """Tensor composite-trapezoid weights, flattened like :meth:`nodes`."""
        w = np.ones(1)
        for ax, h in zip(self.axes(), self.spacing):
            wa = np.full(ax.size, h)
            if ax.size > 1:
                wa[0] = wa[-1] = h / 2
            w = np.multiply.outer(w, wa).ravel()
        return w

    def shifted(self, offset) -> "BoxGrid":
        off = as_point(offset, self.n)
        return BoxGrid(np.add(self.lower, off), np.add(self.upper, off), self.counts)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper),
                "counts": list(self.counts)}

    def __str__(self) -> str:
        return ",".join(f"{a:g}:{b:g}:{c}" for a, b, c in zip(self.lower, self.upper, self.counts))


class _Memo:
    """Point-keyed cache; reads are lock-free, insertions take a lock."""

    def __init__(self):
        self._store: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._store)

    def lookup(self, func, pts: np.ndarray) -> np.ndarray:
        keys = [row.tobytes() for row in pts]
        missing = [i for i, k in enumerate(keys) if k not in self._store]
        if missing:
            fresh = func(pts[missing])
            with self._lock:
                for i, v in zip(missing, fresh):
                    self._store.setdefault(keys[i], v)
        return np.stack([self._store[k] for k in keys]) if keys else func(pts)


def _normalize_output(out, m: int, d: int) -> np.ndarray:
    out = np.asarray(out)
    if out.ndim == 1 and d == 1:
        out = out[:, None]
    if out.ndim == 0:
        out = np.broadcast_to(out, (m, d))
    if out.shape != (m, d):
        out = np.broadcast_to(out, (m, d))
    if out.dtype.kind not in "fc":
        out = out.astype(float)
    return out


@dataclass
class FieldFunction:
    """A deterministic function ``R^n -> C^d``.

    ``func`` receives an ``(m, n)`` float array and returns ``(m, d)`` (or
    ``(m,)`` when ``d == 1``) real or complex values.
    """

    n: int
    d: int
    func: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    meta: dict = field(default_factory=dict)
    memoize: bool = False

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise DimensionError("dimensions must be positive")
        self._memo = _Memo() if self.memoize else None

    def __call__(self, pts) -> np.ndarray:
        """Evaluate at points of shape ``(..., n)``; returns ``(..., d)``."""
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1:] != (self.n,):
            raise DimensionError(
                f"{self.label or 'function'} expects points in R^{self.n}, got shape {pts.shape}")
        lead = pts.shape[:-1]
        flat = pts.reshape(-1, self.n)
        m = flat.shape[0]
        if m == 0:
            return np.zeros(lead + (self.d,))
        parts = []
        for start in range(0, m, CHUNK_POINTS):
            chunk = flat[start:start + CHUNK_POINTS]
            if self._memo is not None:
                out = self._memo.lookup(lambda p: _normalize_output(self.func(p), p.shape[0], self.d), chunk)
            else:
                out = _normalize_output(self.func(chunk), chunk.shape[0], self.d)
            parts.append(out)
        out = parts[0] if len(parts) == 1 else np.concatenate(parts)
        return out.reshape(lead + (self.d,))

    def at(self, t) -> np.ndarray:
        """Value at a single point as a length-``d`` array."""
        return self(as_point(t, self.n)[None, :])[0]

    @classmethod
    def constant(cls, value, n: int) -> "FieldFunction":
        c = np.atleast_1d(np.asarray(value))
        return cls(n, c.size, lambda p: np.broadcast_to(c, (p.shape[0], c.size)),
                   label=f"const({value})")

    @classmethod
    def from_scalar(cls, fn: Callable[..., np.ndarray], n: int, label: str = "") -> "FieldFunction":
        """Wrap ``fn(t1, ..., tn)`` taking coordinate arrays and returning a scalar array."""
        return cls(n, 1, lambda p: fn(*(p[:, i] for i in range(n))), label=label)

    def stack(self, other: "FieldFunction") -> "FieldFunction":
        """Range-stacked pair ``t -> (self(t), other(t))``."""
        if other.n != self.n:
            raise DimensionError("stacked functions must share the domain dimension")
        return FieldFunction(self.n, self.d + other.d,
                             lambda p: np.concatenate([self(p), other(p)], axis=-1),
                             label=f"({self.label},{other.label})")

    def __add__(self, other: "FieldFunction") -> "FieldFunction":
        _check_same(self, other)
        return FieldFunction(self.n, self.d, lambda p: self(p) + other(p),
                             label=f"({self.label}+{other.label})")

    def __sub__(self, other: "FieldFunction") -> "FieldFunction":
        _check_same(self, other)
        return FieldFunction(self.n, self.d, lambda p: self(p) - other(p),
                             label=f"({self.label}-{other.label})")

    def scale(self, alpha: complex) -> "FieldFunction":
        return FieldFunction(self.n, self.d, lambda p: alpha * self(p), label=f"{alpha}*{self.label}")


def _check_same(f: FieldFunction, g: FieldFunction) -> None:
    if (f.n, f.d) != (g.n, g.d):
        raise DimensionError(f"shape mismatch: R^{f.n}->C^{f.d} vs R^{g.n}->C^{g.d}")


@dataclass
class ParamFieldFunction:
    """A deterministic function ``R^n x C^p -> C^d``.

    ``func(pts, params)`` receives ``(m, n)`` points and ``(m, p)`` parameters.
    """

    n: int
    p: int
    d: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __call__(self, pts, params) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        params = np.asarray(params)
        if pts.shape[-1:] != (self.n,):
            raise DimensionError(f"expected points in R^{self.n}, got shape {pts.shape}")
        if params.shape[-1:] != (self.p,):
            raise DimensionError(f"expected parameters in C^{self.p}, got shape {params.shape}")
        lead = np.broadcast_shapes(pts.shape[:-1], params.shape[:-1])
        flat_t = np.broadcast_to(pts, lead + (self.n,)).reshape(-1, self.n)
        flat_x = np.broadcast_to(params, lead + (self.p,)).reshape(-1, self.p)
        out = _normalize_output(self.func(flat_t, flat_x), flat_t.shape[0], self.d)
        return out.reshape(lead + (self.d,))

    def freeze(self, x) -> FieldFunction:
        """The section ``t -> G(t; x)`` for a fixed parameter ``x``."""
        xv = np.atleast_1d(np.asarray(x))
        return FieldFunction(self.n, self.d, lambda pts: self(pts, xv[None, :]),
                             label=f"{self.label}(.;{xv.tolist()})")


def _check_dims(f: FieldFunction, g: BoxGrid) -> None:
    if f.n != g.n:
        raise DimensionError(f"function lives on R^{f.n} but grid is {g.n}-dimensional")


def eval_on_grid(f: FieldFunction, g: BoxGrid) -> np.ndarray:
    """Sample ``f`` on every node; result has shape ``g.shape + (d,)``."""
    _check_dims(f, g)
    return f(g.nodes()).reshape(g.shape + (f.d,))


def sup_diff(f: FieldFunction, tau, g: BoxGrid, *, base: np.ndarray | None = None) -> float:
    """``max_t |f(t + tau) - f(t)|`` over the nodes ``t`` of ``g``.

    ``base`` may carry precomputed values of ``f`` on ``g.nodes()``.
    """
    _check_dims(f, g)
    tau = as_point(tau, f.n)
    nodes = g.nodes()
    if base is None:
        base = f(nodes)
    if not np.any(tau):
        return 0.0
    return float(np.max(range_norm(f(nodes + tau) - base)))


def translate(f: FieldFunction, tau) -> FieldFunction:
    """``t -> f(t + tau)``."""
    tau = as_point(tau, f.n)
    return FieldFunction(f.n, f.d, lambda p: f(p + tau), label=f"{f.label}(.+{tau.tolist()})",
                         meta={"translated_by": tau.tolist()})
