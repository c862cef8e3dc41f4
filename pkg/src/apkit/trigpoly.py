"""Multivariate trigonometric polynomials ``sum_k c_k exp(i <lambda_k, t>)``.

Frequencies are arbitrary real vectors; components within ``SNAP_TOL`` of an
integer are snapped to it so that lattice arithmetic stays exact.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping

import numpy as np

from .field import DimensionError, FieldFunction

SNAP_TOL = 1e-12


def canonical_freq(freq) -> tuple[float, ...]:
    f = np.atleast_1d(np.asarray(freq, dtype=float))
    r = np.rint(f)
    f = np.where(np.abs(f - r) <= SNAP_TOL, r, f)
    # -0.0 and 0.0 must collide
    return tuple(float(v) + 0.0 for v in f)


class TrigPolynomial:
    """Immutable trigonometric polynomial on ``R^n`` with values in ``C^d``."""

    __slots__ = ("n", "d", "_terms")

    def __init__(self, n: int, terms: Mapping | Iterable = (), d: int = 1):
        if n < 1 or d < 1:
            raise DimensionError("dimensions must be positive")
        self.n, self.d = n, d
        acc: dict[tuple, np.ndarray] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for freq, coef in items:
            key = canonical_freq(freq)
            if len(key) != n:
                raise DimensionError(f"frequency {freq} is not in R^{n}")
            c = np.atleast_1d(np.asarray(coef, dtype=complex))
            if c.shape != (d,):
                raise DimensionError(f"coefficient {coef} is not in C^{d}")
            acc[key] = acc[key] + c if key in acc else c.copy()
        self._terms = {k: acc[k] for k in sorted(acc) if np.any(acc[k] != 0)}

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, n: int, d: int = 1) -> "TrigPolynomial":
        return cls(n, (), d)

    @classmethod
    def real(cls, n: int, terms: Mapping | Iterable, d: int = 1) -> "TrigPolynomial":
        """Real-valued polynomial: coefficients are projected onto
        ``c_{-lambda} = conj(c_lambda)``, i.e. the result is ``Re`` of the input."""
        raw = cls(n, terms, d)
        sym: dict[tuple, np.ndarray] = {}
        for k, c in raw._terms.items():
            neg = canonical_freq(-np.asarray(k))
            sym[k] = sym.get(k, 0) + c / 2
            sym[neg] = sym.get(neg, 0) + np.conj(c) / 2
        return cls(n, sym, d)

    @classmethod
    def random_lattice(cls, rng: np.random.Generator, n: int, order: int,
                       real: bool = True) -> "TrigPolynomial":
        """Standard-normal coefficients on ``{k in Z^n : |k|_inf <= order}``."""
        ks = lattice_box(n, order)
        coefs = rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks))
        items = zip(map(tuple, ks), coefs)
        return cls.real(n, items) if real else cls(n, items)

    # access -------------------------------------------------------------
    @property
    def terms(self) -> dict[tuple, np.ndarray]:
        return dict(self._terms)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array(list(self._terms), dtype=float).reshape(-1, self.n)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array(list(self._terms.values()), dtype=complex).reshape(-1, self.d)

    def __len__(self) -> int:
        return len(self._terms)

    def __repr__(self) -> str:
        return f"TrigPolynomial(n={self.n}, d={self.d}, terms={len(self)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrigPolynomial):
            return NotImplemented
        return (self.n, self.d) == (other.n, other.d) and self._terms.keys() == other._terms.keys() \
            and all(np.array_equal(self._terms[k], other._terms[k]) for k in self._terms)

    def is_lattice(self) -> bool:
        return all(float(v).is_integer() for k in self._terms for v in k)

    def lattice_order(self) -> int | None:
        """``max |k|_inf`` over stored frequencies; ``None`` off the integer lattice."""
        if not self.is_lattice():
            return None
        if not self._terms:
            return 0
        return int(np.max(np.abs(self.frequencies)))

    # evaluation ---------------------------------------------------------
    def __call__(self, pts) -> np.ndarray:
        """Values at points of shape ``(..., n)``; returns ``(..., d)``."""
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1:] != (self.n,):
            raise DimensionError(f"expected points in R^{self.n}, got shape {pts.shape}")
        lead = pts.shape[:-1]
        flat = pts.reshape(-1, self.n)
        if not self._terms:
            return np.zeros(lead + (self.d,), dtype=complex)
        freqs, coefs = self.frequencies, self.coefficients
        out = np.empty((flat.shape[0], self.d), dtype=complex)
        step = max(1, (1 << 22) // len(freqs))
        for s in range(0, flat.shape[0], step):
            out[s:s + step] = np.exp(1j * (flat[s:s + step] @ freqs.T)) @ coefs
        return out.reshape(lead + (self.d,))

    def eval(self, t) -> np.ndarray:
        return self(np.atleast_1d(np.asarray(t, dtype=float))[None, :])[0]

    def as_field(self) -> FieldFunction:
        return FieldFunction(self.n, self.d, self, label=f"trigpoly[{len(self)} terms]")

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "TrigPolynomial") -> None:
        if (self.n, self.d) != (other.n, other.d):
            raise DimensionError("polynomials live in different spaces")

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        self._check(other)
        return TrigPolynomial(self.n, list(self._terms.items()) + list(other._terms.items()), self.d)

    def __neg__(self) -> "TrigPolynomial":
        return TrigPolynomial(self.n, {k: -c for k, c in self._terms.items()}, self.d)

    def __sub__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return self + (-other)

    def scale(self, alpha: complex) -> "TrigPolynomial":
        return TrigPolynomial(self.n, {k: alpha * c for k, c in self._terms.items()}, self.d)

    def __mul__(self, other):
        if isinstance(other, TrigPolynomial):
            return self.multiply(other)
        return self.scale(other)

    __rmul__ = __mul__

    def multiply(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """Product of scalar-valued polynomials; colliding frequencies merge."""
        self._check(other)
        if self.d != 1:
            raise NotImplementedError("products are only defined for scalar (d=1) polynomials")
        items = [(np.add(k1, k2), c1 * c2)
                 for k1, c1 in self._terms.items() for k2, c2 in other._terms.items()]
        return TrigPolynomial(self.n, items, 1)

    def wiener_norm(self) -> float:
        """Sum of the Euclidean norms of the coefficients."""
        return float(sum(np.linalg.norm(c) for c in self._terms.values()))

    def sup_norm_grid(self, N: int) -> float:
        """``max |P|`` over ``{2 pi k / N : 0 <= k < N}^n`` (integer frequencies only)."""
        if N < 1:
            raise ValueError("N must be positive")
        if not self.is_lattice():
            raise ValueError("sup_norm_grid needs integer frequencies (2pi-periodic polynomial)")
        return float(np.max(np.abs(self.tensor_values(periodic_nodes(N)))))

    def tensor_values(self, axis_nodes: np.ndarray) -> np.ndarray:
        """Values of a scalar lattice polynomial on ``axis_nodes^n``.

        Contracts the dense coefficient block one axis at a time, so the cost is
        ``O(len(axis_nodes)^n * (2l+1))`` rather than per-point summation.
        """
        if self.d != 1 or not self.is_lattice():
            raise ValueError("tensor_values needs a scalar lattice polynomial")
        l = self.lattice_order()
        block = np.zeros((2 * l + 1,) * self.n, dtype=complex)
        for k, c in self._terms.items():
            block[tuple(int(v) + l for v in k)] = c[0]
        x = np.asarray(axis_nodes, dtype=float)
        basis = np.exp(1j * np.outer(x, np.arange(-l, l + 1)))  # (m, 2l+1)
        out = block
        for _ in range(self.n):
            # contract the leading coefficient axis, append the point axis at the end
            out = np.tensordot(out, basis, axes=([0], [1]))
        return out

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "terms": [
            {"freq": list(k), "re": c.real.tolist(), "im": c.imag.tolist()}
            for k, c in self._terms.items()]}

    @classmethod
    def from_dict(cls, doc: dict) -> "TrigPolynomial":
        n, d = int(doc["n"]), int(doc["d"])
        items = [(t["freq"], np.asarray(t["re"], float) + 1j * np.asarray(t.get("im", [0.0] * d), float))
                 for t in doc["terms"]]
        return cls(n, items, d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrigPolynomial":
        return cls.from_dict(json.loads(text))


def lattice_box(n: int, order: int) -> np.ndarray:
    """All ``k in Z^n`` with ``|k|_inf <= order``, lexicographic."""
    r = np.arange(-order, order + 1)
    mesh = np.meshgrid(*([r] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def periodic_nodes(N: int) -> np.ndarray:
    return 2 * np.pi * np.arange(N) / N
