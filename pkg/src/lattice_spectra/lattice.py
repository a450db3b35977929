"""Lattice boxes, lattice functions and band operators on Z^n.

Shift convention: ``(V_alpha u)(x) = u(x - alpha)``.  A band operator is the
finite sum ``A = sum_alpha a_alpha(x) V_alpha`` so that

    (A u)(x) = sum_alpha a_alpha(x) u(x - alpha).

Coefficients are callables over all of Z^n, which lets one operator be
truncated to boxes of any size.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

Shift = tuple[int, ...]


@dataclass(frozen=True)
class Box:
    """The cube ``{x in Z^n : |x_j| <= L}`` enumerated lexicographically.

    The first coordinate varies slowest, so for ``n = 2, L = 1`` the order is
    ``(-1,-1), (-1,0), (-1,1), (0,-1), ...``.
    """

    n: int
    L: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if self.L < 0:
            raise ValueError(f"radius must be non-negative, got {self.L}")

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def size(self) -> int:
        return self.side**self.n

    @cached_property
    def points(self) -> np.ndarray:
        rng = range(-self.L, self.L + 1)
        pts = np.array(list(itertools.product(rng, repeat=self.n)), dtype=np.int64)
        pts.setflags(write=False)
        return pts.reshape(self.size, self.n)

    def point_at(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.size:
            raise IndexError(i)
        return tuple(int(c) for c in self.points[i])

    def index_of(self, point) -> int:
        idx = self.indices(np.asarray(point, dtype=np.int64).reshape(1, self.n))[0]
        if idx < 0:
            raise KeyError(f"{tuple(point)} is outside the box")
        return int(idx)

    def indices(self, pts: np.ndarray) -> np.ndarray:
        """Flat indices of ``pts`` (shape ``(P, n)``); -1 marks points outside."""
        pts = np.asarray(pts, dtype=np.int64)
        shifted = pts + self.L
        inside = np.all((shifted >= 0) & (shifted < self.side), axis=1)
        weights = self.side ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        idx = shifted @ weights
        return np.where(inside, idx, -1)

    def sup_norms(self) -> np.ndarray:
        return np.abs(self.points).max(axis=1)

    def euclidean_norms(self) -> np.ndarray:
        return np.sqrt((self.points.astype(float) ** 2).sum(axis=1))


@dataclass(frozen=True)
class LatticeFunction:
    """A C^N-valued function on a box, stored as a ``(points, N)`` array."""

    box: Box
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.box.size:
            raise ValueError(
                f"expected {self.box.size} rows for the box, got {vals.shape[0]}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @classmethod
    def delta(cls, box: Box, point, N: int = 1, component: int = 0) -> "LatticeFunction":
        vals = np.zeros((box.size, N), dtype=complex)
        vals[box.index_of(point), component] = 1.0
        return cls(box, vals)

    @classmethod
    def from_callable(cls, box: Box, fn: Callable[[np.ndarray], np.ndarray]) -> "LatticeFunction":
        return cls(box, np.asarray(fn(box.points), dtype=complex))

    def at(self, point) -> np.ndarray:
        return self.values[self.box.index_of(point)]

    def norm(self, p: float = 2) -> float:
        pointwise = np.linalg.norm(self.values, axis=1)
        if np.isinf(p):
            return float(pointwise.max(initial=0.0))
        return float((pointwise**p).sum() ** (1.0 / p))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def _as_matrix_field(values, P: int, N: int) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 0:
        arr = np.broadcast_to(arr * np.eye(N), (P, N, N))
    elif arr.ndim == 1 and N == 1:
        arr = arr.reshape(P, 1, 1)
    elif arr.ndim == 1:
        # per-point scalars times the identity
        arr = arr[:, None, None] * np.eye(N)
    elif arr.ndim == 2:
        arr = np.broadcast_to(arr, (P, N, N))
    if arr.shape != (P, N, N):
        raise ValueError(f"coefficient returned shape {arr.shape}, expected {(P, N, N)}")
    return arr


@dataclass(frozen=True)
class Coefficient:
    """Matrix-valued coefficient ``a_alpha: Z^n -> C^{N x N}``.

    ``fn`` maps integer points of shape ``(P, n)`` to an array of shape
    ``(P, N, N)`` (scalars and per-point scalars are broadcast against the
    identity).  ``value`` is set for constant coefficients.
    """

    N: int
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    value: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.value is not None:
            v = np.asarray(self.value, dtype=complex)
            if v.ndim == 0:
                v = v * np.eye(self.N)
            v = v.reshape(self.N, self.N).copy()
            v.setflags(write=False)
            object.__setattr__(self, "value", v)
        elif self.fn is None:
            raise ValueError("a coefficient needs either fn or value")

    @classmethod
    def constant(cls, value, N: Optional[int] = None) -> "Coefficient":
        v = np.asarray(value, dtype=complex)
        if N is None:
            N = 1 if v.ndim == 0 else v.shape[0]
        return cls(N=N, value=v)

    @classmethod
    def function(cls, fn: Callable[[np.ndarray], np.ndarray], N: int) -> "Coefficient":
        return cls(N=N, fn=fn)

    @property
    def is_constant(self) -> bool:
        return self.value is not None

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64)
        P = pts.shape[0]
        if self.value is not None:
            return np.broadcast_to(self.value, (P, self.N, self.N))
        return _as_matrix_field(self.fn(pts), P, self.N)

    def shifted(self, h) -> "Coefficient":
        """The coefficient ``x -> a(x + h)``."""
        if self.value is not None:
            return self
        h = np.asarray(h, dtype=np.int64)
        fn = self.fn
        return Coefficient(N=self.N, fn=lambda pts: fn(np.asarray(pts) + h))


@dataclass(frozen=True)
class BandOperator:
    """Finite sum ``sum_{alpha in S} a_alpha V_alpha`` on ``l^p(Z^n, C^N)``.

    ``limits`` optionally carries the declared partial-limit family of a
    slowly oscillating operator (see :func:`lattice_spectra.symbols.limit_symbol`).
    """

    n: int
    N: int
    coeffs: Mapping[Shift, Coefficient]
    limits: Optional[object] = field(default=None, compare=False)

    def __post_init__(self):
        clean = {}
        for alpha, c in self.coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise ValueError(f"shift {alpha} does not live in Z^{self.n}")
            if not isinstance(c, Coefficient):
                c = Coefficient.constant(c, self.N)
            if c.N != self.N:
                raise ValueError(f"coefficient at {alpha} has fiber {c.N}, expected {self.N}")
            clean[alpha] = c
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    @property
    def support(self) -> tuple[Shift, ...]:
        return tuple(self.coeffs)

    @property
    def is_constant(self) -> bool:
        return all(c.is_constant for c in self.coeffs.values())

    @property
    def max_shift(self) -> int:
        return max((max(abs(a) for a in alpha) for alpha in self.coeffs), default=0)

    def constant_coeffs(self) -> dict[Shift, np.ndarray]:
        if not self.is_constant:
            raise ValueError("operator has non-constant coefficients")
        return {alpha: c.value for alpha, c in self.coeffs.items()}

    def coefficient(self, alpha) -> Coefficient:
        alpha = tuple(alpha)
        if alpha in self.coeffs:
            return self.coeffs[alpha]
        return Coefficient.constant(np.zeros((self.N, self.N)), self.N)

    def with_limits(self, limits) -> "BandOperator":
        return BandOperator(self.n, self.N, self.coeffs, limits)

    def _check_compatible(self, other: "BandOperator"):
        if (self.n, self.N) != (other.n, other.N):
            raise ValueError(
                f"incompatible operators: (n, N) = {(self.n, self.N)} vs {(other.n, other.N)}"
            )

    def __add__(self, other: "BandOperator") -> "BandOperator":
        self._check_compatible(other)
        coeffs = dict(self.coeffs)
        for alpha, c in other.coeffs.items():
            coeffs[alpha] = _add_coeffs(coeffs[alpha], c) if alpha in coeffs else c
        return BandOperator(self.n, self.N, coeffs)

    def scale(self, s: complex) -> "BandOperator":
        return BandOperator(self.n, self.N, {a: _scale_coeff(c, s) for a, c in self.coeffs.items()})

    def __neg__(self) -> "BandOperator":
        return self.scale(-1.0)

    def __sub__(self, other: "BandOperator") -> "BandOperator":
        return self + (-other)

    def __matmul__(self, other: "BandOperator") -> "BandOperator":
        from .symbols import compose

        return compose(self, other)

    @classmethod
    def identity(cls, n: int, N: int = 1) -> "BandOperator":
        return cls(n, N, {(0,) * n: Coefficient.constant(np.eye(N), N)})

    @classmethod
    def shift(cls, alpha, N: int = 1) -> "BandOperator":
        alpha = tuple(alpha)
        return cls(len(alpha), N, {alpha: Coefficient.constant(np.eye(N), N)})

    @classmethod
    def multiplication(cls, n: int, N: int, fn) -> "BandOperator":
        """Multiplication by the matrix function ``fn`` (shift zero only)."""
        return cls(n, N, {(0,) * n: Coefficient.function(fn, N)})


def _add_coeffs(a: Coefficient, b: Coefficient) -> Coefficient:
    if a.is_constant and b.is_constant:
        return Coefficient.constant(a.value + b.value, a.N)
    return Coefficient.function(lambda pts: a(pts) + b(pts), a.N)


def _scale_coeff(a: Coefficient, s: complex) -> Coefficient:
    if a.is_constant:
        return Coefficient.constant(s * a.value, a.N)
    return Coefficient.function(lambda pts: s * a(pts), a.N)


def _check_dims(A: BandOperator, u: LatticeFunction):
    if A.n != u.box.n or A.N != u.N:
        raise ValueError(
            f"dimension mismatch: operator (n={A.n}, N={A.N}), function (n={u.box.n}, N={u.N})"
        )


def apply(A: BandOperator, u: LatticeFunction) -> LatticeFunction:
    """Exact finite sum ``(Au)(x) = sum_alpha a_alpha(x) u(x - alpha)`` on u's box.

    ``u`` is extended by zero outside its box.
    """
    _check_dims(A, u)
    box = u.box
    pts = box.points
    out = np.zeros_like(u.values)
    for alpha, coeff in A.coeffs.items():
        src = box.indices(pts - np.asarray(alpha))
        mask = src >= 0
        if not mask.any():
            continue
        vals = coeff(pts[mask])
        out[mask] += np.einsum("pij,pj->pi", vals, u.values[src[mask]])
    return LatticeFunction(box, out)


def coefficient_sup(coeff: Coefficient, window: Box) -> float:
    """``sup_x ||a(x)||_2`` over the window (exact for constant coefficients)."""
    if coeff.is_constant:
        return float(np.linalg.norm(coeff.value, 2))
    vals = coeff(window.points)
    return float(np.linalg.norm(vals, 2, axis=(1, 2)).max())


def wiener_norm(A: BandOperator, window: Box) -> float:
    """``sum_alpha sup_x ||a_alpha(x)||`` with the sup taken over ``window``."""
    return float(sum(coefficient_sup(c, window) for c in A.coeffs.values()))


def _truncation_blocks(A: BandOperator, box: Box):
    if box.n != A.n:
        raise ValueError(f"box dimension {box.n} does not match operator dimension {A.n}")
    if box.L < A.max_shift:
        raise ValueError(
            f"box radius {box.L} is smaller than the operator bandwidth {A.max_shift}"
        )
    pts = box.points
    for alpha, coeff in A.coeffs.items():
        src = box.indices(pts - np.asarray(alpha))
        mask = src >= 0
        rows = np.nonzero(mask)[0]
        yield rows, src[mask], coeff(pts[mask])


def truncate(A: BandOperator, box: Box) -> np.ndarray:
    """Dense finite section of ``A`` on ``box`` (plain restriction).

    Block ``(i(x), i(x - alpha))`` holds ``a_alpha(x)``; the layout is
    point-major with the fiber index fastest.
    """
    P, N = box.size, A.N
    M = np.zeros((P, N, P, N), dtype=complex)
    for rows, cols, vals in _truncation_blocks(A, box):
        M[rows, :, cols, :] += vals
    return M.reshape(P * N, P * N)


def truncate_sparse(A: BandOperator, box: Box) -> sp.csr_matrix:
    """Sparse (CSR) version of :func:`truncate` for large boxes."""
    P, N = box.size, A.N
    r_all, c_all, v_all = [], [], []
    fiber = np.arange(N)
    for rows, cols, vals in _truncation_blocks(A, box):
        r = (rows[:, None, None] * N + fiber[None, :, None]).repeat(N, axis=2)
        c = (cols[:, None, None] * N + fiber[None, None, :]).repeat(N, axis=1)
        r_all.append(r.ravel())
        c_all.append(c.ravel())
        v_all.append(np.asarray(vals).ravel())
    mat = sp.coo_matrix(
        (np.concatenate(v_all), (np.concatenate(r_all), np.concatenate(c_all))),
        shape=(P * N, P * N),
    )
    mat = mat.tocsr()
    mat.eliminate_zeros()
    return mat


def shift_conjugate(A: BandOperator, h) -> BandOperator:
    """``V_{-h} A V_h``: every coefficient becomes ``x -> a_alpha(x + h)``."""
    h = tuple(int(c) for c in h)
    if len(h) != A.n:
        raise ValueError(f"shift {h} does not live in Z^{A.n}")
    return BandOperator(A.n, A.N, {a: c.shifted(h) for a, c in A.coeffs.items()}, A.limits)


def coefficients_equal(A: BandOperator, B: BandOperator, window: Box, atol: float = 0.0) -> bool:
    """Coefficient-level equality of two operators, sampled on ``window``.

    Shifts missing from one support are compared against zero.
    """
    A._check_compatible(B)
    pts = window.points
    for alpha in set(A.coeffs) | set(B.coeffs):
        a = np.asarray(A.coefficient(alpha)(pts))
        b = np.asarray(B.coefficient(alpha)(pts))
        if atol == 0.0:
            if not np.array_equal(a, b):
                return False
        elif not np.allclose(a, b, rtol=0.0, atol=atol):
            return False
    return True
