"""Symbol calculus for band operators.

Symbols are tabulated with ``t = exp(i phi)`` and

    a(x, phi) = sum_alpha a_alpha(x) exp(-i alpha . phi),

which is the convention under which ``a_alpha(x)`` is the torus mean of
``a(x, t) t^alpha``.  Products and adjoints are computed exactly at the
coefficient level.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .lattice import BandOperator, Box, Coefficient, Shift

OVERFLOW_EXPONENT = 700.0


# --- tabulated symbols -------------------------------------------------------


@dataclass(frozen=True)
class SymbolGrid:
    """Matrix symbol tabulated on the ``M^n`` torus grid ``phi_j = 2 pi k / M``.

    ``values`` has shape ``(M,)*n + (N, N)``.  ``x`` is the lattice point the
    symbol was frozen at (``None`` for x-independent symbols).
    """

    n: int
    N: int
    M: int
    values: np.ndarray
    annulus_r: float = np.inf
    x: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.annulus_r <= 1:
            raise ValueError("the analyticity annulus radius must exceed 1")
        expected = (self.M,) * self.n + (self.N, self.N)
        if self.values.shape != expected:
            raise ValueError(f"values have shape {self.values.shape}, expected {expected}")

    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M


def torus_grid(n: int, M: int) -> np.ndarray:
    """All grid nodes as an ``(M**n, n)`` array of angles, first axis slowest."""
    phi = 2 * np.pi * np.arange(M) / M
    mesh = np.meshgrid(*([phi] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def symbol_at(A: BandOperator, phi: np.ndarray, x=None) -> np.ndarray:
    """Evaluate ``sum_alpha a_alpha(x) exp(-i alpha.phi)`` at angles ``phi`` (``(K, n)``)."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    x = np.zeros((1, A.n), dtype=np.int64) if x is None else np.asarray(x, dtype=np.int64).reshape(1, A.n)
    out = np.zeros((phi.shape[0], A.N, A.N), dtype=complex)
    for alpha, coeff in A.coeffs.items():
        a = np.asarray(coeff(x))[0]
        phase = np.exp(-1j * (phi @ np.asarray(alpha, dtype=float)))
        out += phase[:, None, None] * a
    return out


def tabulate(A: BandOperator, M: int, x=None, annulus_r: float = np.inf) -> SymbolGrid:
    """Tabulate the symbol of ``A`` (frozen at ``x``) on the ``M^n`` grid."""
    vals = symbol_at(A, torus_grid(A.n, M), x)
    vals = vals.reshape((M,) * A.n + (A.N, A.N))
    x_key = None if (x is None and A.is_constant) else tuple(np.zeros(A.n, int) if x is None else x)
    return SymbolGrid(A.n, A.N, M, vals, annulus_r, x_key)


def fourier_coeffs(s: SymbolGrid, max_shift: Optional[int] = None, tol: float = 0.0) -> dict[Shift, np.ndarray]:
    """Torus means ``a_alpha = mean_phi a(phi) exp(i alpha.phi)`` for ``|alpha|_inf <= max_shift``.

    Exact for band-limited symbols with bandwidth below ``M/2``.  Entries with
    norm ``<= tol`` are dropped.
    """
    if max_shift is None:
        max_shift = (s.M - 1) // 2
    if s.M < 2 * max_shift + 1:
        raise ValueError(f"grid M={s.M} is too coarse for shifts up to {max_shift}")
    axes = tuple(range(s.n))
    table = np.fft.ifftn(s.values, axes=axes)
    out = {}
    for alpha in itertools.product(range(-max_shift, max_shift + 1), repeat=s.n):
        c = table[tuple(a % s.M for a in alpha)]
        if tol > 0 and np.linalg.norm(c, 2) <= tol:
            continue
        out[alpha] = c
    return out


def from_coeffs(n: int, N: int, table: dict[Shift, np.ndarray]) -> BandOperator:
    return BandOperator(n, N, {a: Coefficient.constant(np.asarray(v), N) for a, v in table.items()})


# --- exact calculus ----------------------------------------------------------


def compose(A: BandOperator, B: BandOperator) -> BandOperator:
    """``A B`` with ``c_gamma(x) = sum_{alpha+beta=gamma} a_alpha(x) b_beta(x - alpha)``."""
    A._check_compatible(B)
    terms: dict[Shift, list[tuple[Shift, Coefficient, Coefficient]]] = {}
    for alpha, a in A.coeffs.items():
        for beta, b in B.coeffs.items():
            gamma = tuple(i + j for i, j in zip(alpha, beta))
            terms.setdefault(gamma, []).append((alpha, a, b))

    coeffs = {}
    for gamma, parts in terms.items():
        if all(a.is_constant and b.is_constant for _, a, b in parts):
            total = sum(a.value @ b.value for _, a, b in parts)
            coeffs[gamma] = Coefficient.constant(total, A.N)
        else:
            coeffs[gamma] = Coefficient.function(_product_sum(parts), A.N)
    return BandOperator(A.n, A.N, coeffs)


def _product_sum(parts):
    def fn(pts):
        pts = np.asarray(pts, dtype=np.int64)
        total = 0
        for alpha, a, b in parts:
            total = total + np.matmul(a(pts), b(pts - np.asarray(alpha)))
        return total

    return fn


def adjoint(A: BandOperator) -> BandOperator:
    """Hilbert-space adjoint: ``b_{-alpha}(x) = a_alpha(x + alpha)^*``."""
    coeffs = {}
    for alpha, a in A.coeffs.items():
        neg = tuple(-i for i in alpha)
        if a.is_constant:
            coeffs[neg] = Coefficient.constant(a.value.conj().T, A.N)
        else:
            coeffs[neg] = Coefficient.function(_adjoint_fn(a, alpha), A.N)
    return BandOperator(A.n, A.N, coeffs)


def _adjoint_fn(a: Coefficient, alpha):
    shift = np.asarray(alpha, dtype=np.int64)

    def fn(pts):
        return np.conj(np.swapaxes(a(np.asarray(pts) + shift), -1, -2))

    return fn


def is_self_adjoint(A: BandOperator, window: Box, atol: float = 0.0) -> bool:
    from .lattice import coefficients_equal

    return coefficients_equal(A, adjoint(A), window, atol)


# --- weights -----------------------------------------------------------------


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class WeightSpec:
    """Exponential weight ``w = exp(v)`` with ``v`` smooth on R^n.

    ``slope_bound`` is ``sup_j sup_x |dv/dx_j|``; the weight lies in the class
    attached to every annulus radius ``r > exp(slope_bound)``.
    """

    n: int
    v: Callable[[np.ndarray], np.ndarray]
    grad_v: Callable[[np.ndarray], np.ndarray]
    slope_bound: float
    slowly_oscillating: bool = True
    label: str = "custom"

    @property
    def class_r(self) -> float:
        return float(np.exp(self.slope_bound))

    def in_class(self, r: float, pts: np.ndarray) -> bool:
        """Check ``|dv/dx_j| < log r`` on sampled points."""
        g = np.abs(self.grad_v(np.asarray(pts, dtype=float)))
        return bool(np.all(g < np.log(r)))

    def power(self, mu: float) -> "WeightSpec":
        v, g = self.v, self.grad_v
        return WeightSpec(
            self.n,
            lambda x: mu * v(x),
            lambda x: mu * g(x),
            abs(mu) * self.slope_bound,
            self.slowly_oscillating,
            f"{self.label}^{mu:g}",
        )

    def __call__(self, pts) -> np.ndarray:
        return np.exp(self.v(np.asarray(pts, dtype=float)))

    def theta(self, x, y) -> np.ndarray:
        """Line averages ``int_0^1 grad v((1-s) x + s y) ds`` (16-point Gauss-Legendre).

        ``x`` and ``y`` are ``(P, n)``; the result is ``(P, n)``.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        s = 0.5 * (_GL_NODES + 1.0)
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        for sk, wk in zip(s, _GL_WEIGHTS):
            out += 0.5 * wk * self.grad_v((1 - sk) * x + sk * y)
        return out


def radial_weight(n: int, slope: float) -> WeightSpec:
    """``v(x) = slope * sqrt(1 + |x|^2)``, a smooth stand-in for ``slope*|x|``."""

    def v(x):
        x = np.atleast_2d(x)
        return slope * np.sqrt(1.0 + (x**2).sum(axis=1))

    def grad(x):
        x = np.atleast_2d(x)
        return slope * x / np.sqrt(1.0 + (x**2).sum(axis=1))[:, None]

    return WeightSpec(n, v, grad, abs(slope), True, f"radial({slope:g})")


def linear_weight(slopes: Sequence[float]) -> WeightSpec:
    """``v(x) = gamma . x``; constant gradient."""
    gamma = np.asarray(slopes, dtype=float)

    def v(x):
        return np.atleast_2d(x) @ gamma

    def grad(x):
        return np.broadcast_to(gamma, np.atleast_2d(x).shape).copy()

    return WeightSpec(len(gamma), v, grad, float(np.abs(gamma).max()), True, "linear")


def subexponential_weight(n: int, alpha: float, beta: float) -> WeightSpec:
    """``v(x) = alpha * (1 + |x|^2)^(beta/2)`` with ``0 < beta < 1``; gradient tends to 0."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")

    def v(x):
        x = np.atleast_2d(x)
        return alpha * (1.0 + (x**2).sum(axis=1)) ** (beta / 2)

    def grad(x):
        x = np.atleast_2d(x)
        return alpha * beta * x * ((1.0 + (x**2).sum(axis=1)) ** (beta / 2 - 1))[:, None]

    return WeightSpec(n, v, grad, alpha * beta, True, f"subexp({alpha:g},{beta:g})")


def weight_conjugate(A: BandOperator, w: WeightSpec, mu: float = 1.0) -> BandOperator:
    """``w^mu A w^-mu``: the coefficient of ``V_alpha`` picks up ``exp(mu (v(x) - v(x - alpha)))``.

    Raises ``OverflowError`` at points where the exponent exceeds 700 in
    absolute value.
    """
    if not -1.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [-1, 1]")
    if mu == 0.0:
        return BandOperator(A.n, A.N, dict(A.coeffs), A.limits)
    coeffs = {}
    for alpha, a in A.coeffs.items():
        if not any(alpha):
            coeffs[alpha] = a
        else:
            coeffs[alpha] = Coefficient.function(_conjugated_fn(a, alpha, w, mu), A.N)
    return BandOperator(A.n, A.N, coeffs)


def _conjugated_fn(a: Coefficient, alpha, w: WeightSpec, mu: float):
    shift = np.asarray(alpha, dtype=np.int64)

    def fn(pts):
        pts = np.asarray(pts, dtype=np.int64)
        expo = mu * (w.v(pts.astype(float)) - w.v((pts - shift).astype(float)))
        if np.any(np.abs(expo) > OVERFLOW_EXPONENT):
            bad = pts[np.argmax(np.abs(expo))]
            raise OverflowError(f"conjugation exponent exceeds {OVERFLOW_EXPONENT} at {tuple(bad)}")
        return np.exp(expo)[:, None, None] * a(pts)

    return fn


def conjugation_exponent(w: WeightSpec, x, alpha, mu: float = 1.0) -> np.ndarray:
    """``mu * sum_j alpha_j theta_j(x, x - alpha)`` via quadrature (equals ``mu (v(x) - v(x-alpha))``)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    alpha = np.asarray(alpha, dtype=float)
    return mu * (w.theta(x, x - alpha) @ alpha)


# --- limit operators ---------------------------------------------------------


@dataclass(frozen=True)
class LimitFamily:
    """Declared partial limits of a slowly oscillating operator.

    ``parameters`` are the sampled partial limits (e.g. values of the
    potential at infinity) and ``build`` maps one of them to the
    corresponding constant-coefficient limit operator.
    """

    parameters: tuple
    build: Callable[[object], BandOperator]
    monotone: bool = True


def limit_symbol(A: BandOperator) -> list[BandOperator]:
    """Constant-coefficient limit operators of ``A`` over its declared tail family."""
    if A.limits is None:
        if A.is_constant:
            return [A]
        raise ValueError("operator has non-constant coefficients but no declared tail data")
    fam: LimitFamily = A.limits
    return [fam.build(p) for p in fam.parameters]

