"""Model Hamiltonians: magnetic Schrodinger, lattice Dirac and square-root Klein-Gordon.

Also holds the potential-profile library.  Each profile carries declared tail
data (liminf / limsup of its ordered eigenvalue branches at infinity) and a
sampler for its partial limits, which the model builders turn into the
constant-coefficient limit-operator family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .lattice import BandOperator, Box, Coefficient
from .symbols import LimitFamily, SymbolGrid, adjoint, fourier_coeffs, from_coeffs, torus_grid

CONTINUUM_SAMPLES = 33


@dataclass(frozen=True)
class PhysicalParams:
    hbar: float = 1.0
    c: float = 1.0
    m: float = 1.0
    e: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "c", "m", "e"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")

    @property
    def rest_energy(self) -> float:
        return self.m * self.c**2


# --- tail data and profiles --------------------------------------------------


@dataclass(frozen=True)
class TailData:
    """liminf / limsup of the ordered eigenvalue branches ``lambda_j(Phi(x))``.

    For ``n = 1`` the two ends may be declared separately through ``sides``
    as ``(tail at -inf, tail at +inf)``; the global values then cover both.
    """

    lam_inf: tuple[float, ...]
    lam_sup: tuple[float, ...]
    sides: Optional[tuple["TailData", "TailData"]] = None

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lam_inf)
        hi = tuple(float(v) for v in self.lam_sup)
        object.__setattr__(self, "lam_inf", lo)
        object.__setattr__(self, "lam_sup", hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lam_inf and lam_sup need the same, non-zero length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("tail data has lam_inf > lam_sup for some branch")
        if any(a > b for a, b in zip(lo, lo[1:])) or any(a > b for a, b in zip(hi, hi[1:])):
            raise ValueError("tail branches must be ordered (non-decreasing in j)")

    @property
    def N(self) -> int:
        return len(self.lam_inf)

    @classmethod
    def scalar(cls, inf: float, sup: float) -> "TailData":
        return cls((inf,), (sup,))

    @classmethod
    def two_sided(cls, minus: "TailData", plus: "TailData") -> "TailData":
        lo = tuple(min(a, b) for a, b in zip(minus.lam_inf, plus.lam_inf))
        hi = tuple(max(a, b) for a, b in zip(minus.lam_sup, plus.lam_sup))
        return cls(lo, hi, (minus, plus))

    @property
    def phi_inf(self) -> float:
        return self.lam_inf[0]

    @property
    def phi_sup(self) -> float:
        return self.lam_sup[-1]


def _hermitian_field(values, P: int, N: int) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None, None] * np.eye(N)
    elif arr.ndim == 2:
        arr = np.broadcast_to(arr, (P, N, N))
    return arr


@dataclass(frozen=True)
class PotentialProfile:
    """A Hermitian potential ``Phi: Z^n -> C^{N x N}`` with declared tail data.

    ``limit_values(k)`` returns Hermitian matrices sampling the set of partial
    limits ``Phi^g``; for a continuum of limits ``k`` equally spaced interior
    samples are taken together with both endpoints.
    """

    kind: str
    n: int
    N: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    tail: TailData
    limit_values: Callable[[int], list[np.ndarray]]
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.tail.N != self.N:
            raise ValueError(f"tail declares {self.tail.N} branches but N = {self.N}")

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        return _hermitian_field(self.evaluator(pts), pts.shape[0], self.N)

    def check_hermitian(self, pts, atol: float = 0.0) -> bool:
        vals = self(pts)
        return bool(np.all(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2))) <= atol))

    def probe_tail(self, R: int, samples: int = 4096, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Min / max of each eigenvalue branch over sampled points with ``R <= |x|_inf <= 2R``.

        In one dimension every point of the shell is used.
        """
        if self.n == 1:
            x = np.arange(R, 2 * R + 1)
            pts = np.concatenate([x, -x])[:, None]
        else:
            rng = np.random.default_rng(seed)
            pts = rng.integers(-2 * R, 2 * R + 1, size=(samples, self.n))
            radius = rng.integers(R, 2 * R + 1, size=samples)
            axis = rng.integers(0, self.n, size=samples)
            sign = rng.choice([-1, 1], size=samples)
            pts[np.arange(samples), axis] = sign * radius
        eig = np.linalg.eigvalsh(self(pts))
        return eig.min(axis=0), eig.max(axis=0)


def _branches(mat: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) for v in np.linalg.eigvalsh(mat))


def constant_profile(value, n: int) -> PotentialProfile:
    """``Phi(x) = value`` (scalar or Hermitian matrix)."""
    mat = np.atleast_2d(np.asarray(value, dtype=complex))
    if not np.allclose(mat, mat.conj().T, rtol=0, atol=0):
        raise ValueError("constant potential must be Hermitian")
    N = mat.shape[0]
    lam = _branches(mat)
    return PotentialProfile(
        "constant",
        n,
        N,
        lambda pts: np.broadcast_to(mat, (len(pts), N, N)),
        TailData(lam, lam),
        lambda k: [mat],
        {"value": mat.tolist() if N > 1 else float(mat.real[0, 0])},
    )


def compact_well(sites: dict, n: int, N: int = 1) -> PotentialProfile:
    """Potential supported on finitely many sites ``{point: value}``; zero elsewhere."""
    table = {}
    for point, value in sites.items():
        mat = np.atleast_2d(np.asarray(value, dtype=complex)) * (np.eye(N) if np.ndim(value) == 0 else 1)
        if not np.array_equal(mat, mat.conj().T):
            raise ValueError(f"value at {point} is not Hermitian")
        table[tuple(int(c) for c in np.atleast_1d(point))] = mat

    def evaluator(pts):
        out = np.zeros((len(pts), N, N), dtype=complex)
        for point, mat in table.items():
            hit = np.all(pts == np.asarray(point), axis=1)
            out[hit] = mat
        return out

    zero = np.zeros((N, N), dtype=complex)
    return PotentialProfile(
        "compact_support",
        n,
        N,
        evaluator,
        TailData((0.0,) * N, (0.0,) * N),
        lambda k: [zero],
        {"sites": {str(p): np.real(m).tolist() for p, m in table.items()}},
    )


def delta_well(depth: float, n: int = 1, N: int = 1) -> PotentialProfile:
    """``Phi = -depth`` at the origin, zero elsewhere."""
    return compact_well({(0,) * n: -depth}, n, N)


def log_oscillation(A: float, B: float, gamma: float, n: int, N: int = 1) -> PotentialProfile:
    """``Phi(x) = (A + B sin(gamma log(1 + |x|))) E_N``.

    Slowly oscillating, with every value in ``[A - |B|, A + |B|]`` a partial limit.
    """
    lo, hi = A - abs(B), A + abs(B)

    def evaluator(pts):
        r = np.sqrt((pts.astype(float) ** 2).sum(axis=1))
        return A + B * np.sin(gamma * np.log1p(r))

    def limits(k):
        return [s * np.eye(N, dtype=complex) for s in np.linspace(lo, hi, k + 2)]

    return PotentialProfile(
        "log_oscillation",
        n,
        N,
        evaluator,
        TailData((lo,) * N, (hi,) * N),
        limits,
        {"A": A, "B": B, "gamma": gamma},
    )


def user_profile(
    fn: Callable[[np.ndarray], np.ndarray],
    n: int,
    N: int,
    tail: TailData,
    limit_values: Sequence,
    label: str = "user",
) -> PotentialProfile:
    """A caller-supplied potential; the tail data and limit samples must be declared."""
    mats = [np.atleast_2d(np.asarray(v, dtype=complex)) * (np.eye(N) if np.ndim(v) == 0 else 1) for v in limit_values]
    if not mats:
        raise ValueError("user profiles must declare at least one partial limit")
    return PotentialProfile("user", n, N, fn, tail, lambda k: mats, {"label": label})


def gaussian_well(depth: float, n: int, width: float = 1.0) -> PotentialProfile:
    """``Phi(x) = -depth * exp(-|x|^2 / width^2)``; decays, so its only partial limit is 0."""

    def fn(pts):
        r2 = (pts.astype(float) ** 2).sum(axis=1)
        return -depth * np.exp(-r2 / width**2)

    prof = user_profile(fn, n, 1, TailData.scalar(0.0, 0.0), [0.0], label="gaussian_well")
    return PotentialProfile(
        "user", n, 1, prof.evaluator, prof.tail, prof.limit_values, {"label": "gaussian_well", "depth": depth, "width": width}
    )


# --- operators ---------------------------------------------------------------


def unit(n: int, k: int) -> tuple[int, ...]:
    e = [0] * n
    e[k] = 1
    return tuple(e)


def forward_difference(n: int, k: int, N: int = 1) -> BandOperator:
    """``d_k = I - V_{e_k}``."""
    return BandOperator(
        n,
        N,
        {(0,) * n: Coefficient.constant(np.eye(N), N), unit(n, k): Coefficient.constant(-np.eye(N), N)},
    )


def laplacian(n: int, N: int = 1) -> BandOperator:
    """``Gamma = sum_k (2I - V_{e_k} - V_{-e_k})``."""
    if n < 1:
        raise ValueError("n must be positive")
    E = np.eye(N)
    coeffs = {(0,) * n: Coefficient.constant(2 * n * E, N)}
    for k in range(n):
        e = unit(n, k)
        coeffs[e] = Coefficient.constant(-E, N)
        coeffs[tuple(-c for c in e)] = Coefficient.constant(-E, N)
    return BandOperator(n, N, coeffs)


def laplacian_symbol(phi: np.ndarray) -> np.ndarray:
    return (2 - 2 * np.cos(np.atleast_2d(phi))).sum(axis=1)


def _potential_limits(base: BandOperator, profile: PotentialProfile, scale: float = 1.0) -> LimitFamily:
    n, N = base.n, base.N
    zero = (0,) * n

    def build(mat):
        return base + BandOperator(n, N, {zero: Coefficient.constant(scale * np.asarray(mat), N)})

    return LimitFamily(tuple(profile.limit_values(CONTINUUM_SAMPLES)), build)


def build_schrodinger(
    n: int,
    N: int = 1,
    potential: Optional[PotentialProfile] = None,
    magnetic: Optional[Sequence[Callable[[np.ndarray], np.ndarray]]] = None,
) -> BandOperator:
    """Magnetic Schrodinger operator ``sum_k (V_{e_k} - e^{i a_k})(V_{-e_k} - e^{-i a_k}) + Phi``.

    Coefficients: ``a_0 = 2n E + Phi(x)``, ``a_{e_k}(x) = -exp(-i a_k(x - e_k)) E``
    and ``a_{-e_k}(x) = -exp(i a_k(x)) E``.  ``magnetic`` holds real functions
    of integer points ``(P, n) -> (P,)``.
    """
    if potential is not None and (potential.n, potential.N) != (n, N):
        raise ValueError(f"potential lives on (n={potential.n}, N={potential.N}), expected ({n}, {N})")
    if potential is not None and not potential.check_hermitian(Box(n, 2).points):
        raise ValueError("potential is not Hermitian")
    E = np.eye(N)
    zero = (0,) * n
    coeffs = {}
    for k in range(n):
        e = unit(n, k)
        minus = tuple(-c for c in e)
        if magnetic is None or magnetic[k] is None:
            coeffs[e] = Coefficient.constant(-E, N)
            coeffs[minus] = Coefficient.constant(-E, N)
        else:
            coeffs[e] = Coefficient.function(_magnetic_forward(magnetic[k], e), N)
            coeffs[minus] = Coefficient.function(_magnetic_backward(magnetic[k]), N)

    diag = Coefficient.constant(2 * n * E, N)
    if potential is not None and potential.kind != "constant":
        diag = Coefficient.function(lambda pts: 2 * n * E + potential(pts), N)
    elif potential is not None:
        diag = Coefficient.constant(2 * n * E + potential(np.zeros((1, n), int))[0], N)
    coeffs[zero] = diag
    op = BandOperator(n, N, coeffs)

    # Constant magnetic phases are gauge-equivalent to zero, so limit operators
    # only carry the potential's partial limits.
    free = laplacian(n, N)
    if potential is None:
        return op.with_limits(LimitFamily((np.zeros((N, N)),), lambda mat: free))
    return op.with_limits(_potential_limits(free, potential))


def _magnetic_forward(a_k, e):
    shift = np.asarray(e, dtype=np.int64)

    def fn(pts):
        return -np.exp(-1j * np.asarray(a_k(np.asarray(pts) - shift), dtype=float))

    return fn


def _magnetic_backward(a_k):
    def fn(pts):
        return -np.exp(1j * np.asarray(a_k(np.asarray(pts)), dtype=float))

    return fn


def gamma_matrices() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Hermitian 4x4 matrices with ``g^j g^k + g^k g^j = 2 delta_jk E_4``.

    ``g^0 = diag(1, 1, -1, -1)`` and ``g^k = [[0, s_k], [s_k, 0]]`` with the
    Pauli matrices ``s_k``.
    """
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    z = np.zeros((2, 2), dtype=complex)
    g0 = np.diag([1, 1, -1, -1]).astype(complex)
    gk = [np.block([[z, s], [s, z]]) for s in (s1, s2, s3)]
    return (g0, *gk)


def dirac_block(p: PhysicalParams = PhysicalParams()) -> BandOperator:
    """``D_0 = c hbar sum_k d_k g^k + c^2 m g^0`` on ``l^2(Z^3, C^4)`` (not self-adjoint)."""
    g = gamma_matrices()
    ch = p.c * p.hbar
    coeffs = {(0, 0, 0): Coefficient.constant(ch * (g[1] + g[2] + g[3]) + p.c**2 * p.m * g[0], 4)}
    for k in range(3):
        coeffs[unit(3, k)] = Coefficient.constant(-ch * g[k + 1], 4)
    return BandOperator(3, 4, coeffs)


def _off_diagonal(upper: BandOperator, lower: BandOperator) -> BandOperator:
    z = np.zeros((4, 4), dtype=complex)
    coeffs = {}
    for alpha in sorted(set(upper.coeffs) | set(lower.coeffs)):
        u = upper.coefficient(alpha).value
        l = lower.coefficient(alpha).value
        coeffs[alpha] = Coefficient.constant(np.block([[z, u], [l, z]]), 8)
    return BandOperator(3, 8, coeffs)


def build_dirac(p: PhysicalParams = PhysicalParams(), potential: Optional[PotentialProfile] = None) -> BandOperator:
    """Self-adjoint ``[[0, D_0], [D_0^*, 0]] + e Phi E_8`` on ``l^2(Z^3, C^8)``."""
    D0 = dirac_block(p)
    free = _off_diagonal(D0, adjoint(D0))
    if potential is None:
        return free.with_limits(LimitFamily((np.zeros((8, 8)),), lambda mat: free))
    if (potential.n, potential.N) != (3, 1):
        raise ValueError("the Dirac potential must be a scalar profile on Z^3")
    e = p.e
    pot = BandOperator.multiplication(3, 8, lambda pts: e * potential(pts)[:, 0, 0].real)
    scalar_limits = [float(np.real(m).reshape(-1)[0]) for m in potential.limit_values(CONTINUUM_SAMPLES)]
    fam = LimitFamily(
        tuple(scalar_limits),
        lambda phi: free + BandOperator(3, 8, {(0, 0, 0): Coefficient.constant(e * phi * np.eye(8), 8)}),
    )
    return (free + pot).with_limits(fam)


@dataclass(frozen=True)
class KleinGordonBand:
    """Result of the Klein-Gordon band truncation."""

    operator: BandOperator
    bandwidth: int
    tail_bound: float
    grid: int
    annulus_r: float


def kg_symbol(phi: np.ndarray, p: PhysicalParams) -> np.ndarray:
    """``k(phi) = sqrt(c^2 hbar^2 Gamma(phi) + m^2 c^4)``."""
    return np.sqrt((p.c * p.hbar) ** 2 * laplacian_symbol(phi) + (p.m * p.c**2) ** 2)


def kg_annulus(p: PhysicalParams) -> float:
    """Radius of the largest annulus on which ``k`` stays analytic.

    The radicand vanishes first at ``t + 1/t = q`` with ``q = 2 + (m c / hbar)^2``
    along a single axis.
    """
    q = 2.0 + (p.m * p.c / p.hbar) ** 2
    return (q + np.sqrt(q * q - 4.0)) / 2.0


def build_klein_gordon(
    n: int,
    p: PhysicalParams = PhysicalParams(),
    potential: Optional[PotentialProfile] = None,
    band_tol: float = 1e-8,
    max_band: int = 40,
    grid: int = 512,
) -> KleinGordonBand:
    """Band truncation of ``sqrt(c^2 hbar^2 Gamma + m^2 c^4) + e Phi``.

    Fourier coefficients of ``k`` are taken on an ``grid^n`` torus grid; the
    bandwidth ``B`` is the smallest one whose discarded Wiener tail is at most
    ``band_tol``.
    """
    if not p.m > 0:
        raise ValueError("the Klein-Gordon symbol needs m > 0")
    if grid < 2 * max_band + 1:
        raise ValueError("grid too coarse for the requested maximal bandwidth")
    values = kg_symbol(torus_grid(n, grid), p).reshape((grid,) * n)
    table = np.real(np.fft.ifftn(values))
    # Wiener tail beyond bandwidth B, read off the sup-norm radius of each coefficient.
    idx = np.arange(grid)
    signed = np.where(idx <= grid // 2, idx, idx - grid)
    radius = np.abs(np.stack(np.meshgrid(*([signed] * n), indexing="ij"))).max(axis=0)
    mags = np.abs(table)
    by_radius = np.bincount(radius.ravel(), weights=mags.ravel())
    tails = by_radius[::-1].cumsum()[::-1]  # tails[B] = sum over radius >= B
    bandwidth = None
    for B in range(0, max_band + 1):
        tail = tails[B + 1] if B + 1 < len(tails) else 0.0
        if tail <= band_tol:
            bandwidth = B
            break
    if bandwidth is None:
        raise ValueError(f"band_tol={band_tol} not reachable with bandwidth <= {max_band}")
    tail = float(tails[bandwidth + 1]) if bandwidth + 1 < len(tails) else 0.0

    coeffs = {}
    for alpha in np.argwhere(radius <= bandwidth):
        key = tuple(int(signed[i]) for i in alpha)
        coeffs[key] = np.array([[table[tuple(alpha)]]], dtype=complex)
    K0 = from_coeffs(n, 1, coeffs)
    annulus = kg_annulus(p)

    if potential is None:
        op = K0.with_limits(LimitFamily((0.0,), lambda phi: K0))
    else:
        if (potential.n, potential.N) != (n, 1):
            raise ValueError("the Klein-Gordon potential must be a scalar profile on Z^n")
        e = p.e
        if potential.kind == "constant":
            shift = e * float(np.real(potential(np.zeros((1, n), int))[0, 0, 0]))
            op = K0 + BandOperator(n, 1, {(0,) * n: Coefficient.constant(shift, 1)})
        else:
            op = K0 + BandOperator.multiplication(n, 1, lambda pts: e * potential(pts)[:, 0, 0].real)
        scalar_limits = [float(np.real(m).reshape(-1)[0]) for m in potential.limit_values(CONTINUUM_SAMPLES)]
        op = op.with_limits(
            LimitFamily(
                tuple(scalar_limits),
                lambda phi: K0 + BandOperator(n, 1, {(0,) * n: Coefficient.constant(e * phi, 1)}),
            )
        )
    return KleinGordonBand(op, bandwidth, tail, grid, annulus)


def kg_symbol_grid(n: int, p: PhysicalParams, M: int):
    """The exact Klein-Gordon symbol as a :class:`SymbolGrid`."""
    vals = kg_symbol(torus_grid(n, M), p).reshape((M,) * n + (1, 1)).astype(complex)
    return SymbolGrid(n, 1, M, vals, kg_annulus(p))


def truncated_kg_coeffs(n: int, p: PhysicalParams, M: int, bandwidth: int) -> dict:
    return fourier_coeffs(kg_symbol_grid(n, p, M), bandwidth)


__all__ = [
    "PhysicalParams",
    "TailData",
    "PotentialProfile",
    "constant_profile",
    "compact_well",
    "delta_well",
    "log_oscillation",
    "user_profile",
    "gaussian_well",
    "laplacian",
    "forward_difference",
    "build_schrodinger",
    "gamma_matrices",
    "dirac_block",
    "build_dirac",
    "build_klein_gordon",
    "KleinGordonBand",
    "kg_symbol",
]
