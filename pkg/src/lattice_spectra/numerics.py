"""Finite-section eigen-analysis and decay-rate fitting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .decay import DecayBound
from .lattice import BandOperator, Box, LatticeFunction, truncate, truncate_sparse
from .spectra import SpectralReport

HERMITIAN_TOL = 1e-10
UNDERFLOW_FLOOR = 1e-14
DENSE_LIMIT = 6000
DEGENERACY_TOL = 1e-8


def hermitian_eigs(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a dense Hermitian matrix (LAPACK)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    skew = np.abs(M - M.conj().T).max(initial=0.0)
    if skew > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (max |M - M^*| = {skew:.3e})")
    return sla.eigh(M)


@dataclass
class DecayFit:
    rate: float
    r_squared: float
    shells: list
    log_max_abs: list
    shell_lo: int
    shell_hi: int

    def to_dict(self) -> dict:
        return {"rho_fit": self.rate, "r_squared": self.r_squared, "shell_lo": self.shell_lo, "shell_hi": self.shell_hi}


def shell_profile(u: LatticeFunction) -> tuple[np.ndarray, np.ndarray]:
    """``s -> max_{|x|_inf = s} |u(x)|`` for ``s = 0..L`` (fiber norm at each point)."""
    s = u.box.sup_norms()
    amp = np.linalg.norm(u.values, axis=1)
    prof = np.zeros(u.box.L + 1)
    np.maximum.at(prof, s, amp)
    return np.arange(u.box.L + 1), prof


def decay_fit(u: LatticeFunction, shell_lo: int, shell_hi: int) -> DecayFit:
    """Least-squares slope of ``log max_{|x|_inf=s} |u|`` over ``s in [shell_lo, shell_hi]``.

    Returns ``-slope`` as the fitted rate.  If the profile drops below the
    underflow floor the range is shortened; fewer than three usable shells is
    an error.
    """
    if not 0 <= shell_lo < shell_hi <= u.box.L:
        raise ValueError(f"shell range [{shell_lo}, {shell_hi}] not inside box of radius {u.box.L}")
    s, prof = shell_profile(u)
    s, prof = s[shell_lo : shell_hi + 1], prof[shell_lo : shell_hi + 1]
    low = np.nonzero(prof < UNDERFLOW_FLOOR)[0]
    if low.size:
        s, prof = s[: low[0]], prof[: low[0]]
    if s.size < 3:
        raise ValueError("profile hits the underflow floor; shrink the shell range")
    y = np.log(prof)
    slope, intercept = np.polyfit(s, y, 1)
    resid = y - (slope * s + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float((resid**2).sum()) / ss_tot
    rate = -float(slope)
    if abs(rate) < 1e-12:
        rate = 0.0
    return DecayFit(rate, r2, s.tolist(), y.tolist(), int(s[0]), int(s[-1]))


@dataclass
class GapEigenpair:
    value: float
    vector: LatticeFunction
    residual: float
    interior_mass: float
    drift: float
    multiplicity: int = 1
    matrix_norm: float = 0.0
    fit: Optional[DecayFit] = None

    def to_dict(self) -> dict:
        out = {
            "lambda": self.value,
            "multiplicity": self.multiplicity,
            "residual": self.residual,
            "matrix_norm": self.matrix_norm,
            "interior_mass": self.interior_mass,
            "drift": self.drift,
        }
        if self.fit is not None:
            out.update(self.fit.to_dict())
        return out


@dataclass
class EigenReport:
    L_values: list
    eigenvalues: dict
    pairs: list = field(default_factory=list)
    stab_tol: float = 1e-3
    solver: str = "dense"

    @property
    def gap_eigenvalues(self) -> list[float]:
        return [p.value for p in self.pairs]

    def to_dict(self) -> dict:
        return {
            "L_values": list(self.L_values),
            "solver": self.solver,
            "stab_tol": self.stab_tol,
            "gap_eigenvalues": [p.to_dict() for p in self.pairs],
        }


def _regions(sp: SpectralReport) -> list[tuple[float, float]]:
    u = sp.essential
    hull = u.hull
    if hull is None:
        raise ValueError("no essential spectrum declared")
    return [(-np.inf, hull.lo)] + sp.gaps + [(hull.hi, np.inf)]


def _in_regions(values: np.ndarray, regions) -> np.ndarray:
    mask = np.zeros(values.shape, dtype=bool)
    for lo, hi in regions:
        mask |= (values > lo) & (values < hi)
    return mask


def _interior_mass(box: Box, vecs: np.ndarray, N: int) -> np.ndarray:
    inner = np.repeat(box.sup_norms() <= box.L / 2, N)
    w = np.abs(vecs) ** 2
    return w[inner].sum(axis=0) / w.sum(axis=0)


def _solve(A: BandOperator, box: Box, regions, solver: str, k: int):
    """Eigenpairs of the finite section with eigenvalues in ``regions``."""
    dim = box.size * A.N
    if solver == "auto":
        solver = "dense" if dim <= DENSE_LIMIT else "sparse"
    if solver == "dense":
        M = truncate(A, box)
        w, V = hermitian_eigs(M)
        keep = _in_regions(w, regions)
        norm = float(np.abs(w).max())  # ||M||_2 of a Hermitian matrix
        res = np.linalg.norm(M @ V[:, keep] - V[:, keep] * w[keep], axis=0)
        return w, w[keep], V[:, keep], res, norm
    if solver != "sparse":
        raise ValueError(f"unknown solver {solver!r}")
    S = truncate_sparse(A, box)
    vals, vecs = [], []
    kk = min(k, dim - 2)
    # fixed start vector: ARPACK's default is drawn from a process-wide random stream
    v0 = np.random.default_rng(0).standard_normal(dim)
    for lo, hi in regions:
        if not np.isfinite(lo):
            w, V = spla.eigsh(S, k=kk, which="SA", v0=v0)
        elif not np.isfinite(hi):
            w, V = spla.eigsh(S, k=kk, which="LA", v0=v0)
        else:
            w, V = spla.eigsh(S, k=kk, sigma=0.5 * (lo + hi), which="LM", v0=v0)
        vals.append(w)
        vecs.append(V)
    if not vals:
        return np.array([]), np.array([]), np.zeros((dim, 0)), np.array([]), 0.0
    w = np.concatenate(vals)
    V = np.concatenate(vecs, axis=1)
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    keep = _in_regions(w, regions)
    norm = float(np.abs(spla.eigsh(S, k=1, which="LM", v0=v0, return_eigenvectors=False)).max())
    res = np.linalg.norm(S @ V[:, keep] - V[:, keep] * w[keep], axis=0)
    return w, w[keep], V[:, keep], res, norm


def _degenerate_groups(values: np.ndarray, tol: float) -> list[np.ndarray]:
    if values.size == 0:
        return []
    order = np.argsort(values)
    breaks = np.nonzero(np.diff(values[order]) > tol)[0] + 1
    return [np.sort(g) for g in np.split(order, breaks)]


def discrete_eigs_in_gaps(
    A: BandOperator,
    sp: SpectralReport,
    L_list: Sequence[int],
    stab_tol: float = 1e-3,
    interior: float = 0.5,
    solver: str = "auto",
    k: int = 24,
) -> EigenReport:
    """Finite-section eigenvalues outside ``sp.essential`` that persist as the box grows.

    An eigenvalue of the largest box is kept when the second-largest box has
    one within ``stab_tol`` and at least ``interior`` of its l^2 mass lies in
    ``|x|_inf <= L/2`` (boundary modes fail this).  Eigenvalues within
    1e-8 of each other are reported once, with their multiplicity.
    """
    L_list = sorted(int(L) for L in L_list)
    if len(L_list) < 2:
        raise ValueError("need at least two box sizes")
    regions = _regions(sp)
    all_vals: dict = {}
    kept: dict = {}
    last = None
    for L in L_list[-2:]:
        box = Box(A.n, L)
        w, wk, Vk, res, norm = _solve(A, box, regions, solver, k)
        mass = _interior_mass(box, Vk, A.N) if Vk.shape[1] else np.array([])
        good = mass >= interior
        all_vals[L] = w.tolist()
        kept[L] = wk[good]
        last = (box, wk[good], Vk[:, good], res[good], mass[good], norm)

    box, w_big, V_big, res, mass, norm = last
    w_prev = kept[L_list[-2]]
    pairs = []
    for idx in _degenerate_groups(w_big, DEGENERACY_TOL):
        lam = float(w_big[idx].mean())
        drift = float(np.min(np.abs(w_prev - lam))) if w_prev.size else np.inf
        if drift > stab_tol:
            continue
        # stacking the degenerate eigenvectors makes the fiber norm basis-independent
        vals = V_big[:, idx].reshape(box.size, A.N, len(idx)).reshape(box.size, A.N * len(idx))
        vec = LatticeFunction(box, vals)
        pairs.append(
            GapEigenpair(lam, vec, float(res[idx].max()), float(mass[idx].min()), drift, len(idx), norm)
        )
    solver_used = solver if solver != "auto" else ("dense" if box.size * A.N <= DENSE_LIMIT else "sparse")
    return EigenReport(L_list, all_vals, pairs, stab_tol, solver_used)


@dataclass
class VerifyResult:
    status: str
    lam: Optional[float]
    rho_fit: Optional[float]
    r_max: Optional[float]
    slack: float
    detail: str = ""
    fit: Optional[DecayFit] = None

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "lambda": self.lam,
            "rho_fit": self.rho_fit,
            "r_max": self.r_max,
            "slack": self.slack,
            "detail": self.detail,
        }
        if self.fit is not None:
            out["r_squared"] = self.fit.r_squared
        return out


def default_shells(L: int) -> tuple[int, int]:
    return max(1, L // 6), max(2, (2 * L) // 3)


def verify_decay(
    A: BandOperator,
    bound: DecayBound,
    L: int,
    shells: Optional[tuple[int, int]] = None,
    slack: float = 0.02,
    stab_tol: float = 1e-3,
    pair: Optional[GapEigenpair] = None,
) -> VerifyResult:
    """PASS iff the fitted decay rate of the ``bound.lam`` eigenfunction is at least ``r_max - slack``.

    Inapplicable bounds are skipped.  Without a precomputed ``pair`` the finite
    section on ``Box(n, L)`` is diagonalised and the eigenvalue nearest
    ``bound.lam`` is used.
    """
    if not bound.applicable:
        return VerifyResult("SKIPPED", bound.lam, None, None, slack, "bound inapplicable")
    box = Box(A.n, L)
    if pair is None:
        w, V = hermitian_eigs(truncate(A, box))
        i = int(np.argmin(np.abs(w - bound.lam)))
        if abs(w[i] - bound.lam) > stab_tol:
            raise ValueError(f"no eigenvalue within {stab_tol} of {bound.lam} at L={L}")
        vec = LatticeFunction(box, V[:, i].reshape(box.size, A.N))
    else:
        vec = pair.vector
    lo, hi = shells or default_shells(vec.box.L)
    fit = decay_fit(vec, lo, hi)
    ok = fit.rate >= bound.r_max - slack
    return VerifyResult(
        "PASS" if ok else "FAIL",
        bound.lam,
        fit.rate,
        bound.r_max,
        slack,
        f"rho_fit={fit.rate:.6f} vs r_max={bound.r_max:.6f}",
        fit,
    )


def weighted_sum(u: LatticeFunction, r: float, p: float = 2.0) -> float:
    """``sum_x exp(p r |x|) |u(x)|^p`` over the box (Euclidean ``|x|``)."""
    amp = np.linalg.norm(u.values, axis=1)
    return float((np.exp(p * r * u.box.euclidean_norms()) * amp**p).sum())
