"""Essential spectra: closed forms from tail data, torus sweeps, and gap extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .lattice import BandOperator
from .models import PhysicalParams, TailData
from .symbols import limit_symbol, symbol_at, torus_grid

SWEEP_CHUNK = 16384
HERMITIAN_TOL = 1e-10


@dataclass(frozen=True, order=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


class IntervalUnion:
    """Finite union of closed intervals, kept sorted and pairwise disjoint.

    Overlapping or touching intervals are merged on construction.
    """

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Union[Interval, Sequence[float]]] = ()):
        ivs = sorted(iv if isinstance(iv, Interval) else Interval(float(iv[0]), float(iv[1])) for iv in intervals)
        merged: list[Interval] = []
        for iv in ivs:
            if merged and iv.lo <= merged[-1].hi:
                if iv.hi > merged[-1].hi:
                    merged[-1] = Interval(merged[-1].lo, iv.hi)
            else:
                merged.append(iv)
        self.intervals: tuple[Interval, ...] = tuple(merged)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __eq__(self, other):
        return isinstance(other, IntervalUnion) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self):
        body = " u ".join(f"[{iv.lo:.6g}, {iv.hi:.6g}]" for iv in self.intervals) or "{}"
        return f"IntervalUnion({body})"

    def __contains__(self, x: float) -> bool:
        return any(x in iv for iv in self.intervals)

    def __or__(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.intervals + other.intervals)

    def __and__(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        for a in self.intervals:
            for b in other.intervals:
                lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
                if lo <= hi:
                    out.append(Interval(lo, hi))
        return IntervalUnion(out)

    def __sub__(self, other: "IntervalUnion") -> "IntervalUnion":
        """Closure of the set difference."""
        out = []
        for a in self.intervals:
            pieces = [(a.lo, a.hi)]
            for b in other.intervals:
                nxt = []
                for lo, hi in pieces:
                    if b.hi <= lo or b.lo >= hi:
                        nxt.append((lo, hi))
                        continue
                    if lo < b.lo:
                        nxt.append((lo, b.lo))
                    if b.hi < hi:
                        nxt.append((b.hi, hi))
                pieces = nxt
            out.extend(Interval(lo, hi) for lo, hi in pieces if hi > lo)
        return IntervalUnion(out)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def hull(self) -> Optional[Interval]:
        if not self.intervals:
            return None
        return Interval(self.intervals[0].lo, self.intervals[-1].hi)

    def measure(self) -> float:
        return float(sum(iv.width for iv in self.intervals))

    def distance(self, x: float) -> float:
        if not self.intervals:
            return math.inf
        return min(0.0 if x in iv else min(abs(x - iv.lo), abs(x - iv.hi)) for iv in self.intervals)

    def directed_distance(self, other: "IntervalUnion") -> float:
        """``sup_{a in self} dist(a, other)``."""
        if not self.intervals:
            return 0.0
        if not other.intervals:
            return math.inf
        candidates = []
        for iv in self.intervals:
            candidates += [iv.lo, iv.hi]
            for lo, hi in gaps(other):
                mid = 0.5 * (lo + hi)
                if iv.lo <= mid <= iv.hi:
                    candidates.append(mid)
        return max(other.distance(x) for x in candidates)

    def hausdorff(self, other: "IntervalUnion") -> float:
        return max(self.directed_distance(other), other.directed_distance(self))

    def to_list(self) -> list[list[float]]:
        return [[iv.lo, iv.hi] for iv in self.intervals]


def gaps(u: IntervalUnion) -> list[tuple[float, float]]:
    """Bounded open intervals of the complement of ``u`` inside its hull, sorted."""
    ivs = u.intervals
    return [(a.hi, b.lo) for a, b in zip(ivs, ivs[1:])]


@dataclass
class SpectralReport:
    essential: IntervalUnion
    method: str
    grid: Optional[int] = None
    resolution: float = 0.0
    discrepancy: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def gaps(self) -> list[tuple[float, float]]:
        return gaps(self.essential)

    def to_dict(self) -> dict:
        out = {
            "essential": self.essential.to_list(),
            "gaps": [list(g) for g in self.gaps],
            "method": self.method,
        }
        if self.grid is not None:
            out["grid"] = self.grid
            out["resolution"] = self.resolution
        if self.discrepancy:
            out["discrepancy"] = self.discrepancy
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# --- closed forms ------------------------------------------------------------


def _schrodinger_bands(n: int, tail: TailData) -> list[Interval]:
    return [Interval(lo, hi + 4 * n) for lo, hi in zip(tail.lam_inf, tail.lam_sup)]


def schrodinger_essential_spectrum(n: int, N: int, tail: TailData) -> SpectralReport:
    """Union over branches of ``[lam_j^inf, lam_j^sup + 4n]``.

    In one dimension with two-sided tail data the bands of both ends are
    united separately.
    """
    if tail.N != N:
        raise ValueError(f"tail has {tail.N} branches, expected N={N}")
    if n == 1 and tail.sides is not None:
        bands = _schrodinger_bands(1, tail.sides[0]) + _schrodinger_bands(1, tail.sides[1])
    else:
        bands = _schrodinger_bands(n, tail)
    return SpectralReport(IntervalUnion(bands), "closed_form")


def dirac_essential_spectrum(p: PhysicalParams, tail: TailData) -> SpectralReport:
    """``[e Phi^inf - S, e Phi^sup - mc^2] u [e Phi^inf + mc^2, e Phi^sup + S]``, ``S = sqrt(12 hbar^2 c^2 + m^2 c^4)``."""
    top = math.sqrt(12 * (p.hbar * p.c) ** 2 + p.rest_energy**2)
    lo, hi = p.e * tail.phi_inf, p.e * tail.phi_sup
    mc2 = p.rest_energy
    u = IntervalUnion([(lo - top, hi - mc2), (lo + mc2, hi + top)])
    return SpectralReport(u, "closed_form")


def kg_essential_spectrum(n: int, p: PhysicalParams, tail: TailData) -> SpectralReport:
    """``[mc^2 + e Phi^inf, sqrt(4n c^2 hbar^2 + m^2 c^4) + e Phi^sup]``."""
    top = math.sqrt(4 * n * (p.c * p.hbar) ** 2 + p.rest_energy**2)
    return SpectralReport(
        IntervalUnion([(p.rest_energy + p.e * tail.phi_inf, top + p.e * tail.phi_sup)]), "closed_form"
    )


# --- sweeps ------------------------------------------------------------------


def sweep_resolution(A: BandOperator, M: int) -> float:
    """Bound on the distance from any spectral point to the nearest sampled eigenvalue.

    Each ordered eigenvalue of the symbol is Lipschitz in ``phi_k`` with
    constant ``sum_alpha |alpha_k| ||a_alpha||``; every torus point is within
    ``pi / M`` of a node along each axis.
    """
    lip = np.zeros(A.n)
    for alpha, a in A.constant_coeffs().items():
        lip += np.abs(alpha) * np.linalg.norm(a, 2)
    return float(np.pi / M * lip.sum())


def symbol_eigenvalues(A: BandOperator, M: int) -> np.ndarray:
    """Eigenvalues of the Hermitian symbol of a constant-coefficient operator at every grid node."""
    if not A.is_constant:
        raise ValueError("sweeps need constant coefficients; take limit operators first")
    nodes = torus_grid(A.n, M)
    out = []
    for start in range(0, len(nodes), SWEEP_CHUNK):
        S = symbol_at(A, nodes[start : start + SWEEP_CHUNK])
        skew = np.abs(S - np.conj(np.swapaxes(S, -1, -2))).max()
        scale = max(1.0, float(np.abs(S).max()))
        if skew > HERMITIAN_TOL * scale:
            raise ValueError(f"symbol is not Hermitian (max |S - S^*| = {skew:.3e}); operator is not self-adjoint")
        out.append(np.linalg.eigvalsh(S).ravel())
    return np.concatenate(out)


def cluster(values: np.ndarray, merge_gap: float) -> IntervalUnion:
    """Hulls of runs of sorted values whose consecutive gaps are ``<= merge_gap``."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        return IntervalUnion()
    breaks = np.nonzero(np.diff(v) > merge_gap)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [v.size - 1]])
    return IntervalUnion((v[s], v[e]) for s, e in zip(starts, ends))


def symbol_spectrum_sweep(
    ops: Union[BandOperator, Sequence[BandOperator]], M: int, merge_factor: float = 4.0
) -> SpectralReport:
    """Spectrum of constant-coefficient operators from eigenvalues of their symbols on the ``M^n`` grid.

    A list of operators (a limit family) is swept jointly and united.  Sampled
    eigenvalues are clustered into intervals, merging gaps no wider than
    ``merge_factor`` times the grid resolution.
    """
    if isinstance(ops, BandOperator):
        ops = [ops]
    vals = []
    res = 0.0
    for A in ops:
        vals.append(symbol_eigenvalues(A, M))
        res = max(res, sweep_resolution(A, M))
    u = cluster(np.concatenate(vals), merge_factor * res)
    return SpectralReport(u, "sweep", grid=M, resolution=res)


def limit_family_sweep(A: BandOperator, M: int) -> SpectralReport:
    """Sweep over the declared limit-operator family of ``A``."""
    fam = limit_symbol(A)
    rep = symbol_spectrum_sweep(fam, M)
    rep.notes.append(f"united over {len(fam)} limit operators")
    if A.limits is not None and not getattr(A.limits, "monotone", True):
        rep.notes.append("limit family not declared monotone; continuum sampling may miss pieces")
    return rep


def compare(closed: SpectralReport, sweep: SpectralReport) -> dict:
    """Discrepancy metrics between a closed form and a sweep."""
    c, s = closed.essential, sweep.essential
    return {
        "hausdorff": c.hausdorff(s),
        "closed_minus_sweep": c.directed_distance(s),
        "sweep_minus_closed": s.directed_distance(c),
        "excess_measure": (s - c).measure(),
        "missing_measure": (c - s).measure(),
        "excess": (s - c).to_list(),
        "resolution": sweep.resolution,
    }


def dirac_singular_value_sweep(p: PhysicalParams, M: int) -> np.ndarray:
    """``+/-`` singular values of the 4x4 block symbol at every node of the ``M^3`` grid."""
    from .models import dirac_block

    D0 = dirac_block(p)
    nodes = torus_grid(3, M)
    out = []
    for start in range(0, len(nodes), SWEEP_CHUNK):
        s = np.linalg.svd(symbol_at(D0, nodes[start : start + SWEEP_CHUNK]), compute_uv=False)
        out.append(s.ravel())
    s = np.concatenate(out)
    return np.concatenate([s, -s])


def dirac_audit(p: PhysicalParams = PhysicalParams(), M: int = 64, tol: float = 1e-6) -> SpectralReport:
    """Sweep of the free Dirac operator against the closed-form bands.

    Containment of the closed form in the sweep is checked at ``tol`` beyond the
    grid resolution; excess of the sweep over the closed form is only measured.
    """
    from .models import build_dirac

    closed = dirac_essential_spectrum(p, TailData.scalar(0.0, 0.0))
    D = build_dirac(p)
    res = sweep_resolution(D, M)
    sv = dirac_singular_value_sweep(p, M)
    sweep = SpectralReport(cluster(sv, 4.0 * res), "sweep", grid=M, resolution=res)
    metrics = compare(closed, sweep)
    metrics["contained"] = bool(metrics["closed_minus_sweep"] <= tol)
    metrics["containment_tol"] = tol
    abs_sv = np.abs(sv)
    metrics["min_singular_value"] = float(abs_sv.min())
    metrics["max_singular_value"] = float(abs_sv.max())
    sweep.discrepancy = metrics
    return sweep
