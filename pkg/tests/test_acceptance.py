"""Acceptance criteria 1-8.

Each test records one ``CRITERION k: PASS|FAIL <detail>`` line; the lines are
printed in the pytest terminal summary and when this file is run as a script.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from lattice_spectra.cli import run
from lattice_spectra.config import ExperimentConfig
from lattice_spectra.decay import (
    acosh,
    dirac_criterion,
    generic_decay_bound,
    kg_decay_bound,
    schrodinger_criterion,
    schrodinger_decay_bound,
)
from lattice_spectra.lattice import Box, LatticeFunction, apply, coefficients_equal, wiener_norm
from lattice_spectra.models import (
    PhysicalParams,
    TailData,
    build_klein_gordon,
    build_schrodinger,
    constant_profile,
    delta_well,
    log_oscillation,
)
from lattice_spectra.numerics import decay_fit, discrete_eigs_in_gaps, verify_decay
from lattice_spectra.spectra import (
    compare,
    dirac_audit,
    kg_essential_spectrum,
    limit_family_sweep,
    schrodinger_essential_spectrum,
)
from lattice_spectra.symbols import adjoint, compose, radial_weight, weight_conjugate

sys.path.insert(0, str(Path(__file__).parent))
from randops import PERIOD_WINDOW, random_band_operator  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
RESULTS: dict[int, str] = {}
FREE = TailData.scalar(0.0, 0.0)
P = PhysicalParams()


def record(k: int, ok: bool, detail: str) -> bool:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS[k] = line
    print(line)
    return ok


def test_criterion_1_schrodinger_sweeps():
    M = 512
    cases = [
        ("free n=1", build_schrodinger(1), schrodinger_essential_spectrum(1, 1, FREE)),
        (
            "diag(0,20) n=2",
            build_schrodinger(2, 2, potential=constant_profile(np.diag([0.0, 20.0]), 2)),
            schrodinger_essential_spectrum(2, 2, TailData((0, 20), (0, 20))),
        ),
        (
            "log-oscillation n=2",
            build_schrodinger(2, potential=log_oscillation(0.0, 1.0, 1.0, 2)),
            schrodinger_essential_spectrum(2, 1, TailData.scalar(-1.0, 1.0)),
        ),
    ]
    expected = [[[0.0, 4.0]], [[0.0, 8.0], [20.0, 28.0]], [[-1.0, 9.0]]]
    parts, ok = [], True
    for (name, H, closed), exp in zip(cases, expected):
        h = compare(closed, limit_family_sweep(H, M))["hausdorff"]
        ok &= h <= 2e-3 and closed.essential.to_list() == exp
        parts.append(f"{name} hausdorff={h:.2e}")
    assert record(1, ok, f"(M={M}, tol 2e-3): " + ", ".join(parts))


def test_criterion_2_dirac_audit():
    rep = dirac_audit(P, M=64, tol=1e-6)
    d = rep.discrepancy
    detail = (
        f"(64^3 grid, containment tol 1e-6): closed_minus_sweep={d['closed_minus_sweep']:.2e}, "
        f"excess_measure={d['excess_measure']:.4f}, singular values in "
        f"[{d['min_singular_value']:.4f}, {d['max_singular_value']:.4f}]"
    )
    assert record(2, bool(d["contained"]) and d["closed_minus_sweep"] <= 1e-6, detail)


def test_criterion_3_klein_gordon_band():
    kg = build_klein_gordon(1, P, band_tol=1e-8, max_band=40, grid=512)
    sweep = limit_family_sweep(kg.operator, 512)
    closed = kg_essential_spectrum(1, P, FREE)
    h = compare(closed, sweep)["hausdorff"]
    tol = 1e-6 + sweep.resolution
    ok = kg.bandwidth <= 40 and kg.tail_bound <= 1e-8 and h <= tol
    detail = f"B={kg.bandwidth} (<= 40), tail={kg.tail_bound:.2e} (<= 1e-8), hausdorff={h:.2e} (<= {tol:.2e})"
    assert record(3, ok, detail)


def test_criterion_4_delta_well_chain():
    H = build_schrodinger(1, potential=delta_well(1.5))
    rep = discrete_eigs_in_gaps(H, schrodinger_essential_spectrum(1, 1, FREE), [40, 60])
    assert len(rep.pairs) == 1
    pair = rep.pairs[0]
    fit = decay_fit(pair.vector, 10, 40)
    bound = schrodinger_decay_bound(pair.value, FREE, 1)
    exact = schrodinger_decay_bound(-0.5, FREE, 1)
    res = verify_decay(H, bound, 60, pair=pair)
    checks = [
        abs(pair.value + 0.5) <= 1e-3,
        abs(fit.rate - math.log(2)) <= 0.02,
        abs(exact.r_max - acosh(1.25)) <= 1e-12 and abs(acosh(1.25) - math.log(2)) <= 1e-12,
        res.passed,
    ]
    detail = (
        f"lambda={pair.value:.6f}, rho_fit={fit.rate:.6f}, closed bound at -0.5={exact.r_max:.15f}, "
        f"verify={res.status}"
    )
    assert record(4, all(checks), detail)


def test_criterion_5_generic_bound():
    r_s = generic_decay_bound(schrodinger_criterion(1, FREE), 6.0, M=64, tol=1e-4)
    r_d = generic_decay_bound(dirac_criterion(P, FREE), 0.0, M=64, tol=1e-4)
    e_s, e_d = abs(r_s - acosh(2.0)), abs(r_d - acosh(7 / 6))
    detail = f"schrodinger lambda=6 err={e_s:.2e}, dirac lambda=0 err={e_d:.2e} (tol 1e-3)"
    assert record(5, e_s <= 1e-3 and e_d <= 1e-3, detail)


def test_criterion_6_kg_diagnostic():
    stated = kg_decay_bound(3.0, 1, P, FREE, mode="as_stated")
    derived = kg_decay_bound(3.0, 1, P, FREE, mode="criterion_derived")
    err = abs(derived.r_max - acosh(3.0))
    ok = (not stated.applicable) and stated.argument < 1 and bool(stated.diagnostics) and err <= 1e-3
    detail = f"as_stated argument={stated.argument:g} (inapplicable={not stated.applicable}), criterion err={err:.2e}"
    assert record(6, ok, detail)


def test_criterion_7_calculus_properties():
    rng = np.random.default_rng(1000)
    counts = dict(involution=0, associativity=0, reversal=0, wiener=0, conjugation=0)
    worst_conj = 0.0
    trials = 1000
    for _ in range(trials):
        n, N = int(rng.integers(1, 3)), int(rng.integers(1, 5))
        A, B, C = (random_band_operator(rng, n=n, N=N) for _ in range(3))
        window = Box(n, PERIOD_WINDOW)
        counts["involution"] += coefficients_equal(adjoint(adjoint(A)), A, window)
        counts["associativity"] += coefficients_equal(compose(compose(A, B), C), compose(A, compose(B, C)), window)
        counts["reversal"] += coefficients_equal(adjoint(compose(A, B)), compose(adjoint(B), adjoint(A)), window)
        counts["wiener"] += wiener_norm(compose(A, B), window) <= wiener_norm(A, window) * wiener_norm(B, window) * (1 + 1e-9)
        w = radial_weight(n, float(rng.uniform(0.05, 0.8)))
        box = Box(n, 4)
        u = rng.standard_normal((box.size, N)) + 1j * rng.standard_normal((box.size, N))
        wx = w(box.points)[:, None]
        lhs = apply(weight_conjugate(A, w, 1.0), LatticeFunction(box, wx * u)).values
        rhs = wx * apply(A, LatticeFunction(box, u)).values
        rel = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300)
        worst_conj = max(worst_conj, rel)
        counts["conjugation"] += rel <= 1e-9
    ok = all(v == trials for v in counts.values())
    detail = f"({trials} operators) " + ", ".join(f"{k}={v}" for k, v in counts.items()) + f", worst conjugation rel err={worst_conj:.1e}"
    assert record(7, ok, detail)


def test_criterion_8_determinism(tmp_path):
    commands = [
        ("delta_well", ["spectrum"]),
        ("delta_well", ["decay", "--lambda", "-0.5"]),
        ("delta_well", ["verify"]),
        ("klein_gordon", ["symbol", "--op", "coeffs"]),
        ("klein_gordon", ["decay", "--lambda", "3"]),
    ]
    identical = 0
    for name, args in commands:
        data = ExperimentConfig.load(ROOT / "baselines" / "configs" / f"{name}.toml").to_dict()
        data["output"]["directory"] = str(tmp_path / name)
        cfg = tmp_path / f"{name}.toml"
        cfg.write_text(ExperimentConfig.from_dict(data).dumps())
        outputs = []
        for _ in range(2):
            run([args[0], "--config", str(cfg), *args[1:]])
            outputs.append((tmp_path / name / f"report_{args[0]}.json").read_bytes())
        identical += outputs[0] == outputs[1] and bool(json.loads(outputs[0]))
    assert record(8, identical == len(commands), f"{identical}/{len(commands)} command reports byte-identical across repeated runs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
