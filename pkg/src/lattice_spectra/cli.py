"""Command-line front end: ``lattice-spectra {spectrum,decay,verify,symbol} --config PATH``.

Every command writes one JSON report (keys sorted, written atomically) into
``output.directory``; ``verify`` also writes one CSV shell profile per gap
eigenvalue.  Exit codes: 0 success, 2 configuration error, 3 mathematically
inapplicable, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, ExperimentConfig
from .decay import closed_form_bound, criterion_for, essential_spectrum, generic_decay_bound, kg_decay_bound
from .lattice import BandOperator, Box, wiener_norm
from .models import build_dirac, build_klein_gordon, build_schrodinger, dirac_block, forward_difference, laplacian
from .numerics import default_shells, discrete_eigs_in_gaps, shell_profile, verify_decay
from .spectra import compare, limit_family_sweep
from .symbols import adjoint, compose, weight_conjugate

EXIT_OK, EXIT_CONFIG, EXIT_INAPPLICABLE, EXIT_FAILED = 0, 2, 3, 4
BASELINE_DIGITS = 9
THREADS_ENV = "LATTICE_SPECTRA_THREADS"


class Inapplicable(Exception):
    pass


# --- output ------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def round_floats(obj, digits: int = BASELINE_DIGITS):
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, list):
        return [round_floats(v, digits) for v in obj]
    if isinstance(obj, float):
        r = round(obj, digits)
        return 0.0 if r == 0 else r
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _report_path(cfg: ExperimentConfig, command: str) -> Path:
    return Path(cfg.output.directory) / f"{cfg.output.stem}_{command}.json"


# --- operators ---------------------------------------------------------------


def build_operator(cfg: ExperimentConfig):
    """The model operator of ``cfg`` and extra facts about its construction."""
    pot = cfg.potential()
    p = cfg.params
    if cfg.model == "schrodinger":
        return build_schrodinger(cfg.n, cfg.N, pot), {}
    if cfg.model == "dirac":
        return build_dirac(p, pot), {}
    kg = build_klein_gordon(cfg.n, p, pot, cfg.tolerances.band_tol, cfg.max_band, cfg.grid.kg_coeffs)
    info = {"bandwidth": kg.bandwidth, "tail_bound": kg.tail_bound, "annulus_r": kg.annulus_r,
            "coefficient_grid": kg.grid, "tolerance": cfg.tolerances.band_tol}
    return kg.operator, info


# --- commands ----------------------------------------------------------------


def cmd_spectrum(cfg: ExperimentConfig) -> tuple[dict, int]:
    closed = essential_spectrum(cfg.model, cfg.n, cfg.N, cfg.params, cfg.tail())
    op, info = build_operator(cfg)
    M = cfg.grid.dirac_audit if cfg.model == "dirac" else cfg.grid.sweep
    sweep = limit_family_sweep(op, M)
    disc = compare(closed, sweep)
    disc["contained"] = bool(disc["closed_minus_sweep"] <= cfg.tolerances.containment + sweep.resolution)
    disc["tolerance"] = cfg.tolerances.containment + sweep.resolution
    sweep_d = sweep.to_dict()
    sweep_d["tolerance"] = cfg.tolerances.merge_factor * sweep.resolution
    report = {
        "command": "spectrum",
        "model": cfg.model,
        "essential": closed.essential.to_list(),
        "gaps": [list(g) for g in closed.gaps],
        "tolerance": 0.0,
        "sweep": sweep_d,
        "discrepancy": disc,
    }
    if info:
        report["band_truncation"] = info
    return report, EXIT_OK


def cmd_decay(cfg: ExperimentConfig, lam: float) -> tuple[dict, int]:
    p, tail = cfg.params, cfg.tail()
    bound = closed_form_bound(cfg.model, lam, cfg.n, p, tail, kg_mode=cfg.kg_mode)
    diagnostics = list(bound.diagnostics)
    tol = cfg.tolerances.bisection
    r_crit = None
    if bound.case != "inside":
        if cfg.model == "klein_gordon":
            crit = kg_decay_bound(lam, cfg.n, p, tail, "criterion_derived", cfg.grid.criterion, tol)
            r_crit = crit.r_max
            diagnostics += crit.diagnostics
        else:
            try:
                fam = criterion_for(cfg.model, cfg.n, p, tail)
                r_crit = generic_decay_bound(fam, lam, M=cfg.grid.criterion, tol=tol)
            except ValueError as exc:
                diagnostics.append(f"criterion: {exc}")
    if bound.case == "inside":
        code = EXIT_INAPPLICABLE
    elif not bound.applicable:
        diagnostics.append("closed form inapplicable at this lambda")
        code = EXIT_OK
    else:
        code = EXIT_OK
    report = {
        "command": "decay",
        "model": cfg.model,
        "lambda": lam,
        "case": bound.case,
        "kg_mode": cfg.kg_mode if cfg.model == "klein_gordon" else None,
        "r_max_closed_form": bound.r_max if bound.applicable else None,
        "r_max_criterion": r_crit,
        "closed_form": bound.to_dict(),
        "diagnostics": diagnostics,
        "tolerance": {"closed_form": 0.0, "criterion": tol, "criterion_grid": cfg.grid.criterion},
    }
    return report, code


def _profile_csv(vec) -> str:
    s, prof = shell_profile(vec)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["shell_index", "max_abs", "log_max_abs"])
    with np.errstate(divide="ignore"):
        logs = np.log(prof)
    for si, a, la in zip(s, prof, logs):
        w.writerow([int(si), repr(float(a)), repr(float(la))])
    return buf.getvalue()


def cmd_verify(cfg: ExperimentConfig, baseline: Optional[Path] = None, write_baseline: Optional[Path] = None):
    p, tail = cfg.params, cfg.tail()
    closed = essential_spectrum(cfg.model, cfg.n, cfg.N, p, tail)
    op, info = build_operator(cfg)
    tol = cfg.tolerances
    eig = discrete_eigs_in_gaps(op, closed, cfg.box.L_list, tol.stab_tol, tol.interior, cfg.box.solver)
    rows, csvs = [], {}
    any_fail = False
    for i, pair in enumerate(eig.pairs):
        bound = closed_form_bound(cfg.model, pair.value, cfg.n, p, tail, kg_mode=cfg.kg_mode)
        shells = None
        if cfg.box.shell_hi:
            shells = (cfg.box.shell_lo, cfg.box.shell_hi)
        res = verify_decay(op, bound, pair.vector.box.L, shells, tol.slack, tol.stab_tol, pair=pair)
        any_fail |= res.status == "FAIL"
        row = pair.to_dict()
        row.update({
            "index": i,
            "case": bound.case,
            "status": res.status,
            "r_max": res.r_max,
            "rho_fit": res.rho_fit,
            "r_squared": res.fit.r_squared if res.fit else None,
            "shells": list(shells or default_shells(pair.vector.box.L)),
            "detail": res.detail,
            "diagnostics": list(bound.diagnostics),
            "tolerance": {"slack": tol.slack, "stab_tol": tol.stab_tol},
        })
        name = f"{cfg.output.stem}_eig{i}.csv"
        row["csv"] = name
        rows.append(row)
        csvs[name] = _profile_csv(pair.vector)
    report = {
        "command": "verify",
        "model": cfg.model,
        "essential": closed.essential.to_list(),
        "L_values": eig.L_values,
        "solver": eig.solver,
        "eigenvalues": rows,
        "all_passed": not any_fail,
        "tolerance": {"stab_tol": tol.stab_tol, "interior": tol.interior, "slack": tol.slack},
    }
    if info:
        report["band_truncation"] = info
    code = EXIT_FAILED if any_fail else EXIT_OK
    rounded = round_floats(_clean(report))
    if write_baseline is not None:
        write_atomic(write_baseline, dumps(rounded))
    if baseline is not None:
        try:
            expected = json.loads(Path(baseline).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read baseline: {exc}") from exc
        report["baseline"] = {"path": str(baseline), "match": expected == rounded, "digits": BASELINE_DIGITS}
        if expected != rounded:
            code = EXIT_FAILED
    return report, code, csvs


def _named_operator(cfg: ExperimentConfig, name: str) -> BandOperator:
    star = name.endswith("*")
    base = name[:-1] if star else name
    n = cfg.n
    if base == "model":
        op = build_operator(cfg)[0]
    elif base == "laplacian":
        op = laplacian(n, cfg.N)
    elif base == "dirac_block":
        op = dirac_block(cfg.params)
    elif base.startswith("d") and base[1:].isdigit() and 1 <= int(base[1:]) <= n:
        op = forward_difference(n, int(base[1:]) - 1, cfg.N)
    else:
        raise ConfigError(f"unknown operand {name!r} (model, laplacian, dirac_block, d1..d{n}, optional trailing *)")
    return adjoint(op) if star else op


def _coefficient_table(A: BandOperator, at) -> list:
    pt = np.asarray([at], dtype=np.int64)
    out = []
    for alpha in sorted(A.support):
        a = A.coeffs[alpha](pt)[0]
        if not np.any(a):
            continue
        out.append({"alpha": list(alpha), "re": np.real(a).tolist(), "im": np.imag(a).tolist()})
    return out


def cmd_symbol(cfg: ExperimentConfig, op: str, operand: str, other: Optional[str], at=None) -> tuple[dict, int]:
    at = tuple(at) if at is not None else (0,) * cfg.n
    if len(at) != cfg.n:
        raise ConfigError(f"--at needs {cfg.n} coordinates")
    A = _named_operator(cfg, operand)
    report = {"command": "symbol", "op": op, "operand": operand, "at": list(at), "tolerance": 0.0}
    if op == "compose":
        if other is None:
            raise ConfigError("compose needs --with")
        B = _named_operator(cfg, other)
        if (A.n, A.N) != (B.n, B.N):
            raise ConfigError("operands live on different spaces")
        report["with"] = other
        report["coefficients"] = _coefficient_table(compose(A, B), at)
    elif op == "adjoint":
        report["coefficients"] = _coefficient_table(adjoint(A), at)
    elif op == "coeffs":
        report["coefficients"] = _coefficient_table(A, at)
    elif op == "wiener":
        window = Box(cfg.n, max(int(L) for L in cfg.box.L_list))
        report["window_radius"] = window.L
        report["wiener_norm"] = wiener_norm(A, window)
    elif op == "conjugate":
        w = cfg.weight_spec()
        if w is None:
            raise ConfigError("conjugate needs a [weight] section")
        report["weight"] = w.label
        report["coefficients"] = _coefficient_table(weight_conjugate(A, w, 1.0), at)
        report["tolerance"] = 1e-12
    else:
        raise ConfigError(f"unknown symbol op {op!r}")
    if cfg.model == "klein_gordon" and operand.rstrip("*") == "model":
        report["band_truncation"] = build_operator(cfg)[1]
        report["tolerance"] = cfg.tolerances.band_tol
    return report, EXIT_OK


# --- entry point -------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lattice-spectra", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--grid", type=int, help="override the grid used by this command")
        sp.add_argument("--L", dest="L", type=str, help="comma-separated box radii, e.g. 40,60")
        sp.add_argument("--out", type=str, help="override output.directory")

    common(sub.add_parser("spectrum", help="closed-form essential spectrum and torus sweep"))
    d = sub.add_parser("decay", help="decay bounds at one lambda")
    common(d)
    d.add_argument("--lambda", dest="lam", type=float, required=True)
    v = sub.add_parser("verify", help="finite-section eigenvalues and decay verification")
    common(v)
    v.add_argument("--solver", choices=["auto", "dense", "sparse"])
    v.add_argument("--baseline", type=Path, help="golden report to compare against (rounded to 1e-9)")
    v.add_argument("--write-baseline", type=Path)
    s = sub.add_parser("symbol", help="coefficient-level calculus")
    common(s)
    s.add_argument("--op", required=True, choices=["compose", "adjoint", "wiener", "coeffs", "conjugate"])
    s.add_argument("--operand", default="model")
    s.add_argument("--with", dest="other")
    s.add_argument("--at", type=str, help="comma-separated lattice point for coefficient tables")
    return ap


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    data = cfg.to_dict()
    if args.out:
        data["output"]["directory"] = args.out
    if args.L:
        data["box"]["L_list"] = [int(x) for x in args.L.split(",")]
    if args.grid is not None:
        key = {"spectrum": "dirac_audit" if cfg.model == "dirac" else "sweep",
               "decay": "criterion", "verify": "kg_coeffs", "symbol": "kg_coeffs"}[args.command]
        data["grid"][key] = args.grid
    if getattr(args, "solver", None):
        data["box"]["solver"] = args.solver
    return ExperimentConfig.from_dict(data)


def _threads() -> Optional[int]:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer")
    if k < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer")
    return k


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _apply_overrides(ExperimentConfig.load(args.config), args)
        at = [int(x) for x in args.at.split(",")] if getattr(args, "at", None) else None
        with threadpool_limits(limits=_threads()):
            csvs = {}
            if args.command == "spectrum":
                report, code = cmd_spectrum(cfg)
            elif args.command == "decay":
                report, code = cmd_decay(cfg, args.lam)
            elif args.command == "verify":
                report, code, csvs = cmd_verify(cfg, args.baseline, args.write_baseline)
            else:
                report, code = cmd_symbol(cfg, args.op, args.operand, args.other, at)
    except (ConfigError, ValueError) as exc:
        print(f"lattice-spectra: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report["config"] = cfg.to_dict()
    out_dir = Path(cfg.output.directory)
    for name, text in csvs.items():
        write_atomic(out_dir / name, text)
    path = _report_path(cfg, args.command)
    write_atomic(path, dumps(report))
    for msg in report.get("diagnostics", []):
        print(f"lattice-spectra: {msg}", file=sys.stderr)
    if code == EXIT_INAPPLICABLE:
        print(f"lattice-spectra: lambda = {report.get('lambda')} lies in the essential spectrum", file=sys.stderr)
    if code == EXIT_FAILED:
        print("lattice-spectra: verification failed", file=sys.stderr)
    print(path)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
