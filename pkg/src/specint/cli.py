"""Batch runner: sweep operators across truncation sizes and write reports.

Commands:
  specint run --config <path> [--out <dir>] [--jobs <n>]
  specint list
  specint check --operator <name> --N <n>

All tables are CSV with a fixed header and 17-significant-digit floats, so
two runs under the same SPECINT_SEED produce byte-identical bodies; wall
times and timestamps appear only in the JSON manifest.  The exit code is 0
exactly when every non-heuristic check passes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import (
    ParseError,
    RunConfig,
    ScalarField,
    ValidationError,
    get_operator,
    list_operators,
    load_config,
)
from .direct_integral import (
    build_direct_integral,
    embed,
    intertwining_residual,
    norm,
)
from .plots import save_convergence_curve, save_measure_histogram
from .pvm import (
    BorelSet,
    Interval,
    moment_identity_check,
    pvm_axiom_report,
    reconstruction_residual,
)
from .rng import env_seed, stream, unit_vector
from .sampling import eigendecompose, make_truncation
from .selfadjoint_probe import (
    FitError,
    essential_selfadjointness_heuristic,
    power_commutation_check,
    range_indicator_experiment,
)
from .spectral_measure import (
    cauchy_schwarz_check,
    kolmogorov_distance,
    pair_measure,
    spectral_probability_measure,
    tail_mass_check,
)

HEURISTIC_PREFIX = "HEURISTIC:"


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "_.-" else "_" for c in name)


def semicircle_cdf(t: float) -> float:
    """Distribution function of the standard semicircle law on [-2, 2]."""
    t = min(2.0, max(-2.0, float(t)))
    return 0.5 + t * np.sqrt(4.0 - t * t) / (4.0 * np.pi) + np.arcsin(t / 2.0) / np.pi


@dataclass
class CellResult:
    operator: str
    n: int
    checks: list[tuple[str, float, float, bool]] = field(default_factory=list)
    pvm_rows: list[tuple[str, float, float, bool]] = field(default_factory=list)
    mu_rows: list[tuple[float, float, float]] = field(default_factory=list)
    nu_rows: list[tuple[float, float, float]] = field(default_factory=list)
    section_rows: list[tuple[float, int, float, float]] = field(default_factory=list)
    experiment_rows: list[tuple[str, int, int, float]] = field(default_factory=list)
    convergence_rows: list[tuple[str, float]] = field(default_factory=list)
    measure: object = None
    wall_s: float = 0.0
    error: str | None = None

    @property
    def all_pass(self) -> bool:
        if self.error is not None:
            return False
        return all(ok for _, _, _, ok in self.checks + self.pvm_rows)


def _quantile_sets(positions: np.ndarray) -> list[BorelSet]:
    """Deterministic interval family spanning the observed spectrum."""
    lo = float(positions.min()) - 1.0
    hi = float(positions.max()) + 1.0
    q1, q2, q3 = (float(np.quantile(positions, q)) for q in (0.25, 0.5, 0.75))
    sets = [
        BorelSet.of(Interval(lo, q1, True, True)),
        BorelSet.of(Interval(q1, q2, False, True)),
        BorelSet.of(Interval(q2, q3, False, True)),
        BorelSet.of(Interval(q3, hi, False, True)),
    ]
    if q1 < q2 < q3:
        sets.append(BorelSet.of(Interval(lo, q1, True, True),
                                Interval(q2, q3, False, True)))
    return sets


def run_cell(spec, n: int, cfg: RunConfig, seed: int) -> CellResult:
    """Full pipeline for one (operator, truncation size) pair."""
    label = spec.name
    out = CellResult(operator=label, n=n)
    t0 = time.monotonic()
    try:
        tols = cfg.tolerances
        t = make_truncation(spec, n, cfg.resolve_weights(n))
        d = eigendecompose(t, tols.tol_cluster)
        complex_field = spec.field is ScalarField.COMPLEX

        mu = spectral_probability_measure(t, d, tols.tol_atom)
        out.measure = mu
        out.mu_rows = [(float(p), float(np.real(m)), float(np.imag(m)))
                       for p, m in zip(mu.positions, mu.masses)]
        out.checks.append((
            "normalization",
            abs(mu.total_mass + mu.dropped_mass - 1.0), 1e-12,
            abs(mu.total_mass + mu.dropped_mass - 1.0) <= 1e-12,
        ))

        x = unit_vector(stream(seed, f"x:{label}:{n}"), n, complex_field)
        y = unit_vector(stream(seed, f"y:{label}:{n}"), n, complex_field)
        nu = pair_measure(t, d, x, y, tols.tol_atom)
        out.nu_rows = [(float(p), float(np.real(m)), float(np.imag(m)))
                       for p, m in zip(nu.positions, nu.masses)]

        def check(name: str, value: float, bound: float) -> None:
            out.checks.append((name, float(value), float(bound), value <= bound))

        tv, prod = cauchy_schwarz_check(t, d, x, y)
        check("cauchy_schwarz", max(0.0, tv - prod), 1e-12)
        for radius in (1, 2, 4):
            actual, bound = tail_mass_check(t, d, radius, tols.tol_atom)
            check(f"tail_bound[n={radius}]", max(0.0, actual - bound), 1e-12)

        worst = 0.0
        for k in range(7):
            q, direct = moment_identity_check(t, d, x, k, tols.tol_atom)
            worst = max(worst, abs(q - direct) / (1.0 + abs(direct)))
        check("moment_identity[k<=6]", worst, 1e-9)

        di = build_direct_integral(t, d, tols.tol_atom, tols.tol_psd)
        gram_defect = 0.0
        rank_mismatches = 0
        for i, frame in enumerate(di.frames):
            u = di.field.gram(i)
            scale = 1.0 + float(np.max(np.abs(u)))
            gram_defect = max(gram_defect, float(np.max(np.abs(frame.gram() - u))) / scale)
            if frame.rank != d.multiplicity(int(np.flatnonzero(
                    d.representatives == di.field.positions[i])[0])):
                rank_mismatches += 1
        check("gram_reproduction", gram_defect, 1e-9)
        check("fiber_rank", float(rank_mismatches), 0.5)

        check("isometry", abs(norm(di, embed(di, x)) - 1.0), 1e-9)
        check("intertwining", intertwining_residual(di, x) / (1.0 + t.scale), 1e-9)
        check("reconstruction",
              reconstruction_residual(t, d, tols.tol_atom) / (1.0 + t.scale), 1e-9)

        xs = embed(di, x)
        for pos, frame, block in zip(di.measure.positions, di.frames, xs.blocks):
            for ci, val in enumerate(block):
                out.section_rows.append((float(pos), ci, float(np.real(val)),
                                         float(np.imag(val))))

        for name, value, bound, ok in pvm_axiom_report(
                t, d, _quantile_sets(mu.positions), x, y, tols.tol_atom):
            out.pvm_rows.append((name, value, bound, ok))

        # full-frame probes carry honest bounds: a band enclosing all atoms
        # keeps the ramp shoulders atom-free for every k, and a tight pad
        # keeps the ramp kinks near the fit-interval edges where Chebyshev
        # nodes cluster.  Slopes the degree cap cannot certify for a wide
        # spectrum are recorded as unfit rather than failing the cell.
        a_enc = float(mu.positions.min()) - 0.75
        b_enc = float(mu.positions.max()) + 0.75
        radius = float(np.max(np.abs(mu.positions))) + 1.0
        x_norm = norm(di, xs)
        for k in (2, 4, 8, 16):
            try:
                (_, dk), = range_indicator_experiment(di, x, n, a_enc, b_enc,
                                                      radius, (k,))
            except FitError as fe:
                out.experiment_rows.append(("range_indicator_unfit", n, k,
                                            float(fe.best_error)))
                continue
            check(f"range_indicator[k={k}]", dk, (1.0 / k) * x_norm + 1e-10)
            out.experiment_rows.append(("range_indicator", n, k, dk))
        for k, defect, bound, _ in power_commutation_check(di, x, n, radius, 3):
            check(f"power_commutation[k={k}]", defect, bound)
            out.experiment_rows.append(("power_commutation", n, k, defect))
        if n >= 4:
            m_half = n // 2
            x_half = np.zeros(n, dtype=x.dtype)
            x_half[:m_half] = x[:m_half]
            nrm = float(np.linalg.norm(x_half))
            if nrm > 0:
                x_half = x_half / nrm
                for k in (2, 4, 8, 16):
                    try:
                        (_, dk), = range_indicator_experiment(
                            di, x_half, m_half, a_enc, b_enc, radius, (k,))
                    except FitError:
                        continue
                    out.experiment_rows.append(("range_indicator_subframe",
                                                m_half, k, dk))
                for k, defect, _, _ in power_commutation_check(
                        di, x_half, m_half, radius, 3):
                    out.experiment_rows.append(("power_commutation_subframe",
                                                m_half, k, defect))

        if label == "free_jacobi":
            e1 = np.zeros(n)
            e1[0] = 1.0
            nu_e1 = pair_measure(t, d, e1, e1, tols.tol_atom)
            out.convergence_rows.append(
                ("kolmogorov_semicircle", kolmogorov_distance(nu_e1, semicircle_cdf)))
        out.convergence_rows.append(("dropped_mass", float(mu.dropped_mass)))
    except Exception as exc:  # noqa: BLE001
        out.error = f"{type(exc).__name__}: {exc}"
    out.wall_s = time.monotonic() - t0
    return out


def _write_csv(path: Path, header: str, lines: list[str]) -> None:
    path.write_text(header + "\n" + "".join(line + "\n" for line in lines),
                    encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_batch(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> int:
    """Execute all cells, write reports, and return the process exit code."""
    seed = env_seed()
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    cells = sorted(((spec, n) for spec in cfg.operators for n in cfg.N_list),
                   key=lambda c: (c[0].name, c[1]))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda c: run_cell(c[0], c[1], cfg, seed), cells))
    else:
        results = [run_cell(spec, n, cfg, seed) for spec, n in cells]

    heuristic_rows: list[tuple[str, str, int, int, float]] = []
    scales = sorted(set(cfg.N_list))
    if len(scales) >= 2:
        for spec in sorted(cfg.operators, key=lambda s: s.name):
            try:
                rows = essential_selfadjointness_heuristic(
                    spec, scales, {"e1": np.asarray([1.0])})
            except ValidationError:
                continue
            for vec_label, na, nb, dist in rows:
                heuristic_rows.append((f"{HEURISTIC_PREFIX}selfadjointness[{vec_label}]",
                                       spec.name, nb, na, dist))

    files: dict[str, str] = {}

    check_lines = []
    pvm_lines = []
    conv_lines = []
    exp_lines = []
    for r in results:
        if r.error is not None:
            continue
        safe = _safe(r.operator)
        mu_path = out_dir / f"measure_mu_{safe}_N{r.n}.csv"
        _write_csv(mu_path, "lambda,mass_re,mass_im",
                   [f"{_fmt(p)},{_fmt(re)},{_fmt(im)}" for p, re, im in r.mu_rows])
        nu_path = out_dir / f"measure_nu_{safe}_N{r.n}.csv"
        _write_csv(nu_path, "lambda,mass_re,mass_im",
                   [f"{_fmt(p)},{_fmt(re)},{_fmt(im)}" for p, re, im in r.nu_rows])
        sec_path = out_dir / f"sections_{safe}_N{r.n}.csv"
        _write_csv(sec_path, "lambda,coord_index,value_re,value_im",
                   [f"{_fmt(p)},{ci},{_fmt(re)},{_fmt(im)}"
                    for p, ci, re, im in r.section_rows])
        for p in (mu_path, nu_path, sec_path):
            files[p.name] = _sha256(p)
        for name, value, bound, ok in r.checks:
            check_lines.append(f"{name},{r.operator},{r.n},{_fmt(value)},{_fmt(bound)},"
                               f"{'true' if ok else 'false'}")
        for name, value, bound, ok in r.pvm_rows:
            pvm_lines.append(f"{name},{r.operator},{r.n},{_fmt(value)},{_fmt(bound)},"
                             f"{'true' if ok else 'false'}")
        for metric, value in r.convergence_rows:
            conv_lines.append(f"{r.operator},{r.n},{metric},{_fmt(value)}")
        for exp, m, k, value in r.experiment_rows:
            exp_lines.append(f"{exp},{r.operator},{r.n},{m},{k},{_fmt(value)}")
    for exp, op, nb, na, dist in heuristic_rows:
        exp_lines.append(f"{exp},{op},{nb},{na},0,{_fmt(dist)}")
        conv_lines.append(f"{op},{nb},{exp},{_fmt(dist)}")

    checks_path = out_dir / "checks.csv"
    _write_csv(checks_path, "check_name,operator,N,value,bound,pass", check_lines)
    pvm_path = out_dir / "pvm_report.csv"
    _write_csv(pvm_path, "check_name,operator,N,value,bound,pass", pvm_lines)
    conv_path = out_dir / "convergence.csv"
    _write_csv(conv_path, "operator,N,metric,value", conv_lines)
    exp_path = out_dir / "experiments.csv"
    _write_csv(exp_path, "experiment,operator,N,m,k,value", exp_lines)
    for p in (checks_path, pvm_path, conv_path, exp_path):
        files[p.name] = _sha256(p)

    by_op: dict[str, list[CellResult]] = {}
    for r in results:
        if r.error is None:
            by_op.setdefault(r.operator, []).append(r)
    for op, cell_list in sorted(by_op.items()):
        safe = _safe(op)
        biggest = max(cell_list, key=lambda r: r.n)
        fig1 = save_measure_histogram(biggest.measure,
                                      out_dir / f"measure_{safe}.png",
                                      f"{op}: induced measure at N={biggest.n}")
        files[fig1.name] = _sha256(fig1)
        semi = [(r.n, v) for r in sorted(cell_list, key=lambda r: r.n)
                for metric, v in r.convergence_rows if metric == "kolmogorov_semicircle"]
        if len(semi) >= 2:
            fig2 = save_convergence_curve(semi, out_dir / f"convergence_{safe}.png",
                                          f"{op}: distance to semicircle",
                                          "Kolmogorov distance")
            files[fig2.name] = _sha256(fig2)

    all_pass = all(r.all_pass for r in results)
    manifest = {
        "started_utc": started,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "operators": [spec.name for spec in cfg.operators],
        "N_list": list(cfg.N_list),
        "weights": cfg.weights if isinstance(cfg.weights, str) else list(cfg.weights),
        "tolerances": {
            "tol_cluster": cfg.tolerances.tol_cluster,
            "tol_atom": cfg.tolerances.tol_atom,
            "tol_psd": cfg.tolerances.tol_psd,
        },
        "cells": [
            {"operator": r.operator, "N": r.n, "wall_s": round(r.wall_s, 6),
             "checks": len(r.checks) + len(r.pvm_rows),
             "pass": r.all_pass, "error": r.error}
            for r in results
        ],
        "files": files,
        "all_checks_pass": all_pass,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True),
                                           encoding="ascii")

    for r in results:
        if r.error is not None:
            print(f"[{r.operator} N={r.n}] ERROR: {r.error}", file=sys.stderr)
        else:
            total = len(r.checks) + len(r.pvm_rows)
            passed = sum(ok for _, _, _, ok in r.checks + r.pvm_rows)
            print(f"[{r.operator} N={r.n}] {passed}/{total} checks pass")
            for name, value, bound, ok in r.checks + r.pvm_rows:
                if not ok:
                    print(f"  FAIL {name}: value={_fmt(value)} bound={_fmt(bound)}",
                          file=sys.stderr)
    print(f"report written to {out_dir}")
    return 0 if all_pass else 1


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else (cfg.output_dir or Path("specint_out"))
    try:
        return run_batch(cfg, out_dir, jobs=max(1, args.jobs))
    except (ParseError, ValidationError) as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return 2


def _cmd_list(_args) -> int:
    for name, summary in list_operators():
        print(f"{name:28s} {summary}")
    return 0


def _cmd_check(args) -> int:
    try:
        spec = get_operator(args.operator)
        cfg = RunConfig(operators=(spec,), N_list=(args.N,))
        cell = run_cell(spec, args.N, cfg, env_seed())
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cell.error is not None:
        print(f"error: {cell.error}", file=sys.stderr)
        return 2
    for name, value, bound, ok in cell.checks + cell.pvm_rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: value={_fmt(value)} bound={_fmt(bound)}")
    ok_all = cell.all_pass
    print(f"{'OK' if ok_all else 'FAILED'}: {args.operator} N={args.N}")
    return 0 if ok_all else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specint",
        description="Finite-scale spectral decomposition reports for Hermitian operators.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a batch described by a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON run config")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel cells")
    p_run.set_defaults(func=_cmd_run)
    p_list = sub.add_parser("list", help="show the operator registry")
    p_list.set_defaults(func=_cmd_list)
    p_check = sub.add_parser("check", help="run one (operator, N) cell and print checks")
    p_check.add_argument("--operator", required=True)
    p_check.add_argument("--N", type=int, required=True)
    p_check.set_defaults(func=_cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
