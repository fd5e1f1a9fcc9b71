"""Command-line front end: ``oscibound {predict,solve,verify,oracle-compare}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checks
from .fredholm import TraceFunctional, born_phi, det_identity_residual
from .nystrom import GridResolutionError, assemble_L_V, build_grid, operator_norm
from .oracle import FDConfig, dense_phi_oracle, direct_eigensolve, h_minus2_sandwich_norm
from .potential import (
    PotentialError,
    PotentialSpec,
    integral_lambda0,
    sobolev_minus2_norm,
    sup_bound_M,
)
from .rootfind import (
    BracketError,
    predicted_energy,
    predicted_lambda,
    solve_bound_state,
    uniqueness_scan,
)

log = logging.getLogger("oscibound")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
PHI_SAMPLE_LAMBDAS = (0.5, 1.0, 2.0)
ORACLE_MIN_LAMBDA = 0.02
DET_CHECK_LAMBDA = 1.5

# fixed CSV layout of the solve report
SOLVE_COLUMNS = (
    "eps", "n_per_side", "int_lambda0", "lambda_pred", "lambda_star", "E_star", "E_pred",
    "g_residual", "sign_changes", "phi_lam_0.5", "phi_lam_1", "phi_lam_2",
    "hm2_norm", "sandwich_norm", "det_identity_residual", "oracle_E", "status",
)
PREDICT_COLUMNS = ("eps", "int_lambda0", "lambda_pred", "E_pred")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    potential: PotentialSpec
    eps_list: list[float]
    grid: list[int | None]
    oracle: FDConfig | None = None
    outputs: dict = field(default_factory=dict)

    def grid_for(self, i: int, cap: int = checks.SOLVE_GRID_CAP) -> int:
        n = self.grid[i]
        return checks.auto_grid_size(self.potential, self.eps_list[i], cap) if n is None else n


def _field(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"{where}: missing field '{key}'")
    return data[key]


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version} not supported (expected {SCHEMA_VERSION})")

    pot = _field(data, "potential", "config")
    if isinstance(pot, str):
        path = Path(pot)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            pot = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"potential: cannot load {path}: {exc}") from exc
    try:
        spec = PotentialSpec.from_dict(pot)
    except (PotentialError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"potential: {exc}") from exc

    eps_list = _field(data, "eps_list", "config")
    if not isinstance(eps_list, list) or not eps_list:
        raise ConfigError("eps_list: expected a non-empty list")
    try:
        eps_list = [float(e) for e in eps_list]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"eps_list: {exc}") from exc
    for i, e in enumerate(eps_list):
        if not 0.0 < e <= 1.0:
            raise ConfigError(f"eps_list[{i}]: {e} outside (0, 1]")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps_list: must be strictly decreasing")

    grid = data.get("grid", "auto")
    if grid == "auto" or grid is None:
        grid = [None] * len(eps_list)
    elif isinstance(grid, int):
        grid = [grid] * len(eps_list)
    elif isinstance(grid, list) and len(grid) == len(eps_list):
        grid = [None if g == "auto" else int(g) for g in grid]
    else:
        raise ConfigError("grid: expected 'auto', an integer, or a list matching eps_list")

    oracle = data.get("oracle")
    if oracle is not None:
        try:
            oracle = FDConfig(**oracle)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"oracle: {exc}") from exc

    outputs = data.get("outputs", {})
    if not isinstance(outputs, dict):
        raise ConfigError("outputs: expected an object")
    return ExperimentConfig(spec, eps_list, grid, oracle, outputs)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, p.parent)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return "nan"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return "%.12e" % float(value)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def write_json(path: Path, payload: dict) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(type(o))

    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2, default=default))


# ---------------------------------------------------------------- predict

def cmd_predict(cfg: ExperimentConfig) -> list[dict]:
    total = integral_lambda0(cfg.potential)
    if not total > 0:
        raise ConfigError("no modes: every amplitude is zero")
    return [
        {"eps": e, "int_lambda0": total, "lambda_pred": predicted_lambda(cfg.potential, e),
         "E_pred": predicted_energy(cfg.potential, e)}
        for e in cfg.eps_list
    ]


# ---------------------------------------------------------------- solve

def _solve_row(cfg: ExperimentConfig, i: int, seed: int) -> dict:
    spec, eps = cfg.potential, cfg.eps_list[i]
    t0 = time.perf_counter()
    row = {"eps": eps, "status": "ok"}
    total = integral_lambda0(spec)
    row["int_lambda0"] = total
    if total > 0:
        row["lambda_pred"] = predicted_lambda(spec, eps)
        row["E_pred"] = predicted_energy(spec, eps)
    try:
        n = cfg.grid_for(i)
        row["n_per_side"] = n
        grid = build_grid(spec, eps, n)
        tf = TraceFunctional(spec, eps, grid)
        for lam in PHI_SAMPLE_LAMBDAS:
            row[f"phi_lam_{lam:g}"] = tf(lam).phi
        row["hm2_norm"] = sobolev_minus2_norm(spec, eps)
        row["sandwich_norm"] = h_minus2_sandwich_norm(spec, eps)
        row["sign_changes"] = uniqueness_scan(spec, eps, grid, 200, lambda x: tf(x).phi)
        try:
            res = solve_bound_state(spec, eps, grid, phi_func=lambda x: tf(x).phi)
        except BracketError:
            res = None
            row["status"] = "no bound-state bracket"
        else:
            row.update(lambda_star=res.lambda_star, E_star=res.energy, g_residual=res.g_residual)
        # both sides of the identity vanish at the root, so check it at a fixed lambda
        n_det = min(n, checks.auto_grid_size(spec, eps, checks.DET_GRID_CAP))
        row["det_identity_residual"] = det_identity_residual(spec, eps, DET_CHECK_LAMBDA,
                                                             build_grid(spec, eps, n_det))
        if cfg.oracle is not None and res and res.lambda_star >= ORACLE_MIN_LAMBDA:
            ora = direct_eigensolve(spec, eps, cfg.oracle)
            row["oracle_E"] = ora.E if ora else None
    except Exception as exc:  # a failed row must not sink the sweep
        log.debug("eps=%g failed", eps, exc_info=True)
        row["status"] = f"{type(exc).__name__}: {exc}"
    row["wall_time"] = time.perf_counter() - t0
    return row


def _run_rows(cfg: ExperimentConfig, workers: int, seed: int) -> list[dict]:
    idx = range(len(cfg.eps_list))
    if workers <= 1:
        return [_solve_row(cfg, i, seed) for i in idx]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_row, [cfg] * len(idx), idx, [seed] * len(idx)))


def cmd_solve(cfg: ExperimentConfig, workers: int = 1, seed: int = 0) -> list[dict]:
    rows = _run_rows(cfg, workers, seed)
    M = sup_bound_M(cfg.potential)
    for r in rows:
        lam = r.get("lambda_star")
        if lam is not None and not 0.0 < lam <= M:
            r["status"] = f"lambda_star {lam} outside (0, {M}]"
    return rows


# ---------------------------------------------------------------- verify

def _slope_row(name, eps, values, lo=1.7, hi=2.3) -> checks.CheckResult:
    s = checks.loglog_slope(eps, values)
    return checks.CheckResult(name, lo <= s <= hi, f"slope {s:.3f}", f"in [{lo}, {hi}]")


def cmd_verify(cfg: ExperimentConfig, seed: int = 0) -> list[checks.CheckResult]:
    spec = cfg.potential
    out: list[checks.CheckResult] = []
    rng = np.random.default_rng(seed)
    phi_max, hm2, sand, good_eps = [], [], [], []
    for i, eps in enumerate(cfg.eps_list):
        tag = f"eps={eps:g}"
        try:
            n = cfg.grid_for(i)
            grid = build_grid(spec, eps, n)
        except (GridResolutionError, ValueError) as exc:
            out.append(checks.CheckResult(f"{tag} grid resolution", False, str(exc), "resolvable grid"))
            continue
        out.append(checks.CheckResult(f"{tag} grid resolution", True, f"n={n}, h={grid.h:.4g}", "resolvable grid"))
        try:
            tf = TraceFunctional(spec, eps, grid)
            phis = [abs(tf(lam).phi) for lam in np.geomspace(0.05, sup_bound_M(spec), 12)]
            phi_max.append(max(phis))
            lam = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
            n_det = checks.auto_grid_size(spec, eps, checks.DET_GRID_CAP)
            r = det_identity_residual(spec, eps, lam, build_grid(spec, eps, n_det))
            out.append(checks.CheckResult(f"{tag} det identity", r <= 1e-8, f"{r:.2e} at lambda={lam:.4g}", "<= 1e-8"))
            b2 = born_phi(spec, eps, 1.5, grid, 2)
            p = tf(1.5).phi
            d = abs(b2 - p) / max(abs(p), 1e-300)
            out.append(checks.CheckResult(f"{tag} Born order 2", d <= 1e-12, f"{d:.2e}", "<= 1e-12"))
            L = assemble_L_V(spec, eps, 1.0, build_grid(spec, eps, n_det)).matrix
            nrm = operator_norm(L @ L, seed=seed)
            out.append(checks.CheckResult(f"{tag} |L_V(1)^2|", True, f"{nrm:.4g}", "reported"))
            try:
                g24 = build_grid(spec, eps, 24)
            except GridResolutionError:
                g24 = None
            if g24 is not None:
                a = TraceFunctional(spec, eps, g24)(1.5).phi
                o = dense_phi_oracle(spec, eps, 1.5, g24)
                d = abs(a - o) / max(abs(o), 1e-300)
                out.append(checks.CheckResult(f"{tag} dense trace oracle", d <= 1e-10, f"{d:.2e}", "<= 1e-10"))
            hm2.append(sobolev_minus2_norm(spec, eps))
            sand.append(h_minus2_sandwich_norm(spec, eps))
            good_eps.append(eps)
        except Exception as exc:
            out.append(checks.CheckResult(f"{tag} invariants", False, f"{type(exc).__name__}: {exc}", "no error"))
    if len(good_eps) >= 3 and any(hm2):
        out.append(_slope_row("H^-2 norm vs eps", good_eps, hm2))
        out.append(_slope_row("sandwich norm vs eps", good_eps, sand))
        out.append(_slope_row("max |phi| vs eps", good_eps, phi_max))
    out.append(checks.criterion_a9())
    return out


# ---------------------------------------------------------------- oracle-compare

def cmd_oracle_compare(cfg: ExperimentConfig) -> list[dict]:
    if cfg.oracle is None:
        raise ConfigError("oracle: section required for oracle-compare")
    spec = cfg.potential
    total = integral_lambda0(spec)
    rows = []
    for i, eps in enumerate(cfg.eps_list):
        if total > 0:
            lam_pred = predicted_lambda(spec, eps)
            if lam_pred < ORACLE_MIN_LAMBDA:
                raise ConfigError(
                    f"eps={eps}: predicted lambda {lam_pred:.3e} < {ORACLE_MIN_LAMBDA}; the bound state "
                    "extends over ~1/lambda and a finite-difference box cannot hold it"
                )
        row = {"eps": eps, "E_nystrom": None, "E_oracle": None, "gap": None}
        try:
            res = solve_bound_state(spec, eps, build_grid(spec, eps, cfg.grid_for(i)))
            row["E_nystrom"] = res.energy
        except BracketError:
            pass
        ora = direct_eigensolve(spec, eps, cfg.oracle)
        if ora is not None:
            row["E_oracle"] = ora.E
            row["truncation_flag"] = ora.truncation_flag
        if row["E_nystrom"] is not None and row["E_oracle"] is not None:
            row["gap"] = abs(row["E_nystrom"] - row["E_oracle"]) / abs(row["E_oracle"])
        rows.append(row)
    return rows


# ---------------------------------------------------------------- entry point

def _print_table(rows, columns):
    print("  ".join(f"{c:>14}" for c in columns))
    for r in rows:
        cells = []
        for c in columns:
            v = r.get(c)
            cells.append(f"{v:>14.6g}" if isinstance(v, float) else f"{str(v):>14}")
        print("  ".join(cells))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscibound", description=__doc__)
    parser.add_argument("command", choices=["predict", "solve", "verify", "oracle-compare"])
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", default=".", help="output directory for CSV/JSON reports")
    parser.add_argument("--workers", type=int, default=1, help="process pool size for eps rows")
    parser.add_argument("--grid", type=int, default=None, help="override n_per_side for every eps")
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("OSCIBOUND_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        if args.grid is not None:
            cfg.grid = [args.grid] * len(cfg.eps_list)
        out.mkdir(parents=True, exist_ok=True)

        if args.command == "predict":
            rows = cmd_predict(cfg)
            _print_table(rows, PREDICT_COLUMNS)
            write_csv(out / cfg.outputs.get("csv", "predict.csv"), PREDICT_COLUMNS, rows)
            return EXIT_OK

        if args.command == "solve":
            rows = cmd_solve(cfg, args.workers, args.seed)
            _print_table(rows, ("eps", "n_per_side", "lambda_star", "E_star", "sign_changes", "status"))
            write_csv(out / cfg.outputs.get("csv", "sweep.csv"), SOLVE_COLUMNS, rows)
            write_json(out / cfg.outputs.get("json", "sweep.json"),
                       {"columns": list(SOLVE_COLUMNS), "rows": rows})
            return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_FAIL

        if args.command == "verify":
            results = cmd_verify(cfg, args.seed)
            for r in results:
                print(r.line())
            write_json(out / cfg.outputs.get("verify", "verify.json"),
                       {"checks": [r.to_dict() for r in results]})
            return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL

        rows = cmd_oracle_compare(cfg)
        for r in rows:
            if r["E_nystrom"] is None and r["E_oracle"] is None:
                print(f"eps={r['eps']:g}: no bound state (both methods)")
            else:
                gap = "n/a" if r["gap"] is None else f"{r['gap']:.2%}"
                print(f"eps={r['eps']:g}: E_nystrom={r['E_nystrom']}  E_oracle={r['E_oracle']}  gap={gap}")
        write_json(out / cfg.outputs.get("oracle", "oracle_compare.json"), {"rows": rows})
        ok = all((r["E_nystrom"] is None) == (r["E_oracle"] is None) for r in rows)
        return EXIT_OK if ok else EXIT_FAIL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PotentialError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
