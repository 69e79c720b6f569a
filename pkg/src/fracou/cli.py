"""Command-line interface.

Exit codes:
    0  success
    1  a verdict came out FAIL
    2  usage or configuration error
    3  numeric error (failed accuracy target, indefinite matrix, degenerate path)
    4  inconclusive verdict
    5  input/output error
"""

import argparse
import csv
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .berry_esseen import (AUDIT_NAMES, FAIL, INCONCLUSIVE, MonteCarloConfig, bound_audit,
                           mc_experiment, rate_sweep)
from .config import RunConfig, load_config
from .covariance import gram_matrix
from .cumulants import cumulant_decay_table, mc_cumulants
from .errors import (ConfigError, DegeneratePathError, NumericAccuracyError, ParameterDomainError)
from .estimator import moment_estimate
from .noise import (Family, NoiseSpec, hypothesis_h3_check, kernel_cov, kernel_matrix,
                    standard_grid)
from .reports import (RATE_POINT_COLUMNS, OutputError, now_utc, rate_point_rows, rate_svg,
                      write_csv, write_json, write_manifest, write_text)
from .sampler import CHOLESKY_EXACT, SUBSTEP_EULER, cholesky_draws, default_workers, substep_draws

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC, EXIT_INCONCLUSIVE, EXIT_IO = 0, 1, 2, 3, 4, 5
COMMANDS = ("simulate", "estimate", "cumulants", "kolmogorov", "rate-sweep", "bound-audit",
            "kernels-check")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="INI run configuration")
    common.add_argument("--seed", metavar="U64", type=lambda s: int(s, 0), default=argparse.SUPPRESS,
                        help="master seed (overrides [run] seed)")
    common.add_argument("--workers", metavar="N", type=int, default=argparse.SUPPRESS,
                        help="worker threads (default: $FOU_WORKERS or 1)")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                        help="output directory")
    parser = _Parser(prog="fracou", description=__doc__.splitlines()[0], parents=[common],
                     formatter_class=argparse.RawDescriptionHelpFormatter,
                     epilog=__doc__.split("\n", 2)[2])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "simulate": "draw observation vectors and write paths.csv",
        "estimate": "moment estimates for simulated or given paths",
        "cumulants": "exact (and optionally Monte Carlo) cumulants of W_n",
        "kolmogorov": "Kolmogorov distance of the normalized estimator at one n",
        "rate-sweep": "Kolmogorov distances over several n and the fitted rate",
        "bound-audit": "numeric audits of covariance bounds",
        "kernels-check": "kernel sanity checks and the mixed-partial hypothesis check",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


# --------------------------------------------------------------------------

def _settings(args, cfg: RunConfig):
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg.set("run", "seed", seed)
    workers = getattr(args, "workers", None)
    if workers is not None:
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.set("run", "workers", workers)
    out = getattr(args, "out", None) or cfg.get("run", "out") or "fracou_out"
    cfg.set("run", "out", out)
    workers = cfg.get("run", "workers") or default_workers()
    return cfg.get("run", "seed", 0), workers, out


def _method(name):
    if name not in (CHOLESKY_EXACT, SUBSTEP_EULER):
        raise ConfigError(f"method must be {CHOLESKY_EXACT} or {SUBSTEP_EULER}, got {name!r}")
    return name


def _draw_paths(model, method, substeps, seed, count, workers):
    if count < 1:
        raise ConfigError("count must be >= 1")
    if method == CHOLESKY_EXACT:
        gram = gram_matrix(model)
        return cholesky_draws(gram, seed, count, workers=workers), {"jitter": gram.jitter}
    return substep_draws(model, substeps, seed, count, workers=workers), {"substeps": substeps}


def run_simulate(cfg, seed, workers, out):
    model = cfg.model()
    sec = cfg.values["simulate"]
    method = _method(sec["method"])
    rows, notes = _draw_paths(model, method, sec["substeps"], seed, sec["count"], workers)
    header = [f"x_{j}" for j in range(1, model.n + 1)]
    files = [write_csv(out, "paths.csv", header, rows.tolist())]
    files.append(write_json(out, "simulate.json", {
        "model": model.to_dict(), "seed": seed, "method": method, "count": sec["count"],
        "notes": notes, "paths": rows}))
    return files, EXIT_OK, f"wrote {sec['count']} paths of length {model.n}"


def _read_paths(path, n):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [[float(v) for v in r] for r in reader if r]
    except OSError as exc:
        raise OutputError(f"cannot read paths file {path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise ConfigError(f"paths file {path} has a non-numeric entry: {exc}") from exc
    if header is None or not rows:
        raise ConfigError(f"paths file {path} has no data rows")
    if any(len(r) != n for r in rows):
        raise ConfigError(f"paths file {path}: every row must have model.n = {n} values")
    return np.array(rows)


def run_estimate(cfg, seed, workers, out):
    model = cfg.model()
    sec = cfg.values["estimate"]
    if sec["paths"]:
        rows = _read_paths(sec["paths"], model.n)
        source = {"paths_file": sec["paths"]}
    else:
        rows, notes = _draw_paths(model, _method(sec["method"]), sec["substeps"], seed,
                                  sec["count"], workers)
        source = {"method": sec["method"], "seed": seed, "notes": notes}
    results = [moment_estimate(r, model.hurst) for r in rows]
    table = [[i, r.b_n, r.theta_hat] for i, r in enumerate(results)]
    files = [write_csv(out, "estimates.csv", ["replicate", "b_n", "theta_hat"], table)]
    files.append(write_json(out, "estimate.json", {
        "model": model.to_dict(), "source": source, "estimates": [r.to_dict() for r in results]}))
    return files, EXIT_OK, f"estimated theta for {len(results)} paths"


CUMULANT_COLUMNS = ["n", "method", "k2", "k3", "k4", "sigma_b_sq_ref", "gap_k2", "gap_k3",
                    "gap_k4", "se_k2", "se_k3", "se_k4", "replicates"]


def run_cumulants(cfg, seed, workers, out):
    model = cfg.model()
    ns = cfg.values["cumulants"]["ns"]
    mc = cfg.values["cumulants"]["mc_replicates"]
    table = cumulant_decay_table(model, ns, cfg.values["tolerance"]["sigma_b_sq"])
    reports = list(table.reports)
    if mc:
        big = gram_matrix(model.with_n(max(ns)))
        ref = reports[0].sigma_b_sq_ref
        for n in ns:
            reports.append(mc_cumulants(big.leading(n), seed, mc, workers, ref))
    rows = []
    for r in reports:
        se = r.stderr or {}
        g = r.gaps
        rows.append([r.n, r.method, r.k2, r.k3, r.k4, r.sigma_b_sq_ref, g["k2"], g["k3"], g["k4"],
                     se.get("k2"), se.get("k3"), se.get("k4"), r.replicates])
    files = [write_csv(out, "cumulants.csv", CUMULANT_COLUMNS, rows)]
    payload = table.to_dict()
    payload["monte_carlo"] = [r.to_dict() for r in reports[len(table.reports):]]
    files.append(write_json(out, "cumulants.json", payload))
    return files, EXIT_OK, "slopes " + ", ".join(f"{k}={v:.4f}" for k, v in table.slopes.items())


def _mc_config(cfg, model, seed, workers, ns):
    sec = cfg.values["montecarlo"]
    try:
        return MonteCarloConfig(model, sec["replicates"], seed, ns, _method(sec["method"]),
                                sec["substeps"], workers, cfg.values["tolerance"]["sigma_b_sq"])
    except ParameterDomainError as exc:
        raise ConfigError(f"invalid [montecarlo] section: {exc}") from exc


def run_kolmogorov(cfg, seed, workers, out):
    model = cfg.model()
    mcc = _mc_config(cfg, model, seed, workers, [model.n])
    rep = mc_experiment(mcc, model.n)
    files = [write_csv(out, "kolmogorov.csv", RATE_POINT_COLUMNS,
                       [[rep.n, rep.d_kol_hat, rep.dkw_halfwidth, rep.at_noise_floor, rep.M,
                         rep.sigma1_sq, rep.mean, rep.mean_stderr]])]
    files.append(write_json(out, "kolmogorov.json", {"report": rep.to_dict(), "config": mcc.to_dict()}))
    return files, EXIT_OK, f"n={rep.n} d_kol_hat={rep.d_kol_hat!r}"


def run_rate_sweep(cfg, seed, workers, out):
    model = cfg.model()
    ns = cfg.values["montecarlo"]["ns"]
    if not ns:
        raise ConfigError("missing required key montecarlo.ns for rate-sweep")
    try:
        model.require_rate_regime()
    except ParameterDomainError as exc:
        raise ConfigError(str(exc)) from exc
    mcc = _mc_config(cfg, model, seed, workers, ns)
    try:
        report = rate_sweep(mcc)
    except ParameterDomainError as exc:
        raise ConfigError(str(exc)) from exc
    files = [write_json(out, "rate_report.json", report.to_dict()),
             write_csv(out, "rate_points.csv", RATE_POINT_COLUMNS, rate_point_rows(report)),
             write_text(out, "rate_plot.svg", rate_svg(report))]
    code = {FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}.get(report.verdict, EXIT_OK)
    return files, code, f"{report.verdict}: slope {report.slope!r} vs threshold {report.threshold!r}"


def run_bound_audit(cfg, seed, workers, out):
    sec = cfg.values["audit"]
    names = sec["names"] or list(AUDIT_NAMES)
    unknown = [n for n in names if n not in AUDIT_NAMES]
    if unknown:
        raise ConfigError(f"unknown audit(s) {', '.join(unknown)}; choose from {', '.join(AUDIT_NAMES)}")
    if len(sec["extents"]) != 2:
        raise ConfigError("audit.extents needs exactly two values")
    reports = [bound_audit(n, extents=sec["extents"]) for n in names]
    rows = [[r.name, r.inner_sup_ratio, r.sup_ratio, " ".join(repr(a) for a in r.argmax), r.passed]
            for r in reports]
    files = [write_csv(out, "audit.csv", ["name", "sup_small_extent", "sup_large_extent",
                                          "argmax", "passed"], rows),
             write_json(out, "audit.json", {"extents": sec["extents"],
                                            "audits": [r.to_dict() for r in reports]})]
    failed = [r.name for r in reports if not r.passed]
    code = EXIT_FAIL if failed else EXIT_OK
    return files, code, ("all audits passed" if not failed else "failed: " + ", ".join(failed))


def kernel_sanity(noise: NoiseSpec, values):
    """Symmetry, vanishing at the origin, PSD and degeneracy checks on a grid."""
    v = np.array(sorted(set(float(x) for x in values)))
    S, T = np.meshgrid(v, v, indexing="ij")
    R = kernel_cov(noise, S, T)
    checks = {
        "symmetry_max_abs": float(np.max(np.abs(R - R.T))),
        "origin_max_abs": float(np.max(np.abs(kernel_cov(noise, np.zeros_like(v), v)))),
    }
    K = kernel_matrix(noise, v)
    lam = float(np.linalg.eigvalsh(K)[0])
    checks["min_eigenvalue"] = lam
    checks["psd"] = bool(lam >= -1e-8 * float(np.max(np.diag(K))))
    degenerate = None
    if noise.family in (Family.BI_FBM, Family.SUB_BI_FBM) and noise.k == 1.0:
        degenerate = NoiseSpec.fbm(noise.hprime) if noise.family is Family.BI_FBM else NoiseSpec.sub_fbm(noise.hprime)
    elif noise.family is Family.GENERALIZED_FBM and noise.gfbm_b == 0:
        degenerate = NoiseSpec.fbm(noise.hurst)
    elif noise.family is Family.GENERALIZED_FBM and noise.gfbm_a == noise.gfbm_b:
        degenerate = NoiseSpec.sub_fbm(noise.hurst)
    if degenerate is not None:
        checks["degeneracy_family"] = degenerate.family.value
        checks["degeneracy_max_abs"] = float(np.max(np.abs(R - kernel_cov(degenerate, S, T))))
    ok = (checks["symmetry_max_abs"] <= 1e-14 * max(1.0, float(np.max(np.abs(R))))
          and checks["origin_max_abs"] <= 1e-14 and checks["psd"]
          and checks.get("degeneracy_max_abs", 0.0) <= 1e-12)
    checks["passed"] = bool(ok)
    return checks


def run_kernels_check(cfg, seed, workers, out):
    noise = cfg.noise()
    sec = cfg.values["kernels"]
    grid_values = sec["grid"]
    if any(x <= 0 for x in grid_values) or len(set(grid_values)) < 2:
        raise ConfigError("kernels.grid needs at least two distinct positive values")
    sanity = kernel_sanity(noise, grid_values)
    rep = hypothesis_h3_check(noise, standard_grid(grid_values), sec["hypothesis"])
    rows = [[s, t, r] for (s, t), r in zip(rep.points, rep.ratios)]
    files = [write_csv(out, "kernels_check.csv", ["s", "t", "ratio"], rows),
             write_json(out, "kernels_check.json", {"noise": noise.to_dict(), "sanity": sanity,
                                                    "hypothesis": rep.to_dict()})]
    ok = sanity["passed"] and rep.passed
    msg = f"{rep.name} sup ratio {rep.sup_ratio!r}" + ("" if rep.passed else " (diverging)")
    return files, (EXIT_OK if ok else EXIT_FAIL), msg


HANDLERS = {
    "simulate": run_simulate,
    "estimate": run_estimate,
    "cumulants": run_cumulants,
    "kolmogorov": run_kolmogorov,
    "rate-sweep": run_rate_sweep,
    "bound-audit": run_bound_audit,
    "kernels-check": run_kernels_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("fracou: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    started = now_utc()
    try:
        cfg = load_config(getattr(args, "config", None), args.command)
        seed, workers, out = _settings(args, cfg)
        files, code, message = HANDLERS[args.command](cfg, seed, workers, out)
        files.append(write_manifest(out, files, {"ini": cfg.to_ini(), **cfg.to_dict()}, started,
                                    __version__, {"backend": BACKEND, "exit_code": code}))
    except (ConfigError, ParameterDomainError) as exc:
        print(f"fracou: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericAccuracyError, DegeneratePathError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"fracou: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OutputError, OSError) as exc:
        print(f"fracou: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{args.command}: {message} -> {os.path.abspath(out)}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
