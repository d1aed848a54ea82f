"""Batch runs: diagnostics, optimization, reports, plot series and the run manifest."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, config_hash, load_config, parse_config, to_ini, with_overrides
from .cpt import CertificateReport, wellposedness_check
from .frictions import integrability_integrand, stabilization_report
from .optimizer import OptimizationReport, build_scenarios, clamp_sweep, compare_randomized, optimize
from . import plotting

log = logging.getLogger(__name__)

COMMANDS = ("check", "optimize", "compare-randomized")
TRACE_FIELDS = ["generation", "best_value", "generation_best", "moment_diagnostic", "max_spread",
                "cesaro_accepted"]
OUTCOME_FIELDS = ["path_id", "x1", "benchmark", "x1_minus_benchmark", "bound", "terminal_inventory",
                  "max_abs_rate", "friction_paid", "u"]
DIAGNOSTIC_FIELDS = ["diagnostic", "n_paths", "estimate", "std_error", "verdict", "detail"]
SUFFIXES = ("", "_randomized", "_deterministic")


class ExperimentError(RuntimeError):
    pass


def write_csv(path: Path, fieldnames: list[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_key_values(path: Path, mapping: dict) -> Path:
    return write_csv(path, ["key", "value"], ({"key": k, "value": v} for k, v in mapping.items()))


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    toolkit_version: str
    command: str
    seed: int
    started: str
    finished: str = ""
    wall_clock: float = 0.0
    files: dict[str, str] = field(default_factory=dict)
    output_dir: str = ""

    def to_text(self) -> str:
        lines = [
            f"config_hash: {self.config_hash}",
            f"toolkit_version: {self.toolkit_version}",
            f"command: {self.command}",
            f"seed: {self.seed}",
            f"started: {self.started}",
            f"finished: {self.finished}",
            f"wall_clock_seconds: {self.wall_clock:.3f}",
        ]
        lines += [f"file: {name} sha256={digest}" for name, digest in sorted(self.files.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        kv, files = {}, {}
        for line in text.splitlines():
            key, _, value = line.partition(": ")
            if key == "file":
                name, _, digest = value.rpartition(" sha256=")
                files[name] = digest
            else:
                kv[key] = value
        return cls(kv["config_hash"], kv["toolkit_version"], kv["command"], int(kv["seed"]),
                   kv["started"], kv.get("finished", ""), float(kv.get("wall_clock_seconds", 0.0)), files)


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def run_diagnostics(cfg: ExperimentConfig) -> tuple[CertificateReport, list[dict]]:
    """Well-posedness certificate and integrability moment on ``diagnostic_paths`` scenarios."""
    scen = build_scenarios(cfg.market, cfg.friction, cfg.grid, cfg.diagnostic_paths, cfg.seed)
    moment = stabilization_report("integrability", integrability_integrand(scen.prices, cfg.friction))
    cert = wellposedness_check(cfg.cpt, scen.bound - scen.benchmark, scen.benchmark, seed=cfg.seed)
    rows = []
    for r in moment.rows():
        rows.append({"diagnostic": r["diagnostic"], "n_paths": r["n_paths"], "estimate": r["estimate"],
                     "std_error": r["std_error"],
                     "verdict": {"OK": "PASS"}.get(r["status"], r["status"]), "detail": ""})
    for c in cert.rows():
        rows.append({"diagnostic": c["check"], "n_paths": cfg.diagnostic_paths, "estimate": c["value"],
                     "std_error": "", "verdict": c["verdict"], "detail": c["detail"]})
    rows.append({"diagnostic": "certificate", "n_paths": cfg.diagnostic_paths, "estimate": "",
                 "std_error": "", "verdict": cert.verdict, "detail": ""})
    return cert, rows


def _outcome_rows(report: OptimizationReport, benchmark: np.ndarray, u: np.ndarray):
    out = report.outcomes
    for i in range(out.terminal_money.size):
        yield {"path_id": i, "x1": float(out.terminal_money[i]), "benchmark": float(benchmark[i]),
               "x1_minus_benchmark": float(report.sample[i]), "bound": float(out.bound[i]),
               "terminal_inventory": float(out.terminal_inventory[i]),
               "max_abs_rate": float(out.max_abs_rate[i]), "friction_paid": float(out.friction_paid[i]),
               "u": float(u[i])}


def write_optimization(report: OptimizationReport, cfg: ExperimentConfig, out: Path, suffix: str = "") -> None:
    scen = build_scenarios(cfg.market, cfg.friction, cfg.grid, report.n_paths, report.scenario_seed)
    write_csv(out / f"trace{suffix}.csv", TRACE_FIELDS, report.trace_rows())
    write_key_values(out / f"summary{suffix}.csv", report.summary())
    write_csv(out / f"outcomes{suffix}.csv", OUTCOME_FIELDS, _outcome_rows(report, scen.benchmark, scen.u))
    (out / f"strategy{suffix}.json").write_text(
        json.dumps(report.best_params.to_dict(), indent=2) + "\n", encoding="utf-8")


def survival_rows(sample: np.ndarray, cfg: ExperimentConfig, max_points: int = 2000) -> list[dict]:
    d = np.sort(np.asarray(sample, dtype=float))
    if d.size == 0:
        return []
    xs = np.unique(d)
    if xs.size > max_points:
        xs = np.unique(np.quantile(d, np.linspace(0.0, 1.0, max_points), method="inverted_cdf"))
    surv = 1.0 - np.searchsorted(d, xs, side="left") / d.size
    distorted = np.where(xs > 0, cfg.cpt.w_plus(surv), 1.0 - cfg.cpt.w_minus(1.0 - surv))
    return [{"x": float(x), "survival": float(s), "distorted_survival": float(w)}
            for x, s, w in zip(xs, surv, distorted)]


def emit_plot_data(report_dir, out_dir=None) -> list[Path]:
    """Write value and survival series (plus figures) for every report found in ``report_dir``."""
    report_dir = Path(report_dir)
    out_dir = Path(out_dir) if out_dir is not None else report_dir
    cfg_path = report_dir / "config.ini"
    present = [s for s in SUFFIXES if (report_dir / f"trace{s}.csv").exists()]
    missing = [] if cfg_path.exists() else [str(cfg_path)]
    if not present:
        missing.append(str(report_dir / "trace.csv"))
    for s in present:
        for name in (f"outcomes{s}.csv", f"strategy{s}.json"):
            if not (report_dir / name).exists():
                missing.append(str(report_dir / name))
    if missing:
        raise FileNotFoundError("missing report input(s): " + ", ".join(missing))
    cfg = parse_config(cfg_path.read_text(encoding="utf-8"), allow_ill_posed=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for s in present:
        trace = read_csv(report_dir / f"trace{s}.csv")
        series = [{"generation": r["generation"], "best_value": r["best_value"],
                   "moment_diagnostic": r["moment_diagnostic"]} for r in trace]
        written.append(write_csv(out_dir / f"value_series{s}.csv",
                                 ["generation", "best_value", "moment_diagnostic"], series))
        outcomes = read_csv(report_dir / f"outcomes{s}.csv")
        sample = np.array([float(r["x1_minus_benchmark"]) for r in outcomes])
        written.append(write_csv(out_dir / f"survival_series{s}.csv",
                                 ["x", "survival", "distorted_survival"], survival_rows(sample, cfg)))
        strategy = json.loads((report_dir / f"strategy{s}.json").read_text(encoding="utf-8"))
        written.append(plotting.plot_value_trace(trace, out_dir / f"value_trace{s}.png"))
        written.append(plotting.plot_survival(read_csv(out_dir / f"survival_series{s}.csv"),
                                              out_dir / f"survival{s}.png"))
        written.append(plotting.plot_rates(strategy, out_dir / f"rates{s}.png"))
    return written


def _execute(cfg: ExperimentConfig, command: str, work: Path) -> None:
    (work / "config.ini").write_text(to_ini(cfg), encoding="utf-8")
    cert, diag_rows = run_diagnostics(cfg)
    write_csv(work / "diagnostics.csv", DIAGNOSTIC_FIELDS, diag_rows)
    if command == "check":
        return
    if cert.verdict == "FAIL" and not cfg.allow_ill_posed:
        failed = [c["check"] for c in cert.checks if c["verdict"] == "FAIL"]
        raise ExperimentError("well-posedness certificate FAILED (" + ", ".join(failed) +
                              "); rerun with --allow-ill-posed to optimize anyway")
    problem = cfg.problem()
    if command == "optimize":
        report = optimize(problem, cfg.optimizer, cfg.seed)
        write_optimization(report, cfg, work)
        if cert.verdict == "FAIL":
            sweep = clamp_sweep(problem, cfg.optimizer, cfg.seed)
            write_csv(work / "clamp_sweep.csv",
                      ["rate_bound", "best_value", "best_std_error", "v_plus", "v_minus", "max_abs_rate"],
                      ({"rate_bound": r.best_params.rate_bound, "best_value": r.best_value,
                        "best_std_error": r.best_std_error, "v_plus": r.v_plus, "v_minus": r.v_minus,
                        "max_abs_rate": float(r.outcomes.max_abs_rate.max())} for r in sweep))
    else:
        comparison = compare_randomized(problem, cfg.optimizer, cfg.seed)
        write_optimization(comparison.randomized, cfg, work, "_randomized")
        write_optimization(comparison.deterministic, cfg, work, "_deterministic")
        write_key_values(work / "comparison.csv", comparison.summary())
    emit_plot_data(work)


def run_experiment(config_path, command: str = "optimize", seed: int | None = None,
                   out: str | Path | None = None, allow_ill_posed: bool = False) -> RunManifest:
    """Validate, run and write all outputs atomically into the output directory.

    Outputs are assembled in a temporary sibling directory that replaces the
    target only once everything, manifest included, has been written.
    """
    if command not in COMMANDS:
        raise ValueError(f"command must be one of {COMMANDS}")
    cfg = load_config(config_path, allow_ill_posed=allow_ill_posed)
    cfg = with_overrides(cfg, seed=seed, output_dir=out)
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("run.seed: must be a nonnegative 64-bit integer")
    target = Path(cfg.output_dir)
    target.parent.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash(cfg), __version__, command, cfg.seed, _now())
    started = time.perf_counter()
    work = Path(tempfile.mkdtemp(prefix=f".{target.name}.tmp-", dir=target.parent))
    try:
        _execute(cfg, command, work)
        manifest.files = {p.name: sha256_file(p) for p in sorted(work.iterdir()) if p.is_file()}
        manifest.finished = _now()
        manifest.wall_clock = time.perf_counter() - started
        (work / "manifest.txt").write_text(manifest.to_text(), encoding="utf-8")
        old = None
        if target.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{target.name}.old-", dir=target.parent))
            target.replace(old / target.name)
        work.replace(target)
        if old is not None:
            shutil.rmtree(old, ignore_errors=True)
    except BaseException:
        shutil.rmtree(work, ignore_errors=True)
        raise
    manifest.output_dir = str(target)
    log.info("wrote %d files to %s", len(manifest.files), target)
    return manifest
