"""Seeded experiment runs and their on-disk artifacts."""
from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import METRICS_HEADER, AgentConfig, train
from ..seeding import derive_rng
from ..theory import (corrupt_lookup, random_mdp, sweep_gamma_plan, verify_theorem1,
                      verify_theorem2)
from .config import ExperimentConfig

FINAL_WINDOW = 50
SUMMARY_HEADER = ["variant", "seed", "episodes", "catastrophes", "final_third_catastrophes",
                  "mean_return", "mean_length", "final_window_mean_length"]
CHECK_HEADER = ["instance", "n_states", "n_actions", "lambda", "gamma_plan", "check",
                "lhs", "rhs", "slack", "pass"]
QUANTITY_KEYS = ["L", "L_plan_prefactor", "term1_max", "term1_bound", "classifier_term_max",
                 "value_deviation", "max_abs_F_minus_Fhat"]


class RunError(RuntimeError):
    """The run could not produce its artifacts (e.g. unwritable output)."""


class CsvFormatError(ValueError):
    """A metrics file does not follow the fixed schema; message names file and line."""


# ---------------------------------------------------------------- summaries

@dataclass
class SeedSummary:
    variant: str
    seed: int
    path: str
    returns: np.ndarray
    lengths: np.ndarray
    catastrophes: np.ndarray

    @property
    def episodes(self) -> int:
        return len(self.returns)

    @property
    def final_third(self) -> slice:
        return slice(self.episodes - math.ceil(self.episodes / 3), None)

    @property
    def total_catastrophes(self) -> int:
        return int(self.catastrophes.sum())

    @property
    def final_third_catastrophes(self) -> int:
        return int(self.catastrophes[self.final_third].sum())

    @property
    def mean_return(self) -> float:
        return float(self.returns.mean())

    @property
    def mean_length(self) -> float:
        return float(self.lengths.mean())

    def final_window_length(self, window: int = FINAL_WINDOW) -> float:
        return float(self.lengths[-window:].mean())

    def catastrophes_between(self, first: int, last: int) -> int:
        """Catastrophes in episodes first..last (1-based, inclusive)."""
        return int(self.catastrophes[first - 1:last].sum())


@dataclass
class VariantSummary:
    name: str
    seeds: list = field(default_factory=list)

    @property
    def total_catastrophes(self) -> int:
        return sum(s.total_catastrophes for s in self.seeds)

    @property
    def final_third_catastrophes(self) -> int:
        return sum(s.final_third_catastrophes for s in self.seeds)

    @property
    def mean_return(self) -> float:
        return float(np.concatenate([s.returns for s in self.seeds]).mean())

    @property
    def mean_length(self) -> float:
        return float(np.concatenate([s.lengths for s in self.seeds]).mean())

    @property
    def episodes(self) -> int:
        return sum(s.episodes for s in self.seeds)

    def seeds_without_late_catastrophes(self) -> int:
        return sum(s.final_third_catastrophes == 0 for s in self.seeds)


@dataclass
class ComparisonReport:
    variants: dict

    def __getitem__(self, name: str) -> VariantSummary:
        return self.variants[name]

    def csv_rows(self, window: int = FINAL_WINDOW):
        for v in self.variants.values():
            for s in v.seeds:
                yield [v.name, s.seed, s.episodes, s.total_catastrophes,
                       s.final_third_catastrophes, repr(s.mean_return), repr(s.mean_length),
                       repr(s.final_window_length(window))]
            yield [v.name, "all", v.episodes, v.total_catastrophes, v.final_third_catastrophes,
                   repr(v.mean_return), repr(v.mean_length),
                   repr(float(np.mean([s.final_window_length(window) for s in v.seeds])))]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(self.csv_rows())
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_text(self) -> str:
        lines = []
        for v in self.variants.values():
            lines.append(f"[{v.name}] seeds={len(v.seeds)} episodes={v.episodes} "
                         f"catastrophes={v.total_catastrophes} "
                         f"final-third catastrophes={v.final_third_catastrophes} "
                         f"mean return={v.mean_return:.4f} "
                         f"seeds with none in final third={v.seeds_without_late_catastrophes()}"
                         f"/{len(v.seeds)}")
            for s in v.seeds:
                lines.append(f"  seed {s.seed}: episodes={s.episodes} catastrophes={s.total_catastrophes} "
                             f"final-third={s.final_third_catastrophes} mean return={s.mean_return:.4f} "
                             f"mean length={s.mean_length:.1f} "
                             f"last-{FINAL_WINDOW} length={s.final_window_length():.1f}")
        return "\n".join(lines) + "\n"


_NAME = re.compile(r"metrics_(?P<variant>.+)_seed(?P<seed>-?\d+)\.csv$")


def read_metrics(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(returns, lengths, catastrophes) from one metrics CSV, strictly validated."""
    path = Path(path)
    returns, lengths, cats = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise CsvFormatError(f"{path}:1: expected header {','.join(METRICS_HEADER)}, got {header}")
        for row in reader:
            line = reader.line_num
            if len(row) != len(METRICS_HEADER):
                raise CsvFormatError(f"{path}:{line}: expected {len(METRICS_HEADER)} fields, got {len(row)}")
            try:
                episode, steps, ret, cat = int(row[0]), int(row[1]), float(row[2]), int(row[3])
                for v in row[4:]:
                    float(v)
            except ValueError as e:
                raise CsvFormatError(f"{path}:{line}: {e}") from None
            if episode != len(returns) + 1:
                raise CsvFormatError(f"{path}:{line}: episode {episode} out of sequence")
            if cat not in (0, 1) or steps < 1:
                raise CsvFormatError(f"{path}:{line}: invalid steps/catastrophe values")
            returns.append(ret)
            lengths.append(steps)
            cats.append(cat)
    if not returns:
        raise CsvFormatError(f"{path}:2: no episode rows")
    return np.array(returns), np.array(lengths), np.array(cats)


def summarize(metrics_files) -> ComparisonReport:
    """Aggregate per-seed metrics CSVs.

    ``metrics_files`` is a list of paths (variant and seed are read from names
    like ``metrics_if_seed3.csv``, else ``run`` and the position) or a mapping
    variant -> list of paths.
    """
    if isinstance(metrics_files, dict):
        items = [(v, p, None) for v, paths in metrics_files.items() for p in paths]
    else:
        items = [(None, p, None) for p in metrics_files]
    variants: dict[str, VariantSummary] = {}
    for k, (variant, path, _) in enumerate(items):
        m = _NAME.search(Path(path).name)
        seed = int(m["seed"]) if m else k
        variant = variant or (m["variant"] if m else "run")
        ret, lens, cats = read_metrics(path)
        variants.setdefault(variant, VariantSummary(variant)).seeds.append(
            SeedSummary(variant, seed, str(path), ret, lens, cats))
    return ComparisonReport(variants)


# ---------------------------------------------------------------- runs

@dataclass
class RunResult:
    mode: str
    out: Path
    files: list
    report: str
    passed: bool = True
    comparison: ComparisonReport | None = None
    failures: int = 0


def _train_job(job) -> str:
    env, cfg, path = job
    train(env, cfg).write_csv(path)
    return path


def _map(fn, jobs, n_workers: int):
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(fn, jobs))


def variant_name(cfg: AgentConfig) -> str:
    return "baseline" if cfg.lam == 0 and not cfg.train_fear else "if"


def _prepare_out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise RunError(f"output directory {out} is not writable: {e}") from e
    return out


def _run_training(cfg: ExperimentConfig, out: Path, variants: list[bool]) -> RunResult:
    jobs = []
    files: dict[str, list] = {}
    for baseline in variants:
        for seed in cfg.seed_list:
            acfg = cfg.agent_config(seed, baseline=baseline)
            name = variant_name(acfg)
            path = str(out / f"metrics_{name}_seed{seed}.csv")
            jobs.append((cfg.env, acfg, path))
            files.setdefault(name, []).append(path)
    _map(_train_job, jobs, cfg.jobs)
    report = summarize(files)
    summary = out / "summary.csv"
    report.to_csv(summary)
    text = f"mode={cfg.mode} env={cfg.env} seeds={cfg.seed_list}\n" + report.to_text()
    (out / "report.txt").write_text(text)
    all_files = [p for ps in files.values() for p in ps] + [str(summary), str(out / "report.txt")]
    return RunResult(cfg.mode, out, all_files, text, True, report)


def instance_mdp(seed: int, index: int, max_states: int, max_actions: int, gamma: float = 1.0):
    """The index-th random tabular instance of a suite; independent of run order."""
    rng = derive_rng(seed, f"instance-{index}")
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(2, max_actions + 1))
    return random_mdp(rng, S, A, gamma), rng


def gamma_plans(cfg: ExperimentConfig) -> list[float]:
    if cfg.gamma_plan is not None:
        return [cfg.gamma_plan]
    return [0.5 * cfg.gamma, 0.9 * cfg.gamma, cfg.gamma]


def _theorem1_job(args):
    cfg, i = args
    mdp, _ = instance_mdp(cfg.seed, i, cfg.max_states, cfg.max_actions)
    rows, ok = [], True
    for lam in cfg.lambdas:
        rep = verify_theorem1(mdp, lam)
        ok &= rep.passed
        rows += [[i, mdp.n_states, mdp.n_actions, repr(lam), "", *r] for r in rep.csv_rows()]
    return ok, rows, []


def _theorem2_job(args):
    cfg, i = args
    mdp, rng = instance_mdp(cfg.seed, i, cfg.max_states, cfg.max_actions)
    F = mdp.danger.astype(float)
    Fh = corrupt_lookup(F, "flip", cfg.flip, rng)
    rows, quantities, ok = [], [], True
    for lam in cfg.lambdas:
        for gp in gamma_plans(cfg):
            rep = verify_theorem2(mdp, F, Fh, cfg.gamma, gp, lam, normalize=cfg.normalize)
            ok &= rep.passed
            rows += [[i, mdp.n_states, mdp.n_actions, repr(lam), repr(gp), *r] for r in rep.csv_rows()]
            quantities.append([i, repr(lam), repr(gp)]
                              + [repr(float(rep.quantities[k])) for k in QUANTITY_KEYS])
    return ok, rows, quantities


def _sweep_job(args):
    cfg, i = args
    mdp, rng = instance_mdp(cfg.seed, i, cfg.max_states, cfg.max_actions)
    F = mdp.danger.astype(float)
    Fh = corrupt_lookup(F, "flip", cfg.flip, rng)
    grid = np.linspace(0.0, cfg.gamma, cfg.grid_points)
    out = []
    for lam in cfg.lambdas:
        g_star, curve = sweep_gamma_plan(mdp, F, Fh, cfg.gamma, lam, grid, normalize=cfg.normalize)
        out.append((lam, g_star, curve))
    return out


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _run_theorem(cfg: ExperimentConfig, out: Path) -> RunResult:
    job = _theorem1_job if cfg.mode == "theorem1" else _theorem2_job
    results = _map(job, [(cfg, i) for i in range(cfg.instances)], cfg.jobs)
    checks = out / f"{cfg.mode}_checks.csv"
    _write_rows(checks, CHECK_HEADER, [r for _, rows, _ in results for r in rows])
    files = [str(checks)]
    if cfg.mode == "theorem2":
        qpath = out / "theorem2_quantities.csv"
        _write_rows(qpath, ["instance", "lambda", "gamma_plan", *QUANTITY_KEYS],
                    [q for _, _, qs in results for q in qs])
        files.append(str(qpath))
    n_ok = sum(ok for ok, _, _ in results)
    failed = [i for i, (ok, _, _) in enumerate(results) if not ok]
    worst = min(float(r[8]) for _, rows, _ in results for r in rows)
    text = (f"mode={cfg.mode} instances={cfg.instances} lambdas={list(cfg.lambdas)}"
            + (f" gamma={cfg.gamma} gamma_plan={gamma_plans(cfg)} flip={cfg.flip}"
               f" normalize={cfg.normalize}" if cfg.mode == "theorem2" else "")
            + f"\n{n_ok}/{cfg.instances} inequality chains passed\n"
            + f"minimum slack {worst:.3e}\n"
            + (f"failed instances: {failed}\n" if failed else ""))
    summary = out / "summary.csv"
    _write_rows(summary, ["mode", "instances", "passed", "failed", "min_slack"],
                [[cfg.mode, cfg.instances, n_ok, cfg.instances - n_ok, repr(worst)]])
    (out / "report.txt").write_text(text)
    files += [str(summary), str(out / "report.txt")]
    return RunResult(cfg.mode, out, files, text, not failed, failures=len(failed))


def _run_sweep(cfg: ExperimentConfig, out: Path) -> RunResult:
    results = _map(_sweep_job, [(cfg, i) for i in range(cfg.instances)], cfg.jobs)
    curve_rows, best_rows = [], []
    for i, per_lam in enumerate(results):
        for lam, g_star, curve in per_lam:
            best_rows.append([i, repr(lam), repr(g_star)])
            curve_rows += [[i, repr(lam), repr(gp), repr(L)] for gp, L in curve]
    curves = out / "sweep_curve.csv"
    _write_rows(curves, ["instance", "lambda", "gamma_plan", "L"], curve_rows)
    summary = out / "summary.csv"
    _write_rows(summary, ["instance", "lambda", "gamma_plan_star"], best_rows)
    lines = [f"mode=sweep instances={cfg.instances} gamma={cfg.gamma} flip={cfg.flip} "
             f"grid={cfg.grid_points} points on [0, {cfg.gamma}]"]
    lines += [f"  instance {r[0]} lambda {r[1]}: best gamma_plan {float(r[2]):.4f}" for r in best_rows]
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    return RunResult(cfg.mode, out, [str(curves), str(summary), str(out / "report.txt")], text)


def run(config: ExperimentConfig) -> RunResult:
    """Execute ``config`` and write its CSVs and text report under ``config.out``."""
    config.validate()
    out = _prepare_out(config)
    if config.mode == "train":
        return _run_training(config, out, [False])
    if config.mode == "compare":
        return _run_training(config, out, [True, False])
    if config.mode in ("theorem1", "theorem2"):
        return _run_theorem(config, out)
    return _run_sweep(config, out)
