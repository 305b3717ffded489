"""Experiment pipeline: simulate -> filter -> solve-hjb -> estimate -> plot.

Stages exchange CSV artifacts inside the configured output directory so that
any stage can be rerun in isolation:

    paths.csv       t,x,y,eta
    filters.csv     t,q_true,r_true,q_est,r_est
    lambda_t<k>.csv zeta1,zeta2,lambda,v   (one per solved output time)
    estimates.csv   t,functional,lower,minimax,upper,kb_est,kb_true

Floats are printed with 12 significant digits; cells are finite or the
literal ``inf`` - a NaN reaching the writer is a hard error.  Runs are
deterministic for a fixed config and seed; ROBUSTKB_THREADS only caps the
worker pool used for the estimate stage and never changes results.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, MissingInputError, NumericalError
from .expect import (GaussianCandidate, gaussian_functional, lower_expectation,
                     minimax_estimate, upper_expectation)
from .frame import FrameTrajectory, reference_frame
from .hjb import LambdaField, solve_lambda, write_snapshots
from .kalman import FilterTrajectory, run_filter
from .model import functional_slug
from .simulate import SamplePath, simulate_paths
from .svgplot import line_chart


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if math.isnan(x):
        raise NumericalError("csv writer: refusing to write NaN")
    return f"{x:.12g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _read_csv(path: Path, expect_header: list[str]) -> dict[str, list[str]]:
    if not path.exists():
        raise MissingInputError(f"missing input: {path} (run the earlier stage first)")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expect_header:
            raise MissingInputError(f"{path}: unexpected columns {header}")
        cols: dict[str, list[str]] = {h: [] for h in header}
        for row in reader:
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


def _floats(col: list[str]) -> np.ndarray:
    return np.array([float(v) for v in col])


def worker_count() -> int:
    raw = os.environ.get("ROBUSTKB_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"ROBUSTKB_THREADS: not an integer: {raw!r}")
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def solve_times(cfg: ExperimentConfig) -> tuple[float, ...]:
    """Snapshot times: t = 0 is always solved so the field covers [0, T]."""
    return tuple(sorted({0.0, *cfg.output_times}))


# -- simulate ---------------------------------------------------------------

def stage_simulate(cfg: ExperimentConfig) -> SamplePath:
    path = simulate_paths(cfg.model, cfg.dt, cfg.T, cfg.seed)
    out = _outdir(cfg)
    _write_csv(out / "paths.csv", ["t", "x", "y", "eta"],
               zip(path.times, path.x, path.y, path.eta))
    return path


def load_paths(cfg: ExperimentConfig) -> SamplePath:
    p = _outdir(cfg) / "paths.csv"
    cols = _read_csv(p, ["t", "x", "y", "eta"])
    times = _floats(cols["t"])
    if len(times) < 2 or abs(times[1] - times[0] - cfg.dt) > 1e-9 * max(1.0, cfg.dt) \
            or abs(times[-1] - cfg.T) > 1e-6:
        raise MissingInputError(f"{p}: grid does not match the config's dt/T "
                                "(rerun the simulate stage)")
    return SamplePath(dt=cfg.dt, times=times, x=_floats(cols["x"]),
                      y=_floats(cols["y"]), eta=_floats(cols["eta"]), seed=cfg.seed)


# -- filter -----------------------------------------------------------------

def stage_filter(cfg: ExperimentConfig,
                 path: SamplePath | None = None) -> tuple[FilterTrajectory, FilterTrajectory]:
    if path is None:
        path = load_paths(cfg)
    filt_true = run_filter(cfg.model, path)
    filt_est = run_filter(cfg.reference, path, gain=cfg.model.gain())
    _write_csv(_outdir(cfg) / "filters.csv",
               ["t", "q_true", "r_true", "q_est", "r_est"],
               zip(path.times, filt_true.q, filt_true.r, filt_est.q, filt_est.r))
    return filt_true, filt_est


def load_filters(cfg: ExperimentConfig) -> tuple[FilterTrajectory, FilterTrajectory]:
    cols = _read_csv(_outdir(cfg) / "filters.csv",
                     ["t", "q_true", "r_true", "q_est", "r_est"])
    t = _floats(cols["t"])
    return (FilterTrajectory(cfg.dt, t, _floats(cols["q_true"]), _floats(cols["r_true"])),
            FilterTrajectory(cfg.dt, t, _floats(cols["q_est"]), _floats(cols["r_est"])))


# -- solve-hjb ---------------------------------------------------------------

def build_frame(cfg: ExperimentConfig, path: SamplePath) -> FrameTrajectory:
    return reference_frame(cfg.reference, path, cfg.model.gain())


def stage_solve(cfg: ExperimentConfig, path: SamplePath | None = None) -> LambdaField:
    if path is None:
        path = load_paths(cfg)
    frame = build_frame(cfg, path)
    field = solve_lambda(cfg.grid, frame, cfg.penalty, cfg.reference,
                         cfg.T, solve_times(cfg))
    write_snapshots(field, _outdir(cfg))
    return field


def load_field(cfg: ExperimentConfig, path: SamplePath | None = None) -> LambdaField:
    """Rebuild the LambdaField from lambda_t<k>.csv plus recomputed frame data."""
    if path is None:
        path = load_paths(cfg)
    frame = build_frame(cfg, path)
    times = solve_times(cfg)
    out = _outdir(cfg)
    spec = cfg.grid
    values = np.empty((len(times), spec.n1, spec.n2))
    for k in range(len(times)):
        cols = _read_csv(out / f"lambda_t{k}.csv", ["zeta1", "zeta2", "lambda", "v"])
        lam = _floats(cols["lambda"])
        if lam.size != spec.n1 * spec.n2:
            raise MissingInputError(f"lambda_t{k}.csv: expected {spec.n1 * spec.n2} "
                                    f"rows, found {lam.size}")
        values[k] = lam.reshape(spec.n1, spec.n2)
    wstar = np.array([frame.wstar_at(t) for t in times])
    eta = np.array([frame.eta_at(t) for t in times])
    return LambdaField(spec=spec, times=np.asarray(times), values=values,
                       wstar=wstar, eta=eta)


# -- estimate ----------------------------------------------------------------

def _estimate_row(cfg: ExperimentConfig, field: LambdaField, frame: FrameTrajectory,
                  filt_true: FilterTrajectory, filt_est: FilterTrajectory,
                  phi, t: float) -> list:
    eta_t = float(frame.eta_at(t))
    lower = lower_expectation(phi, t, field, eta_t, cfg.penalty)
    upper = upper_expectation(phi, t, field, eta_t, cfg.penalty)
    try:
        mmx = minimax_estimate(phi, t, field, eta_t, cfg.penalty)
    except ConfigError:
        mmx = math.inf  # no closed second-moment form for this payoff
    q_e = float(np.interp(t, filt_est.times, filt_est.q))
    r_e = float(np.interp(t, filt_est.times, filt_est.r))
    q_t = float(np.interp(t, filt_true.times, filt_true.q))
    r_t = float(np.interp(t, filt_true.times, filt_true.r))
    kb_est = gaussian_functional(phi, GaussianCandidate(q_e, r_e))
    kb_true = gaussian_functional(phi, GaussianCandidate(q_t, r_t))
    return [t, functional_slug(phi), lower, mmx, upper, kb_est, kb_true]


def stage_estimate(cfg: ExperimentConfig, field: LambdaField | None = None,
                   path: SamplePath | None = None,
                   filters: tuple[FilterTrajectory, FilterTrajectory] | None = None,
                   only: set[str] | None = None) -> list[list]:
    if path is None:
        path = load_paths(cfg)
    if filters is None:
        filters = load_filters(cfg)
    if field is None:
        field = load_field(cfg, path)
    filt_true, filt_est = filters
    frame = build_frame(cfg, path)

    functionals = list(cfg.functionals)
    if only is not None:
        available = [functional_slug(p) for p in functionals]
        unknown = only - set(available)
        if unknown:
            raise ConfigError(f"estimate: functional(s) {sorted(unknown)} not in "
                              f"config; available: {available}")
        functionals = [p for p in functionals if functional_slug(p) in only]

    tasks = [(phi, t) for phi in functionals for t in cfg.output_times]
    rows: list = [None] * len(tasks)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = [pool.submit(_estimate_row, cfg, field, frame,
                               filt_true, filt_est, phi, t)
                   for phi, t in tasks]
        for k, fut in enumerate(futures):
            rows[k] = fut.result()
    _write_csv(_outdir(cfg) / "estimates.csv",
               ["t", "functional", "lower", "minimax", "upper", "kb_est", "kb_true"],
               rows)
    return rows


# -- plot ---------------------------------------------------------------------

def stage_plot(cfg: ExperimentConfig) -> list[Path]:
    out = _outdir(cfg)
    cols = _read_csv(out / "estimates.csv",
                     ["t", "functional", "lower", "minimax", "upper", "kb_est", "kb_true"])
    t = _floats(cols["t"])
    slugs = cols["functional"]
    written = []
    for slug in dict.fromkeys(slugs):  # preserve config order
        sel = [k for k, s in enumerate(slugs) if s == slug]
        ts = t[sel]
        pick = lambda name: _floats(cols[name])[sel]
        written.append(line_chart(
            out / f"estimates_{slug}.svg",
            f"Estimates of {slug}", "t", "estimate",
            [("minimax", ts, pick("minimax")),
             ("kb_est", ts, pick("kb_est")),
             ("kb_true", ts, pick("kb_true"))]))
        written.append(line_chart(
            out / f"expectations_{slug}.svg",
            f"Upper/lower expectations of {slug}", "t", "expectation",
            [("upper", ts, pick("upper")),
             ("lower", ts, pick("lower")),
             ("kb_est", ts, pick("kb_est"))]))
    return written


# -- full run ------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> Path:
    """Run all stages in order, sharing in-memory results between them."""
    path = stage_simulate(cfg)
    filters = stage_filter(cfg, path)
    field = stage_solve(cfg, path)
    stage_estimate(cfg, field=field, path=path, filters=filters)
    stage_plot(cfg)
    return _outdir(cfg)
