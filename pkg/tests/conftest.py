"""Shared fixtures: the worked example's parameters and pre-solved fields."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import pytest

import robustkb as rk
from robustkb.hjb import GridSpec, solve_lambda

REPO_ROOT = Path(__file__).resolve().parent.parent
SECTION6_CONFIG = REPO_ROOT / "configs" / "section6.json"

# Worked-example parameters: true vs estimated coefficients and the quadratic
# penalty weights, with aversion scalars k1 = 10, k2 = 5.
MODEL = rk.ModelParameters(alpha=0.5, beta=1.5, c=1.0, mu0=1.0, sigma0=0.2)
REF = rk.ReferenceParameters(alpha_star=0.0, beta_star=1.0, mu0_star=0.0, sigma0_star=1.0)
PEN = rk.PenaltyConfig(c_alpha=5.0, c_beta=10.0, w1=15.0, w2=15.0, k1=10.0, k2=5.0)


@pytest.fixture(scope="session")
def sec6_path():
    return rk.simulate_paths(MODEL, 1e-3, 2.0, seed=42)


@pytest.fixture(scope="session")
def sec6_frame(sec6_path):
    return rk.reference_frame(REF, sec6_path, MODEL.gain())


@pytest.fixture(scope="session")
def coarse_field(sec6_frame):
    """The coarse verification instance: T = 0.25, 41x41 grid on [-2,2]^2,
    drift truncation 4."""
    spec = GridSpec(z1_half=2.0, z2_half=2.0, n1=41, n2=41, m_trunc=4.0, theta=0.8)
    return solve_lambda(spec, sec6_frame, PEN, REF, 0.25, [0.0, 0.25])


@pytest.fixture(scope="session")
def small_field(sec6_frame):
    """A quick solved field used by the expectation tests: T = 0.5, 41x41."""
    spec = GridSpec(z1_half=2.0, z2_half=2.0, n1=41, n2=41, m_trunc=4.0, theta=0.8)
    times = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    return solve_lambda(spec, sec6_frame, PEN, REF, 0.5, times)


@pytest.fixture(scope="session")
def sec6_run(tmp_path_factory):
    """Full worked-example pipeline, run once from the shipped config."""
    from robustkb import pipeline
    from robustkb.config import parse_config

    cfg = parse_config(SECTION6_CONFIG)
    outdir = tmp_path_factory.mktemp("section6")
    cfg = dataclasses.replace(cfg, output_dir=str(outdir))
    path = pipeline.stage_simulate(cfg)
    filters = pipeline.stage_filter(cfg, path)
    field = pipeline.stage_solve(cfg, path)
    rows = pipeline.stage_estimate(cfg, field=field, path=path, filters=filters)
    pipeline.stage_plot(cfg)
    return {"cfg": cfg, "path": path, "filters": filters, "field": field,
            "rows": rows, "outdir": outdir}
