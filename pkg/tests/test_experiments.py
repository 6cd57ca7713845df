import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcflab.barriers import BarrierSpec
from mcflab.errors import DomainViolation, PreconditionFailed, WindowEmpty
from mcflab.experiments import (
    AsymptoticsSpec,
    CombSpec,
    ExperimentReport,
    annulus_estimate_check,
    asymptotics_experiment,
    comb_functions,
    comb_growth,
    first_interlocking,
    oscillation_bounds,
    radial_barrier,
    tooth_index,
)
from mcflab.solver import RadialGrid


def test_comb_intervals():
    assert CombSpec.interval(2) == (0.0, 0.5)
    assert CombSpec.interval(3) == (0.5, 2 / 3)
    assert CombSpec.lam(2) == pytest.approx(2 * math.pi)
    assert CombSpec.center(2) == 0.25
    assert CombSpec.end_time(2) == pytest.approx(1 / 32)


@given(st.floats(0.0, 0.999))
def test_tooth_index_finds_containing_interval(r):
    k = tooth_index(r)
    if k is not None:
        a, b = CombSpec.interval(k)
        assert a < r < b


def test_comb_functions():
    spec = CombSpec()
    # centre of an even tooth: height k from above only
    assert comb_functions(spec, CombSpec.center(4)) == (4.0, -math.inf)
    assert comb_functions(spec, CombSpec.center(3)) == (math.inf, 27.0)
    # tooth boundaries carry no constraint
    assert comb_functions(spec, 0.5) == (math.inf, -math.inf)
    with pytest.raises(DomainViolation):
        comb_functions(spec, 1.0)
    with pytest.raises(DomainViolation):
        tooth_index(-0.1)


def test_teeth_rise_towards_their_edges():
    spec = CombSpec()
    a, b = CombSpec.interval(4)
    c = CombSpec.center(4)
    inner = comb_functions(spec, c + 0.4 * (b - a))[0]
    assert inner > 4.0
    a, b = CombSpec.interval(5)
    assert comb_functions(spec, CombSpec.center(5) + 0.4 * (b - a))[1] < 125.0


def test_comb_growth_matches_barrier_data():
    spec = CombSpec()
    b = spec.barrier(6)
    assert b.R == CombSpec.center(6) and b.T == pytest.approx(CombSpec.end_time(6))
    # simple f at T has a closed form
    closed = b.lam * b.T + b.R / 4 * math.sqrt(8 * b.R * b.lam / math.pi)
    assert comb_growth(spec, 6) == pytest.approx(closed, rel=1e-12)


def test_first_interlocking():
    assert first_interlocking({2: 5, 4: 10, 6: 20}, {3: 1, 5: 11, 7: 30}) == 4
    assert first_interlocking({2: 5}, {3: 1}) is None


def test_oscillation_report_shape():
    rep = oscillation_bounds(CombSpec(20))
    assert set(rep.series) == {"upper_even", "lower_odd"}
    assert [p[0] for p in rep.series["upper_even"]] == list(range(2, 21, 2))
    with pytest.raises(ValueError):
        oscillation_bounds(CombSpec(5))


def test_asymptotics_spec():
    s = AsymptoticsSpec()
    assert s.T == 0.5
    assert s.u0(0.5) == pytest.approx(4.0)
    assert s.u0(1.0) == math.inf
    assert not s.valid(0.0) and not s.valid(0.5)
    with pytest.raises(ValueError):
        AsymptoticsSpec(alpha=1.0)
    with pytest.raises(ValueError):
        AsymptoticsSpec(n=1)


def test_sandwich_brackets_sup_and_correction():
    s = AsymptoticsSpec()
    t = 0.5 - 1e-4
    d, hw = 1 - s.r_t(t), s.half_width(t)
    lam = s.lam_t(t)
    assert hw == pytest.approx(d**1.5)
    rise = (lam + math.sqrt(2 * lam / (math.pi * s.r_t(t)))) * t
    lo, up = s.sandwich(t)
    assert up == pytest.approx((d - hw) ** -2 + rise, rel=1e-14)
    assert lo == pytest.approx((d + hw) ** -2 - rise, rel=1e-14)
    # the rise is lower order than the model
    assert rise / s.model(t) < 0.05


def test_asymptotics_window_empty():
    with pytest.raises(WindowEmpty):
        asymptotics_experiment(AsymptoticsSpec(), [0.0, 0.6], pde=False)


def test_asymptotics_barrier_mode():
    ts = [0.5 - 10.0**-k for k in range(1, 10)]
    rep = asymptotics_experiment(AsymptoticsSpec(), ts, pde=False)
    assert rep.passed["sandwich_ordered"]
    assert "pde_ratio_in_band" not in rep.passed


def test_radial_barrier_outside_domain_is_inf():
    spec = BarrierSpec(2, 0.5, 2 * math.pi)
    w = radial_barrier(spec, np.array([0.0, 0.5, 0.9]), 0.0)
    assert w[0] == math.inf and w[2] == math.inf
    assert w[1] == pytest.approx(0.0, abs=1e-15)


def test_annulus_precondition():
    spec = BarrierSpec(2, 0.5, 2 * math.pi)
    grid = RadialGrid(2, 1.0, 129)
    above = lambda r: np.where(np.isfinite(radial_barrier(spec, r, 0.0)), radial_barrier(spec, r, 0.0) + 1, 1e3)
    with pytest.raises(PreconditionFailed):
        annulus_estimate_check(spec, above, [0.01], grid)
    below = lambda r: np.where(np.isfinite(radial_barrier(spec, r, 0.0)), radial_barrier(spec, r, 0.0) - 1, 1e3)
    # a low cap freezes nodes near the edges of A_0
    with pytest.raises(PreconditionFailed, match="active"):
        annulus_estimate_check(spec, below, [0.01], grid, cap=0.5)


def test_annulus_zero_data_passes():
    spec = BarrierSpec(2, 0.5, 2 * math.pi)
    grid = RadialGrid(2, 1.0, 129)
    zero = lambda r: np.zeros_like(np.asarray(r, float))
    rep = annulus_estimate_check(spec, zero, np.linspace(0, spec.T, 5), grid)
    assert rep.ok
    # flat data is stationary and the barrier is nonnegative on A_0
    assert rep.metrics["max_slack_u_minus_w"] <= 0
    with pytest.raises(DomainViolation):
        annulus_estimate_check(spec, zero, [spec.T * 2], grid)


def test_report_round_trip(tmp_path):
    rep = ExperimentReport("demo", parameters={"n": 2, "big": math.inf})
    rep.add_series("s", [1, 2], [0.1, 1 / 3])
    rep.check("m", 0.5, True, "<= 1")
    rep.check("bad", math.nan, False, "finite")
    paths = rep.write(tmp_path)
    assert [p.relative_to(tmp_path).as_posix() for p in paths] == ["demo.json", "demo/s.csv"]
    data = json.loads(paths[0].read_text())
    assert data["parameters"]["big"] == "inf"
    assert data["metrics"]["bad"] == "nan"
    assert data["passed"] == {"m": True, "bad": False}
    rows = list(csv.reader(paths[1].open()))
    assert rows[0] == ["x", "y"]
    assert float(rows[2][1]) == 1 / 3
    assert not rep.ok
    lines = rep.summary_lines()
    assert lines[0].startswith("[PASS] demo.m") and lines[1].startswith("[FAIL] demo.bad")
    assert rep.to_json() == paths[0].read_text()
