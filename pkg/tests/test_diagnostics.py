import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activesplit import diagnostics
from activesplit.diagnostics import conservation_report, convergence_study, fit_rate, run_study
from activesplit.grid import GridSpec, l2_norm, random_band_limited_field, to_spectral
from activesplit.operators import ASpec, Burgers, DerivativeTerm, FractionalLaplacian
from activesplit.presets import Preset, kdv, sqg, viscous_burgers
from activesplit.splitting import EvolutionAborted, SplitConfig, Trajectory, evolve
from activesplit.subflows import BlowUpError

from conftest import spectral


def test_fit_rate_exact_power_laws():
    rate, resid = fit_rate([(0.1, 0.1), (0.05, 0.05), (0.025, 0.025)])
    assert rate == pytest.approx(1.0, abs=1e-12) and resid <= 1e-12
    rate, resid = fit_rate([(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)])
    assert rate == pytest.approx(2.0, abs=1e-12) and resid <= 1e-12


@pytest.mark.parametrize("i", range(4))
def test_fit_rate_perturbation_sensitivity(i):
    # closed form: slope shift = ln(1.1) (x_i - xbar) / sum (x - xbar)^2
    dts = [0.1 / 2**j for j in range(4)]
    errs = [d**2 for d in dts]
    errs[i] *= 1.1
    x = np.log(dts)
    expected_shift = math.log(1.1) * (x[i] - x.mean()) / np.sum((x - x.mean()) ** 2)
    rate, _ = fit_rate(list(zip(dts, errs)))
    assert rate - 2.0 == pytest.approx(expected_shift, abs=1e-12)
    assert abs(rate - 2.0) <= 0.07


def test_fit_rate_excludes_zero_errors():
    rows = [(0.1, 1e-2), (0.05, 0.0), (0.025, 6.25e-4), (0.0125, 1.5625e-4)]
    with pytest.warns(UserWarning, match="excluded 1"):
        rate, _ = fit_rate(rows)
    assert rate == pytest.approx(2.0)
    with pytest.raises(ValueError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit_rate([(0.1, 1.0), (0.05, 0.0), (0.025, 0.2)])


@settings(max_examples=50, deadline=None)
@given(
    errs=st.lists(st.floats(1e-8, 1.0), min_size=3, max_size=6),
    scale=st.floats(1e-6, 1e6),
)
def test_fit_rate_scale_invariant(errs, scale):
    dts = [0.5 / 2**j for j in range(len(errs))]
    r1, _ = fit_rate(list(zip(dts, errs)))
    r2, _ = fit_rate([(d, scale * e) for d, e in zip(dts, errs)])
    assert r2 == pytest.approx(r1, abs=1e-10)


def test_exact_regime_without_transport(sin_x256):
    p = Preset("linear_kdv", ASpec([(1.0, DerivativeTerm((3,)))]), Burgers(0.0), (1,))
    rep = convergence_study(p, "godunov", [0.125, 0.0625, 0.03125], sin_x256, 0.5, refinement=4)
    assert rep.exact
    assert max(rep.errors) <= 1e-12
    assert math.isnan(rep.fitted_rate)
    assert "exact regime" in rep.summary()


def test_dt_list_must_share_endpoint(sin_x256):
    p = viscous_burgers()
    with pytest.raises(ValueError, match="does not divide"):
        run_study(sin_x256, p.a, p.v, "strang", [0.1, 0.05, 0.03], 0.5)
    with pytest.raises(ValueError, match="decreasing"):
        run_study(sin_x256, p.a, p.v, "strang", [0.05, 0.1], 0.5)


def test_guard_trip_marks_row_invalid(monkeypatch):
    g = GridSpec(1, 64)
    (x,) = g.coordinates()
    u0 = spectral(g, np.sin(x))
    p = viscous_burgers()
    real_evolve = diagnostics.evolve

    def flaky(u, cfg):
        if cfg.dt == 0.125:
            raise EvolutionAborted("boom", Trajectory(), BlowUpError("guard"))
        return real_evolve(u, cfg)

    ref = diagnostics.reference_solution(u0, SplitConfig("strang", 0.5 / 32, 0.5, p.a, p.v), 4)
    monkeypatch.setattr(diagnostics, "evolve", flaky)
    dts = [0.5 / 2**j for j in range(2, 6)]
    with pytest.warns(UserWarning, match="excluded"):
        run = run_study(u0, p.a, p.v, "godunov", dts, 0.5, reference=ref)
    rep = run.report(0.0)
    assert rep.valid == [False, True, True, True]
    assert math.isnan(rep.errors[0])
    assert 0.8 < rep.fitted_rate < 1.2


def test_threaded_rows_match_serial(sin_x256):
    p = viscous_burgers()
    dts = [0.125, 0.0625, 0.03125]
    a = run_study(sin_x256, p.a, p.v, "strang", dts, 0.5, refinement=4)
    b = run_study(sin_x256, p.a, p.v, "strang", dts, 0.5, refinement=4, threads=3, reference=a.reference)
    for ra, rb in zip(a.rows, b.rows):
        assert np.array_equal(ra.final.coeffs, rb.final.coeffs)


def test_conservation_dispersive_isometry(sin_x256):
    a = ASpec([(1.0, DerivativeTerm((3,)))])
    traj = evolve(sin_x256, SplitConfig("strang", 0.05, 0.5, a, Burgers(0.0)))
    rep = conservation_report(traj, a)
    assert max(rep.l2) - min(rep.l2) <= 1e-12 * rep.l2[0]
    assert rep.isometry_violation <= 1e-14
    assert rep.ok


def test_conservation_diffusive_mass():
    g = GridSpec(1, 128)
    u = to_spectral(random_band_limited_field(g, 2, 6.0, zero_mean=False)) + spectral(g, np.full(128, 0.4))
    p = viscous_burgers(1.5)
    traj = evolve(u, SplitConfig("godunov", 0.05, 0.5, p.a, p.v))
    rep = conservation_report(traj, p.a)
    assert rep.mass_drift <= 1e-12
    assert rep.classification == "diffusive"


def test_conservation_mass_column_matches_quadrature():
    g = GridSpec(2, 16)
    u = to_spectral(random_band_limited_field(g, 3, 4.0, zero_mean=False)) + spectral(g, np.full(g.shape, 1.1))
    p = sqg()
    traj = evolve(u, SplitConfig("strang", 0.05, 0.1, p.a, p.v))
    for m, f in zip(traj.mass, traj.fields):
        quad = g.cell_volume * np.sum(f.to_real().values)
        assert m == pytest.approx(quad, rel=1e-12)


def test_sqg_l2_non_increasing():
    g = GridSpec(2, 32)
    x, y = g.coordinates()
    u0 = spectral(g, np.sin(x) * np.cos(y) + 0.5 * np.cos(2 * x + y))
    p = sqg(2.0, 2.0)
    traj = evolve(u0, SplitConfig("strang", 0.25 / 16, 0.25, p.a, p.v))
    rep = conservation_report(traj, p.a, tol=1e-10)
    assert not rep.monotonicity_violations


def test_conservation_flags_growth():
    g = GridSpec(1, 16)
    (x,) = g.coordinates()
    traj = Trajectory()
    traj.record(0.0, spectral(g, np.sin(x)))
    traj.record(0.1, spectral(g, 1.01 * np.sin(x)))
    rep = conservation_report(traj, ASpec([(1.0, FractionalLaplacian(2.0))]))
    assert rep.monotonicity_violations == [1]
    assert not rep.ok
    with pytest.raises(ValueError):
        conservation_report(Trajectory(times=[0.0], fields=[traj.fields[0]]), ASpec([]))


def test_kdv_study_l2_deviation_small():
    g = GridSpec(1, 128)
    u0 = to_spectral(random_band_limited_field(g, 7, 6.0))
    p = kdv()
    rep = convergence_study(p, "strang", [0.125, 0.0625, 0.03125], u0, 0.5, refinement=4)
    assert max(rep.l2_deviation) <= 1e-8
