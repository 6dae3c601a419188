import numpy as np
import pytest

from roughwall.discretization import NormOperators, assemble
from roughwall.geometry import Grading, ProfileSpec, make_profile
from roughwall.steady import FlowCase, MeshOptions, Mode, solve_steady
from roughwall.unsteady import (
    DecayTrace,
    InitialKind,
    UnsteadyConfig,
    fit_decay,
    make_initial,
    run_decay,
    vortex_velocity,
)

COARSE = MeshOptions(cells_per_period=4, ny=16, grading=Grading(2, 6, 2.0))


@pytest.fixture(scope="module")
def rough_case(cosine025):
    case = FlowCase(0.0, -1.0, 1 / 4, cosine025, Mode.STOKES)
    return case, solve_steady(case, COARSE)


def test_steady_initial_data_stays_put(rough_case):
    case, st = rough_case
    trace, _ = run_decay(UnsteadyConfig(case, InitialKind.STEADY_EXACT, dt=0.05, T_end=0.5), st)
    assert max(trace.E) <= 1e-16
    assert max(trace.D) <= 1e-16


def test_vortex_is_compact_and_projected_solenoidal(rough_case):
    case, st = rough_case
    cfg = UnsteadyConfig(case, center=(0.5, 0.5), radius=0.2, amplitude=0.05)
    init = make_initial(cfg, st.space, st)
    ops = NormOperators(st.space)
    assert ops.divergence_metric(init.u) < 1e-10
    v = vortex_velocity((0.5, 0.5), 0.2, 0.05)
    assert np.all(v(np.array([[0.1, 0.1], [0.5, 0.75]])) == 0.0)


def test_vortex_must_fit_inside_channel(rough_case):
    case, st = rough_case
    with pytest.raises(ValueError, match="inside"):
        make_initial(UnsteadyConfig(case, center=(0.1, 0.5), radius=0.2), st.space, st)


def test_seeded_center_is_reproducible(rough_case):
    case, _ = rough_case
    a = UnsteadyConfig(case, seed=3).vortex_center()
    assert a == UnsteadyConfig(case, seed=3).vortex_center()
    assert a != UnsteadyConfig(case, seed=4).vortex_center()


def test_config_validation(rough_case):
    case, _ = rough_case
    with pytest.raises(ValueError):
        UnsteadyConfig(case, dt=0.0)
    with pytest.raises(ValueError):
        UnsteadyConfig(case, delta=1.5)


@pytest.mark.parametrize("mode", [Mode.STOKES, Mode.NAVIER_STOKES])
def test_vortex_energy_decays(cosine025, mode):
    case = FlowCase(0.0, -1.0, 1 / 4, cosine025, mode)
    st = solve_steady(case, COARSE)
    trace, _ = run_decay(UnsteadyConfig(case, dt=0.02, T_end=1.0, center=(0.5, 0.5)), st, alpha1=0.054)
    assert trace.monotone()
    assert trace.E[-1] < 1e-3 * trace.E[0]
    assert trace.lambda_t > 0.0
    assert trace.smallness[0]


def test_poiseuille_start_energy_matches_steady_gap(rough_case):
    case, st = rough_case
    # E(0) = |U0 - U_s|^2 and E_S0(t) = |U(t) - U0|^2 tends to the same value once U(t) relaxes
    trace, _ = run_decay(UnsteadyConfig(case, InitialKind.POISEUILLE, dt=0.05, T_end=3.0), st)
    assert trace.E[0] == pytest.approx(trace.E_S0[-1], rel=1e-6)
    assert trace.E_S0[0] == pytest.approx(0.0, abs=1e-20)


def test_fit_decay_recovers_rate():
    t = np.linspace(0, 2, 41)
    lam, r2, window = fit_decay(t, 3.0 * np.exp(-4.0 * t))
    assert lam == pytest.approx(4.0, rel=1e-10)
    assert r2 == pytest.approx(1.0)
    assert window[0] > 0.0


def test_monotone_flags_growth():
    tr = DecayTrace(t=[0, 1, 2, 3], E=[1.0, 0.5, 0.6, 0.1])
    assert not tr.monotone()
    assert DecayTrace(t=[0, 1, 2], E=[1.0, 1e-25, 2e-25]).monotone()


def test_trace_csv_columns(tmp_path, rough_case):
    case, st = rough_case
    trace, _ = run_decay(UnsteadyConfig(case, InitialKind.STEADY_EXACT, dt=0.1, T_end=0.2), st)
    trace.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,E,D,smallness_flag,E_S0,E_eff_Omega0"
    assert len(lines) == 4


def test_flat_ns_keeps_poiseuille():
    flat = make_profile(ProfileSpec())
    case = FlowCase(0.0, -1.0, 1 / 4, flat, Mode.NAVIER_STOKES)
    st = solve_steady(case, COARSE)
    trace, _ = run_decay(UnsteadyConfig(case, InitialKind.POISEUILLE, dt=0.1, T_end=0.3), st)
    assert max(trace.E) < 1e-18
    assert assemble(st.space).B.shape[0] == st.space.n_p
