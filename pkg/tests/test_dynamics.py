import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csentangle.dynamics import (
    TangentMatrix,
    action_time_derivative_check,
    build_grid,
    evolve,
    flow,
    flow_samples,
    step_count,
    tangent_vs_finite_difference,
)
from csentangle.errors import ModeMismatchError, TrajectoryEscapeError
from csentangle.hamiltonian import PhasePoint, build_kerr_pair

amp = st.floats(-1.2, 1.2, allow_nan=False)
cplx = st.builds(complex, amp, amp)


def kerr_solution(k, u0, v0, t):
    """Closed-form Kerr flow: each mode rotates at a rate set by the other's number."""
    lx = 1j * (k.Omega_x + k.Gamma * u0[1] * v0[1])
    ly = 1j * (k.Omega_y + k.Gamma * u0[0] * v0[0])
    return (np.array([u0[0] * np.exp(-lx * t), u0[1] * np.exp(-ly * t)]),
            np.array([v0[0] * np.exp(lx * t), v0[1] * np.exp(ly * t)]))


def kerr_tangent(k, u0, v0, T):
    """Product form ``M2 M1`` of the Kerr tangent matrix."""
    ux, uy = u0
    vx, vy = v0
    a = 1j * k.Gamma * T
    M1 = np.array([
        [1, -a * ux * vy, 0, -a * ux * uy],
        [-a * uy * vx, 1, -a * uy * ux, 0],
        [0, a * vx * vy, 1, a * vx * uy],
        [a * vy * vx, 0, a * vy * ux, 1],
    ])
    lx = 1j * (k.Omega_x + k.Gamma * uy * vy)
    ly = 1j * (k.Omega_y + k.Gamma * ux * vx)
    M2 = np.diag([np.exp(-lx * T), np.exp(-ly * T), np.exp(lx * T), np.exp(ly * T)])
    return M2 @ M1


@given(cplx, cplx, cplx, cplx, st.floats(0.1, 4.0))
def test_kerr_flow_matches_closed_form(a, b, c, d, T):
    model, k = build_kerr_pair(1.0, 1.3, 0.2)
    start = PhasePoint([a, b], [c, d])
    tr = evolve(model, start, T)
    u, v = kerr_solution(k, start.u, start.v, T)
    assert np.max(np.abs(tr.u[-1] - u)) <= 1e-9 * max(1.0, np.max(np.abs(u)))
    assert np.max(np.abs(tr.v[-1] - v)) <= 1e-9 * max(1.0, np.max(np.abs(v)))


@given(cplx, cplx, st.floats(0.1, 3.0))
def test_kerr_tangent_matches_product_form(zx, zy, T):
    model, k = build_kerr_pair(0.9, 1.1, 0.15)
    start = PhasePoint.real([zx, zy])
    M = evolve(model, start, T).tangents[-1]
    want = kerr_tangent(k, start.u, start.v, T)
    assert np.max(np.abs(M - want)) <= 1e-9 * max(1.0, np.max(np.abs(want)))


def test_harmonic_tangent_is_diagonal_phase(harmonic):
    # u rotates as exp(-i w t) whichever end is held fixed, so xi does not enter
    for xi in (1, -1):
        tr = evolve(harmonic, PhasePoint([0.3 + 0.1j], [0.2]), 2.0, xi=xi)
        assert np.allclose(tr.tangents[-1], np.diag([np.exp(-2j), np.exp(2j)]), atol=1e-11)
        assert TangentMatrix(tr.tangents[-1]).det() == pytest.approx(1.0, abs=1e-12)


@given(cplx, cplx, st.floats(0.5, 6.0))
def test_real_start_stays_real_and_conserves_energy(zx, zy, T):
    model, _ = build_kerr_pair(1.0, 1.0, 0.1)
    tr = evolve(model, PhasePoint.real([zx, zy]), T)
    assert tr.reality_deviation() <= 1e-10
    assert tr.energy_drift() <= 1e-10
    assert tr.det_deviation() <= 1e-9


def test_complex_start_conserves_energy_and_volume(kerr_pair):
    model, _ = kerr_pair
    tr = evolve(model, PhasePoint([0.7 + 0.3j, 1.0], [0.2 - 0.5j, 0.9j]), 3.0)
    assert tr.energy_drift() <= 1e-10
    assert tr.det_deviation() <= 1e-9


def test_negative_xi_runs_the_same_flow_from_the_final_point(kerr_pair):
    model, _ = kerr_pair
    start = PhasePoint([0.5 + 0.2j, 1.0], [0.3, 0.8 - 0.1j])
    fwd = evolve(model, start, 2.0)
    bwd = evolve(model, start, 2.0, xi=-1, steps=fwd.step_count)
    assert np.allclose(fwd.u, bwd.u, atol=1e-14) and np.allclose(fwd.v, bwd.v, atol=1e-14)
    assert bwd.physical_time()[0] == 2.0 and bwd.physical_time()[-1] == 0.0


def test_adaptive_mode_agrees_with_fixed_steps(kerr_pair):
    model, _ = kerr_pair
    start = PhasePoint.real([1.0, 0.6 + 0.2j])
    fixed = evolve(model, start, 3.0)
    adaptive = evolve(model, start, 3.0, tol=1e-10)
    assert adaptive.t[-1] == pytest.approx(3.0)
    assert np.max(np.abs(adaptive.u[-1] - fixed.u[-1])) <= 1e-7
    assert np.max(np.abs(adaptive.tangents[-1] - fixed.tangents[-1])) <= 1e-7


def test_checkpoints_are_hit_exactly():
    grid = build_grid(2.0, 37, [0.5, 1.25])
    assert {0.0, 0.5, 1.25, 2.0} <= set(grid.tolist())
    assert np.all(np.diff(grid) > 0)


def test_flow_samples_agree_with_single_flows(kerr_pair):
    model, _ = kerr_pair
    start = PhasePoint([0.8, 0.4j], [0.9, -0.3j])
    pts = flow_samples(model, start, [-0.5, -1.5, -3.0])
    for d, p in zip([-0.5, -1.5, -3.0], pts):
        single = flow(model, start, d, step_count(model, start, abs(d)))
        assert np.max(np.abs(p.u - single.u)) <= 1e-10


def test_tangent_matches_finite_differences(kerr_pair, harmonic):
    model, _ = kerr_pair
    assert tangent_vs_finite_difference(model, PhasePoint.real([1.0, 1.0]), 3.0) <= 1e-6
    assert tangent_vs_finite_difference(model, PhasePoint([0.5 + 0.2j, 1.0], [0.3, 0.8]), 2.0, xi=-1) <= 1e-6
    assert tangent_vs_finite_difference(harmonic, PhasePoint([0.5 + 0.2j], [0.3 - 0.4j]), 4.0, step=1e-3) <= 1e-10


def test_escape_is_reported():
    model, _ = build_kerr_pair(1.0, 1.0, 0.1)
    with pytest.raises(TrajectoryEscapeError) as info:
        evolve(model, PhasePoint([3.0, 3.0], [30j, 30j]), 5.0, escape_bound=50.0)
    assert info.value.t >= 0


def test_bad_inputs(kerr_pair, harmonic):
    model, _ = kerr_pair
    with pytest.raises(ModeMismatchError):
        evolve(model, PhasePoint([1.0], [1.0]), 1.0)
    with pytest.raises(ValueError):
        evolve(model, PhasePoint.real([1.0, 1.0]), -1.0)
    with pytest.raises(ValueError):
        evolve(model, PhasePoint.real([1.0, 1.0]), 1.0, xi=0)


def test_trajectory_csv_round_trip(tmp_path, harmonic):
    tr = evolve(harmonic, PhasePoint([0.3 + 0.1j], [0.2]), 1.0, steps=10)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "re_u0", "im_u0", "re_v0", "im_v0"]
    assert len(rows) == 12
    assert complex(float(rows[-1][1]), float(rows[-1][2])) == tr.u[-1, 0]


def test_zero_duration_gives_identity(kerr_pair):
    model, _ = kerr_pair
    tr = evolve(model, PhasePoint.real([1.0, 1.0]), 0.0)
    assert np.array_equal(tr.tangents[-1], np.eye(4))
    assert tr.action_S == pytest.approx(-1j * 0.5 * 2 * (1 + 1))  # -Lambda = -(i hbar/2)(u.v + u.v)
