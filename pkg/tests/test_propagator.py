import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csentangle.errors import ModeMismatchError
from csentangle.hamiltonian import CoherentLabel, build_harmonic, build_kerr_pair
from csentangle.oracle import kerr_amplitude
from csentangle.propagator import (
    MAX_JUMP,
    block_dets,
    branch_scan,
    conjugation_check,
    continuous_sqrt,
    exact_ho_propagator,
    propagate,
)

amp = st.floats(-1.0, 1.0, allow_nan=False)
cplx = st.builds(complex, amp, amp)


def test_vacuum_half_period_spot_value(harmonic):
    K = propagate(harmonic, CoherentLabel([0.0]), CoherentLabel([0.0]), np.pi).amplitude
    assert abs(K - (-1j)) <= 1e-10
    assert exact_ho_propagator(1.0, CoherentLabel([0.0]), CoherentLabel([0.0]), np.pi) == pytest.approx(-1j)


def test_zero_time_is_overlap(harmonic):
    a, b = CoherentLabel([0.4 + 0.2j]), CoherentLabel([-0.3j])
    want = cmath.exp(-0.5 * abs(0.4 + 0.2j) ** 2 - 0.5 * 0.09 + (0.4 + 0.2j) * 0.3j)
    assert abs(propagate(harmonic, a, b, 0.0).amplitude - want) <= 1e-15


@given(cplx, cplx, st.floats(0.0, 4 * np.pi), st.sampled_from([1, -1]))
def test_harmonic_semiclassics_is_exact(z1, z2, T, xi):
    model = build_harmonic(1.0)
    a, b = CoherentLabel([z1]), CoherentLabel([z2])
    K = propagate(model, a, b, T, xi).amplitude
    assert abs(K - exact_ho_propagator(1.0, a, b, T, xi)) <= 1e-10


@given(cplx, cplx, st.floats(0.1, 10.0))
def test_conjugation_identity_harmonic(z1, z2, T):
    assert conjugation_check(build_harmonic(1.0), CoherentLabel([z1]), CoherentLabel([z2]), T) <= 1e-9


@given(cplx, cplx, cplx, cplx, st.floats(0.05, 1.0))
def test_conjugation_identity_kerr(a, b, c, d, gt):
    model, k = build_kerr_pair(1.0, 1.2, 0.1)
    assert conjugation_check(model, CoherentLabel([a, b]), CoherentLabel([c, d]), gt / k.Gamma) <= 1e-7


def test_uncoupled_pair_factorizes():
    model, _ = build_kerr_pair(1.0, 1.7, 0.0)
    a, b = CoherentLabel([0.5 + 0.1j, -0.4]), CoherentLabel([0.2, 0.6j])
    T = 2.3
    K = propagate(model, a, b, T).amplitude
    Kx = propagate(build_harmonic(1.0), CoherentLabel([a.z[0]]), CoherentLabel([b.z[0]]), T).amplitude
    Ky = propagate(build_harmonic(1.7), CoherentLabel([a.z[1]]), CoherentLabel([b.z[1]]), T).amplitude
    assert abs(K - Kx * Ky) <= 1e-10


def test_kerr_semiclassics_tracks_exact_at_short_times():
    model, k = build_kerr_pair(1.0, 1.0, 0.1)
    z1, z2 = np.array([0.8, 0.6j]), np.array([0.7, 0.5j])
    for T in (0.5, 1.0, 2.0):
        K = propagate(model, CoherentLabel(z1), CoherentLabel(z2), T).amplitude
        ex = kerr_amplitude(k, z1, z2, T)
        assert abs(K - ex) <= 0.02 * abs(ex)


def test_continuous_sqrt_follows_winding():
    t = np.linspace(0, 1, 400)
    w = np.exp(1j * 6 * np.pi * t) * (2 + np.sin(t))
    roots, winding, jump = continuous_sqrt(w)
    assert np.allclose(roots**2, w)
    assert np.max(np.abs(np.diff(roots))) < 0.1
    assert winding == 3 and jump < MAX_JUMP
    assert roots[-1] == pytest.approx(-np.sqrt(w[-1]))
    assert continuous_sqrt(w, full=False)[0][0] == pytest.approx(roots[-1])


def test_block_dets_pick_the_right_block():
    M = np.arange(16, dtype=complex).reshape(1, 4, 4) + np.eye(4)
    assert block_dets(M, 1)[0] == pytest.approx(np.linalg.det(M[0, 2:, 2:]))
    assert block_dets(M, -1)[0] == pytest.approx(np.linalg.det(M[0, :2, :2]))


def test_branch_scan_keeps_steps_below_quarter_turn(kerr_pair):
    model, _ = kerr_pair
    times, prefs, jump = branch_scan(model, CoherentLabel([1.0, 0.8]), CoherentLabel([0.9, 1.0]), np.arange(0, 6.0, 0.25))
    assert jump < np.pi / 2
    assert len(times) >= 24 and np.all(np.diff(times) > 0)


def test_label_checks(harmonic, kerr_pair):
    with pytest.raises(ValueError):
        propagate(harmonic, CoherentLabel([0.1]), CoherentLabel([0.1], b=2.0), 1.0)
    with pytest.raises(ModeMismatchError):
        propagate(kerr_pair[0], CoherentLabel([0.1]), CoherentLabel([0.1]), 1.0)
    with pytest.raises(ValueError):
        propagate(harmonic, CoherentLabel([0.1], hbar=2.0), CoherentLabel([0.1], hbar=2.0), 1.0)
