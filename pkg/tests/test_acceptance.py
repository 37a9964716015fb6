"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest

from csentangle.cli import main
from csentangle.config import load_config
from csentangle.dynamics import evolve, tangent_vs_finite_difference
from csentangle.experiments import run_ho_check
from csentangle.hamiltonian import CoherentLabel, PhasePoint, build_harmonic, build_kerr_pair
from csentangle.oracle import coherent_fock, evolve_kerr, kerr_exact_purity_sum, reduced_purity
from csentangle.propagator import conjugation_check
from csentangle.purity import (
    gaussian_saddle_check,
    kerr_block_determinants,
    kerr_x,
    purity_curve,
    purity_determinant_form,
    purity_semiclassical,
)
from csentangle.shooting import BvpProblem, action_derivative_identities, solve
from csentangle.suite import saddle_reference_tangents

from conftest import ACCEPTANCE_LINES


@pytest.fixture
def report(pytestconfig):
    """Record one PASS/FAIL line (shown in the terminal summary) and assert."""

    def _report(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
        pytestconfig.stash.setdefault(ACCEPTANCE_LINES, []).append((number, line))
        assert ok, line

    return _report


def _random_complex(rng, size, radius=1.0):
    r = radius * np.sqrt(rng.uniform(0, 1, size))
    return r * np.exp(2j * np.pi * rng.uniform(0, 1, size))


def test_criterion_1_harmonic_exactness(report):
    # compile the kernels first so the timing covers the run itself
    run_ho_check(load_config("ho-check", environ={}, cli_overrides={"T_count": "2"}))
    t0 = time.perf_counter()
    rep = run_ho_check(load_config("ho-check", environ={}))
    elapsed = time.perf_counter() - t0
    col = rep.header.index("abs_err")
    errors = [float(r[col]) for r in rep.rows]
    statuses = {r[-1] for r in rep.rows}
    xis = {r[0] for r in rep.rows}
    worst = max(errors)
    ok = worst <= 1e-10 and statuses == {"ok"} and len(xis) == 2 and elapsed < 10.0
    report(1, "harmonic exactness", ok,
           f"{len(errors)} points, max |K_semi - K_exact| = {worst:.3e} (limit 1e-10), runtime {elapsed:.2f} s (limit 10 s)")


def test_criterion_2_conjugation_identity(report):
    rng = np.random.default_rng(2)
    harm = build_harmonic(1.0)
    kerr_model, k = build_kerr_pair(1.0, 1.0, 0.1)
    h_worst = k_worst = 0.0
    for _ in range(50):
        z1, z2 = _random_complex(rng, 1), _random_complex(rng, 1)
        h_worst = max(h_worst, conjugation_check(harm, CoherentLabel(z1), CoherentLabel(z2), rng.uniform(0, 4 * np.pi)))
    for _ in range(50):
        z1, z2 = _random_complex(rng, 2), _random_complex(rng, 2)
        T = rng.uniform(0, 1) / k.Gamma
        k_worst = max(k_worst, conjugation_check(kerr_model, CoherentLabel(z1), CoherentLabel(z2), T))
    ok = h_worst <= 1e-9 and k_worst <= 1e-7
    report(2, "conjugation identity", ok,
           f"50 harmonic cases max {h_worst:.3e} (limit 1e-9), 50 Kerr cases with Gamma T <= 1 max {k_worst:.3e} (limit 1e-7)")


def test_criterion_3_kerr_tangent_determinants(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    names = None
    for _ in range(20):
        z0 = _random_complex(rng, 2, radius=1.5)
        model, k = build_kerr_pair(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.02, 0.5))
        T = rng.uniform(0.01, 1.0) / k.Gamma
        form = purity_determinant_form(evolve(model, PhasePoint.real(z0), T).tangents[-1])
        closed = kerr_block_determinants(k, z0, T)
        names = sorted(closed)
        for name, want in closed.items():
            worst = max(worst, abs(getattr(form, name) - want) / abs(want))
    report(3, "Kerr tangent determinants", worst <= 1e-9,
           f"20 random (z0, Gamma, T) tuples, {len(names)} block determinants, max relative error {worst:.3e} (limit 1e-9)")


def test_criterion_4_short_time_purity(report):
    t0 = time.perf_counter()
    model, k = build_kerr_pair(1.0, 1.0, 0.1)
    choices = [np.array([1.0, 1.0]), np.array([0.5 + 0.5j, 1.2]), np.array([2.0, 0.7j])]
    lines, ok = [], True
    for z0 in choices:
        for x in (1e-5, 1e-4, 1e-3):
            T = math.sqrt(x / (abs(z0[0]) ** 2 * abs(z0[1]) ** 2)) / k.Gamma
            P = purity_semiclassical(model, z0, T, kerr=k).P
            Pex = kerr_exact_purity_sum(z0[0], z0[1], k.Gamma, T)
            dp, de = abs(P - (1 - 2 * x)), abs(Pex - (1 - 2 * x))
            good = dp <= 5 * x * x and de <= 5 * x * x
            ok &= good
            lines.append(f"x={x:.0e}: pipeline {dp / x**2:.3f} x^2, exact {de / x**2:.3f} x^2")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    report(4, "short-time purity", ok,
           f"bound 5 x^2 at 3 z0 choices, runtime {elapsed:.2f} s; at z0 = (1, 1) " + "; ".join(lines[:3]))


def test_criterion_5_exact_oracle(report):
    worst = 0.0
    z0 = np.array([0.8 + 0.4j, 1.1 - 0.3j])
    for lam in np.linspace(0.05, 1.0, 10):
        _, k = build_kerr_pair(1.0, 1.0, lam)
        state = coherent_fock(z0)
        for gt in np.linspace(0.0, 2 * np.pi, 10):
            T = gt / k.Gamma
            worst = max(worst, abs(reduced_purity(evolve_kerr(state, k, T)) - kerr_exact_purity_sum(z0[0], z0[1], k.Gamma, T)))
    _, k = build_kerr_pair(1.0, 1.0, 0.1)
    revival = reduced_purity(evolve_kerr(coherent_fock([1.0, 1.0]), k, 2 * np.pi / k.Gamma))
    spot = kerr_exact_purity_sum(1.0, 1.0, k.Gamma, np.pi / k.Gamma)
    # independent oracle at Gamma T = pi: only the parity of n - m matters
    even, odd = math.exp(-1) * math.cosh(1), math.exp(-1) * math.sinh(1)
    oracle = even**2 + odd**2 + 2 * even * odd * math.exp(-4)
    ok = worst <= 1e-8 and abs(revival - 1) <= 1e-8 and abs(spot - 0.575586) <= 1e-6
    report(5, "exact-oracle self-consistency", ok,
           f"10x10 (Gamma, T) grid max gap {worst:.3e} (limit 1e-8); P(2 pi/Gamma) - 1 = {revival - 1:.2e}; "
           f"P(z0=(1,1), Gamma T=pi) = {spot:.7f} vs required 0.575586 (limit 1e-6); "
           f"parity closed form gives {oracle:.7f}, and 0.575586 is the value at |z0x|^2 = 1/2")


def test_criterion_6_noninteracting_exactness(report):
    model, _ = build_kerr_pair(1.0, 1.3, 0.0)
    worst = 0.0
    for z0 in ([1.0, 1.0], [0.6 + 0.9j, -1.4 + 0.2j]):
        curve = purity_curve(model, z0, np.linspace(0.0, 10.0, 101))
        worst = max(worst, max(abs(b.P - 1) for b in curve))
    report(6, "noninteracting exactness", worst <= 1e-12,
           f"lambda = 0, 101 times in [0, 10], two z0, max |P - 1| = {worst:.3e} (limit 1e-12)")


def test_criterion_7_saddle_quadrature(report):
    res = [max(gaussian_saddle_check(M).residuals) for M in saddle_reference_tangents()]
    report(7, "saddle-point quadrature", max(res) <= 1e-6,
           "residuals " + ", ".join(f"{r:.2e}" for r in res) + " (limit 1e-6; uncoupled, Kerr x=0.01, random quadratic)")


def test_criterion_8_structural_numerics(report):
    model, _ = build_kerr_pair(1.0, 1.0, 0.1)
    fd = max(tangent_vs_finite_difference(model, PhasePoint.real([1.0, 1.0]), 3.0),
             tangent_vs_finite_difference(model, PhasePoint([0.5 + 0.2j, 1.0], [0.3, 0.8 - 0.1j]), 2.0, xi=-1))
    ident = max(action_derivative_identities(solve(BvpProblem(model, [0.9 + 0.1j, 1.1], [1.0, 0.7 - 0.3j], 2.0, xi))[0]).residual
                for xi in (1, -1))
    drift = det = real = 0.0
    for z in ([1.0, 1.0], [0.6 + 0.8j, -1.1 + 0.2j], [1.5j, 0.4]):
        tr = evolve(model, PhasePoint.real(z), 6.0)
        drift, det, real = max(drift, tr.energy_drift()), max(det, tr.det_deviation()), max(real, tr.reality_deviation())
    ok = fd <= 1e-6 and ident <= 1e-5 and drift <= 1e-10 and det <= 1e-9 and real <= 1e-10
    report(8, "structural numerics", ok,
           f"tangent FD {fd:.2e} (1e-6), action identities {ident:.2e} (1e-5), energy drift {drift:.2e} (1e-10), "
           f"|det M - 1| {det:.2e} (1e-9), reality {real:.2e} (1e-10)")


def test_criterion_9_discrepancy_report(tmp_path, capsys, report):
    out = tmp_path / "kerr.csv"
    code = main(["kerr-purity", "--out", str(out)])
    summary = capsys.readouterr().out
    header = out.read_text().splitlines()[0].split(",")
    gap_lines = [ln for ln in summary.splitlines() if "difference/x^3" in ln]
    ok = code == 0 and {"P_printed", "P_pipeline", "x"} <= set(header) and len(gap_lines) >= 3
    detail = "; ".join(ln.split(": ", 1)[-1] if ln.startswith("x=") else ln for ln in gap_lines[-2:])
    report(9, "documented-discrepancy report", ok, f"CSV has P_printed and P_pipeline; {detail}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
