"""Property suite: every module invariant measured with fixed seeds.

A check passes when its measured value does not exceed its threshold.
``inject_fault`` names checks to corrupt on purpose: ``det_tangent`` scales
the tangent matrices before taking determinants, any other name has its
threshold replaced by ``-inf``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import evolve, tangent_vs_finite_difference, action_time_derivative_check
from .hamiltonian import (
    CoherentLabel,
    HamiltonianModel,
    Monomial,
    PhasePoint,
    build_harmonic,
    build_kerr_pair,
    phase_to_uv,
    uv_to_phase,
)
from .oracle import (
    coherent_fock,
    evolve_kerr,
    kerr_exact_purity_sum,
    reduced_density,
    reduced_purity,
)
from .propagator import branch_scan, conjugation_check, exact_ho_propagator, propagate
from .purity import gaussian_saddle_check, purity_curve, purity_semiclassical
from .shooting import (
    BvpProblem,
    action_derivative_identities,
    prefactor_consistency,
    solve,
)


@dataclass
class CheckResult:
    module: str
    name: str
    measured: float
    threshold: float
    seconds: float

    @property
    def passed(self):
        return bool(self.measured <= self.threshold)


def random_hermitian_model(rng, n_modes=2, n_terms=4, max_power=2, hbar=1.0):
    """Random polynomial with a conjugate partner for every monomial."""
    monos = []
    for _ in range(n_terms):
        powers = tuple((int(rng.integers(0, max_power + 1)), int(rng.integers(0, max_power + 1))) for _ in range(n_modes))
        c = complex(rng.normal(), rng.normal()) * 0.3
        partner = tuple((n, m) for m, n in powers)
        if partner == powers:
            monos.append(Monomial(c.real, powers))
        else:
            monos += [Monomial(c, powers), Monomial(np.conj(c), partner)]
    return HamiltonianModel(tuple(monos), hbar=hbar)


def quadratic_tangent(rng, t=1.0, scale=0.2, hbar=1.0):
    """Tangent of a random small two-mode quadratic Hamiltonian after time ``t``.

    ``H = sum h_rs v_r u_s + (g_rs u_r u_s + conj(g_rs) v_r v_s) / 2`` with
    hermitian ``h`` and symmetric ``g``; entries bounded by ``scale``.
    """
    h = rng.uniform(-scale, scale, (2, 2)) + 1j * rng.uniform(-scale, scale, (2, 2))
    h = 0.5 * (h + h.conj().T)
    g = rng.uniform(-scale, scale, (2, 2)) + 1j * rng.uniform(-scale, scale, (2, 2))
    g = 0.5 * (g + g.T)
    H_uu, H_vv, H_vu = g, np.conj(g), h
    H_uv = h.T
    L = (1j / hbar) * np.block([[-H_vu, -H_vv], [H_uu, H_uv]])
    return expm(L * t)


def saddle_reference_tangents(seed=7):
    """Three tangents for the quadrature check: uncoupled, Kerr at x = 0.01, random quadratic."""
    model, kerr = build_kerr_pair(1.0, 1.0, 0.1)
    kerr_M = evolve(model, PhasePoint.real([1.0, 1.0]), 1.0).tangents[-1]
    uncoupled = evolve(build_kerr_pair(1.0, 1.3, 0.0)[0], PhasePoint.real([1.0, 0.5]), 2.0).tangents[-1]
    return [uncoupled, kerr_M, quadratic_tangent(np.random.default_rng(seed))]


def _fd_checks(model, rng, npts=50):
    n = model.n_modes
    h = 1e-5
    g_err = h_err = 0.0
    for _ in range(npts):
        vec = rng.uniform(-1.4, 1.4, 2 * n) + 1j * rng.uniform(-1.4, 1.4, 2 * n)
        p = PhasePoint(vec[:n], vec[n:])
        grad = np.concatenate(model.gradient(p))
        hess = model.full_hessian(p)
        for j in range(2 * n):
            e = np.zeros(2 * n)
            e[j] = h
            pp = PhasePoint(vec[:n] + e[:n], vec[n:] + e[n:])
            pm = PhasePoint(vec[:n] - e[:n], vec[n:] - e[n:])
            fd = (model.evaluate(pp) - model.evaluate(pm)) / (2 * h)
            g_err = max(g_err, abs(fd - grad[j]) / max(1.0, abs(grad[j])))
            col = (np.concatenate(model.gradient(pp)) - np.concatenate(model.gradient(pm))) / (2 * h)
            h_err = max(h_err, float(np.max(np.abs(col - hess[:, j]) / np.maximum(1.0, np.abs(hess[:, j])))))
    return g_err, h_err


def _checks(config, rng):
    kerr_model, kerr = build_kerr_pair(1.0, 1.0, 0.1)
    harm = build_harmonic(1.0)
    rand_model = random_hermitian_model(rng)
    faults = set(config.inject_fault)

    # ---- hamiltonian_model
    def real_eval():
        worst = 0.0
        for model in (kerr_model, rand_model):
            for _ in range(500):
                u = rng.normal(size=2) * 1.5 + 1j * rng.normal(size=2) * 1.5
                H = model.evaluate(PhasePoint.real(u))
                worst = max(worst, abs(H.imag) / (1 + abs(H)))
        return worst

    fd = {}

    def grad_fd():
        fd["g"], fd["h"] = _fd_checks(rand_model, rng)
        return fd["g"]

    def roundtrip():
        worst = 0.0
        for _ in range(100):
            b = rng.uniform(0.3, 3.0, 2)
            label = CoherentLabel([0, 0], b=b, hbar=0.7)
            q, p = rng.normal(size=2), rng.normal(size=2)
            pt = phase_to_uv(q, p, label)
            q2, p2 = uv_to_phase(pt, label)
            back = phase_to_uv(q2, p2, label)
            worst = max(worst, float(np.max(np.abs(q2 - q))), float(np.max(np.abs(p2 - p))),
                        float(np.max(np.abs(back.u - pt.u))))
        return worst

    def kerr_params():
        k = build_kerr_pair(1.3, 0.7, 0.05, hbar=0.9)[1]
        return max(abs(k.Omega_x - (k.omega_x + k.Gamma / 2)), abs(k.Omega_y - (k.omega_y + k.Gamma / 2)),
                   abs(k.Gamma - k.lam * k.hbar * k.omega_x * k.omega_y),
                   abs(k.epsilon0 - k.hbar * (k.omega_x + k.omega_y) / 2))

    # ---- complex_dynamics
    starts = [np.array([1.0, 1.0]), np.array([0.6 + 0.8j, -1.1 + 0.2j]), np.array([1.5j, 0.4])]
    trajs = {}

    def reality():
        worst = 0.0
        for z in starts:
            tr = evolve(kerr_model, PhasePoint.real(z), 5.0)
            trajs[tuple(z)] = tr
            worst = max(worst, tr.reality_deviation())
        return worst

    def drift():
        extra = evolve(kerr_model, PhasePoint([0.7 + 0.3j, 1.0], [0.2 - 0.5j, 0.9j]), 3.0)
        return max([tr.energy_drift() for tr in trajs.values()] + [extra.energy_drift()])

    def det_tangent():
        scale = 1.001 if "det_tangent" in faults else 1.0
        return max(float(np.max(np.abs(np.linalg.det(tr.tangents * scale) - 1.0))) for tr in trajs.values())

    def xi_reversal():
        plus = solve(BvpProblem(kerr_model, [1.0, 0.5 + 0.5j], [0.8, 1.0 - 0.2j], 3.0, 1))[0].trajectory
        minus = solve(BvpProblem(kerr_model, plus.u[-1], plus.v[0], 3.0, -1),
                      steps=plus.step_count)[0].trajectory
        return max(float(np.max(np.abs(minus.u - plus.u))), float(np.max(np.abs(minus.v - plus.v))))

    def tangent_fd():
        return max(
            tangent_vs_finite_difference(kerr_model, PhasePoint.real([1.0, 1.0]), 3.0),
            tangent_vs_finite_difference(kerr_model, PhasePoint([0.5 + 0.2j, 1.0], [0.3, 0.8 - 0.1j]), 2.0, xi=-1),
        )

    def tangent_fd_harmonic():
        return tangent_vs_finite_difference(harm, PhasePoint([0.5 + 0.2j], [0.3 - 0.4j]), 4.0, step=1e-3)

    def action_T():
        sol = solve(BvpProblem(kerr_model, [0.9 + 0.1j, 1.1], [1.0, 0.7 - 0.3j], 2.5, 1))[0]
        sol_m = solve(BvpProblem(kerr_model, [0.9 + 0.1j, 1.1], [1.0, 0.7 - 0.3j], 2.5, -1))[0]
        return max(action_time_derivative_check(sol.trajectory, kerr_model),
                   action_time_derivative_check(sol_m.trajectory, kerr_model))

    # ---- boundary_shooting
    sol_cache = {}

    def kerr_solution():
        if "s" not in sol_cache:
            sol_cache["s"] = solve(BvpProblem(kerr_model, [1.0, 0.5 + 0.5j], [0.8, 1.0], 3.0, 1))[0]
        return sol_cache["s"]

    def identities():
        sol = kerr_solution()
        sol_m = solve(BvpProblem(kerr_model, [1.0, 0.5 + 0.5j], [0.8, 1.0], 3.0, -1))[0]
        return max(action_derivative_identities(sol).residual, action_derivative_identities(sol_m).residual)

    def prefactor():
        return prefactor_consistency(kerr_solution())

    def jacobian():
        sol = kerr_solution()
        prob = sol.problem
        free = sol.free_end
        h = 1e-6
        cols = []
        for r in range(2):
            e = np.zeros(2)
            e[r] = h
            ends = [evolve(kerr_model, prob.start(free + s * e), prob.T, steps=sol.trajectory.step_count,
                           tangent=False).v[-1] for s in (1, -1)]
            cols.append((ends[0] - ends[1]) / (2 * h))
        J = np.array(cols).T
        return float(np.max(np.abs(J - sol.jacobian)))

    def fixed_point():
        sol = kerr_solution()
        prob = BvpProblem(kerr_model, sol.problem.z1, sol.problem.z2_conj, sol.problem.T, 1, (sol.free_end,))
        again = solve(prob, include_default=False, steps=sol.trajectory.step_count)[0]
        return float(np.max(np.abs(again.free_end - sol.free_end)))

    # ---- semiclassical_propagator
    def ho_grid():
        worst = 0.0
        labels = [CoherentLabel([z]) for z in (0.5, -0.5j, 1.0)]
        for xi in (1, -1):
            for a in labels:
                for b in labels:
                    for T in np.linspace(0, 4 * np.pi, 9):
                        k = propagate(harm, a, b, T, xi).amplitude
                        worst = max(worst, abs(k - exact_ho_propagator(1.0, a, b, T, xi)))
        return worst

    def branch():
        worst = 0.0
        for model, a, b, Ts in ((harm, CoherentLabel([0.5]), CoherentLabel([0.5j]), np.arange(0, 4 * np.pi, 0.2)),
                                (kerr_model, CoherentLabel([1.0, 0.8]), CoherentLabel([0.9, 1.0]), np.arange(0, 6.0, 0.25))):
            worst = max(worst, branch_scan(model, a, b, Ts)[2])
        return worst

    def factorization():
        w = (1.0, 1.3)
        two = HamiltonianModel((Monomial(w[0], ((1, 1), (0, 0))), Monomial(w[1], ((0, 0), (1, 1))),
                                Monomial((w[0] + w[1]) / 2, ((0, 0), (0, 0)))))
        worst = 0.0
        for z1, z2, T in (((0.5, 0.3j), (0.2, -0.4), 1.7), ((1.0, -0.5), (0.5j, 0.5), 5.0)):
            k2 = propagate(two, CoherentLabel(z1), CoherentLabel(z2), T).amplitude
            k1 = np.prod([propagate(build_harmonic(w[r]), CoherentLabel([z1[r]]), CoherentLabel([z2[r]]), T).amplitude
                          for r in range(2)])
            worst = max(worst, abs(k2 - k1))
        return worst

    def conj_harm():
        return max(conjugation_check(harm, CoherentLabel([complex(*rng.normal(size=2)) * 0.6]),
                                     CoherentLabel([complex(*rng.normal(size=2)) * 0.6]), T)
                   for T in (0.0, 1.0, 3.5, 9.0))

    def conj_kerr():
        worst = 0.0
        for _ in range(5):
            z1 = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)
            z2 = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)
            T = rng.uniform(0, 10.0)
            worst = max(worst, conjugation_check(kerr_model, CoherentLabel(z1), CoherentLabel(z2), T))
        return worst

    # ---- entanglement_purity
    def decoupled():
        m0 = build_kerr_pair(1.0, 1.4, 0.0)[0]
        curve = purity_curve(m0, [1.0, 0.7j], np.linspace(0, 10, 11))
        return max(abs(b.P - 1) for b in curve)

    def symmetric():
        worst = 0.0
        for z in starts:
            b = purity_semiclassical(kerr_model, z, 4.0)
            worst = max(worst, float(np.max(np.abs(b.a_matrix - b.a_matrix.T))),
                        float(np.max(np.abs(b.b_matrix - b.b_matrix.T))))
        return worst

    def short_time():
        worst = 0.0
        for z in ([1.0, 1.0], [2.0, 1.5], [0.5, 3.0]):
            for x in (1e-5, 1e-4, 1e-3):
                T = math.sqrt(x) / (abs(z[0]) * abs(z[1]) * kerr.Gamma)
                P = purity_semiclassical(kerr_model, z, T).P
                worst = max(worst, abs(P - (1 - 2 * x)) / x**2)
        return worst

    def swap():
        m_xy, _ = build_kerr_pair(1.0, 1.7, 0.08)
        m_yx, _ = build_kerr_pair(1.7, 1.0, 0.08)
        z = np.array([0.9 + 0.2j, 1.3 - 0.4j])
        return max(abs(purity_semiclassical(m_xy, z, T).P - purity_semiclassical(m_yx, z[::-1], T).P)
                   for T in (0.5, 3.0, 8.0))

    def imag_residue():
        return max(abs(purity_semiclassical(kerr_model, z, 6.0).imag_residue) for z in starts)

    def saddle():
        return max(max(gaussian_saddle_check(M, 64).residuals) for M in saddle_reference_tangents(config.seed + 7))

    # ---- quantum_oracle
    def oracle_grid():
        worst = 0.0
        for G in np.linspace(0.05, 0.5, 4):
            k = build_kerr_pair(1.0, 1.0, G)[1]
            for T in np.linspace(0, 2 * np.pi / G, 5):
                st = evolve_kerr(coherent_fock([1.0, 0.8]), k, T)
                worst = max(worst, abs(reduced_purity(st) - kerr_exact_purity_sum(1.0, 0.8, k.Gamma, T)))
        return worst

    def periodicity():
        G = 0.1
        return max(abs(kerr_exact_purity_sum(1.2, 0.9, G, T) - kerr_exact_purity_sum(1.2, 0.9, G, T + 2 * np.pi / G))
                   for T in (0.3, 7.0, 20.0))

    def cutoff():
        from .oracle import default_cutoff

        N = default_cutoff(1.5)
        return max(abs(kerr_exact_purity_sum(1.5, 1.0, 0.1, T, N) - kerr_exact_purity_sum(1.5, 1.0, 0.1, T, N + 5))
                   for T in (3.0, 17.0))

    def density():
        k = build_kerr_pair(1.0, 1.0, 0.2)[1]
        rho = reduced_density(evolve_kerr(coherent_fock([1.1, 0.9j]), k, 4.0)).matrix
        return max(float(np.max(np.abs(rho - rho.conj().T))), abs(np.trace(rho) - 1),
                   max(0.0, -float(np.min(np.linalg.eigvalsh(rho)))))

    # ---- experiment_cli
    def determinism():
        from dataclasses import replace

        from .experiments import run_kerr_purity

        small = replace(config, T_grid=(0.0, 0.5, 1.0), threads=1)
        return 0.0 if run_kerr_purity(small).csv_text() == run_kerr_purity(small).csv_text() else 1.0

    return [
        ("hamiltonian_model", "real_on_real_phase_space", real_eval, 1e-12),
        ("hamiltonian_model", "gradient_vs_finite_difference", grad_fd, 1e-6),
        ("hamiltonian_model", "hessian_vs_finite_difference", lambda: fd["h"], 1e-6),
        ("hamiltonian_model", "phase_round_trip", roundtrip, 1e-12),
        ("hamiltonian_model", "kerr_parameters", kerr_params, 1e-14),
        ("complex_dynamics", "reality_preservation", reality, 1e-10),
        ("complex_dynamics", "energy_drift", drift, 1e-10),
        ("complex_dynamics", "det_tangent", det_tangent, 1e-9),
        ("complex_dynamics", "xi_reversal", xi_reversal, 1e-8),
        ("complex_dynamics", "tangent_vs_finite_difference", tangent_fd, 1e-6),
        ("complex_dynamics", "tangent_fd_harmonic", tangent_fd_harmonic, 1e-10),
        ("complex_dynamics", "action_time_derivative", action_T, 1e-6),
        ("boundary_shooting", "action_derivative_identities", identities, 1e-5),
        ("boundary_shooting", "prefactor_consistency", prefactor, 1e-4),
        ("boundary_shooting", "jacobian_equals_tangent_block", jacobian, 1e-8),
        ("boundary_shooting", "solution_is_fixed_point", fixed_point, 1e-10),
        ("semiclassical_propagator", "harmonic_exactness", ho_grid, 1e-10),
        ("semiclassical_propagator", "branch_continuity", branch, math.pi / 2),
        ("semiclassical_propagator", "decoupled_factorization", factorization, 1e-10),
        ("semiclassical_propagator", "conjugation_harmonic", conj_harm, 1e-9),
        ("semiclassical_propagator", "conjugation_kerr", conj_kerr, 1e-7),
        ("entanglement_purity", "decoupled_purity_one", decoupled, 1e-12),
        ("entanglement_purity", "action_hessians_symmetric", symmetric, 1e-9),
        ("entanglement_purity", "short_time_law_coefficient", short_time, 5.0),
        ("entanglement_purity", "mode_swap", swap, 1e-10),
        ("entanglement_purity", "imaginary_residue", imag_residue, 1e-9),
        ("entanglement_purity", "saddle_quadrature", saddle, 1e-6),
        ("quantum_oracle", "fock_vs_closed_sum", oracle_grid, 1e-8),
        ("quantum_oracle", "periodicity", periodicity, 1e-8),
        ("quantum_oracle", "cutoff_robustness", cutoff, 1e-9),
        ("quantum_oracle", "reduced_density_valid", density, 1e-10),
        ("experiment_cli", "deterministic_csv", determinism, 0.0),
    ]


def run_suite(config):
    from .experiments import Report, _fmt

    rng = np.random.default_rng(config.seed)
    rep = Report(["module", "check", "measured", "threshold", "status"])
    results = []
    for module, name, fn, threshold in _checks(config, rng):
        if name in config.inject_fault and name != "det_tangent":
            threshold = -math.inf
        t0 = time.perf_counter()
        try:
            measured = float(fn())
        except Exception as exc:  # a crash is a failed invariant, report and go on
            measured = math.inf
            rep.summary.append(f"ERROR {module}.{name}: {type(exc).__name__}: {exc}")
        res = CheckResult(module, name, measured, threshold, time.perf_counter() - t0)
        results.append(res)
        status = "PASS" if res.passed else "FAIL"
        rep.rows.append([module, name, _fmt(measured), _fmt(threshold), status])
    for res in results:
        rep.summary.append(
            f"{'PASS' if res.passed else 'FAIL'} {res.module}.{res.name}: measured {res.measured:.3e} "
            f"(limit {res.threshold:.1e})"
        )
    n_fail = sum(not r.passed for r in results)
    rep.summary.append(f"{len(results) - n_fail} passed, {n_fail} failed")
    rep.ok = n_fail == 0
    return rep
