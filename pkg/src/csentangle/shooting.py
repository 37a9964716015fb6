"""Two-point boundary-value problems by multi-start Newton shooting.

For ``xi = +1`` the data are ``u(0) = z1`` and ``v(T) = z2*``; the free end
is ``v(0)`` and the Newton Jacobian is the ``M_vv`` block. For ``xi = -1``
(on the generalized-time axis) ``v(0) = z2*`` and ``u(T) = z1``; the free end
is ``u(0)`` with Jacobian ``M_uu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DEFAULT_PHASE_STEP, evolve, flow, flow_samples, step_count
from .errors import FocalPointError, ModeMismatchError, ShootingError, TrajectoryEscapeError
from .hamiltonian import PhasePoint

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
FOCAL_DET = 1e-14
DEDUPE_DISTANCE = 1e-8
MAX_HALVINGS = 20
CONTINUATION_STAGES = (4, 16)


def _modes(x, n, name):
    arr = np.atleast_1d(np.asarray(x, dtype=np.complex128)).copy()
    if arr.shape != (n,):
        raise ModeMismatchError(f"{name} needs {n} mode value(s), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BvpProblem:
    model: object
    z1: np.ndarray
    z2_conj: np.ndarray
    T: float
    xi: int = 1
    initial_guesses: tuple = ()

    def __post_init__(self):
        n = self.model.n_modes
        object.__setattr__(self, "z1", _modes(self.z1, n, "z1"))
        object.__setattr__(self, "z2_conj", _modes(self.z2_conj, n, "z2_conj"))
        object.__setattr__(self, "initial_guesses", tuple(_modes(g, n, "guess") for g in self.initial_guesses))
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise ValueError("T must be finite and non-negative")
        if self.xi not in (1, -1):
            raise ValueError("xi must be +1 or -1")

    def start(self, free):
        if self.xi == 1:
            return PhasePoint(self.z1, free)
        return PhasePoint(free, self.z2_conj)

    @property
    def target(self):
        return self.z2_conj if self.xi == 1 else self.z1

    def default_steps(self, phase_step=DEFAULT_PHASE_STEP):
        return step_count(self.model, PhasePoint(self.z1, self.z2_conj), self.T, phase_step)


@dataclass(frozen=True)
class BvpSolution:
    trajectory: object
    residual: float
    iterations: int
    guess_used: np.ndarray
    problem: BvpProblem = field(repr=False, compare=False, default=None)

    @property
    def free_end(self):
        traj = self.trajectory
        return traj.v[0].copy() if traj.xi == 1 else traj.u[0].copy()

    @property
    def jacobian(self):
        n = self.trajectory.n_modes
        M = self.trajectory.tangents[-1]
        return M[n:, n:] if self.trajectory.xi == 1 else M[:n, :n]


def default_guess(problem, phase_step=DEFAULT_PHASE_STEP, steps=None):
    """Free-end guess from running ``(u, v) = (z1, z2*)`` backward over ``T``.

    Exact whenever the free-end variable evolves independently of the fixed
    one (quadratic and decoupled models); otherwise a close first guess for
    weak coupling. Falls back to the fixed-end value if the backward run
    escapes.
    """
    fallback = problem.z2_conj if problem.xi == 1 else problem.z1
    if problem.T == 0:
        return fallback.copy()
    if steps is None:
        steps = problem.default_steps(phase_step)
    try:
        back = flow(problem.model, PhasePoint(problem.z1, problem.z2_conj), -problem.T, steps)
    except TrajectoryEscapeError:
        return fallback.copy()
    return (back.v if problem.xi == 1 else back.u).copy()


def default_guesses(model, z1, z2_conj, times, xi=1, phase_step=DEFAULT_PHASE_STEP):
    """:func:`default_guess` for many durations from a single backward run.

    Durations where the backward run escaped fall back to the fixed-end value.
    """
    z1 = _modes(z1, model.n_modes, "z1")
    z2_conj = _modes(z2_conj, model.n_modes, "z2_conj")
    fallback = z2_conj if xi == 1 else z1
    pts = flow_samples(model, PhasePoint(z1, z2_conj), -np.asarray(times, dtype=float), phase_step)
    out = []
    for T, p in zip(times, pts):
        if p is None or T == 0:
            out.append(fallback.copy())
        else:
            out.append((p.v if xi == 1 else p.u).copy())
    return out


class _GuessFailed(Exception):
    def __init__(self, reason, residual, focal=False):
        super().__init__(reason)
        self.reason = reason
        self.residual = residual
        self.focal = focal


def _newton(problem, guess, tol, max_iter, evolve_kw):
    n = problem.model.n_modes
    target = problem.target

    def run(free):
        rec = evolve(problem.model, problem.start(free), problem.T, problem.xi, **evolve_kw)
        end = rec.v[-1] if problem.xi == 1 else rec.u[-1]
        r = end - target
        return rec, r, float(np.linalg.norm(r))

    free = np.array(guess)
    try:
        rec, r, res = run(free)
    except TrajectoryEscapeError as exc:
        raise _GuessFailed(f"escape: {exc}", math.inf) from None
    it = 1
    while res > tol:
        if it >= max_iter:
            raise _GuessFailed("maximum iterations reached", res)
        M = rec.tangents[-1]
        J = M[n:, n:] if problem.xi == 1 else M[:n, :n]
        if abs(np.linalg.det(J)) < FOCAL_DET:
            raise _GuessFailed("singular Jacobian (focal point)", res, focal=True)
        delta = np.linalg.solve(J, r)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = free - lam * delta
            try:
                trec, tr, tres = run(trial)
            except TrajectoryEscapeError as exc:
                raise _GuessFailed(f"escape: {exc}", res) from None
            if tres < res:
                break
            lam *= 0.5
        else:
            raise _GuessFailed("residual stalled", res)
        free, rec, r, res = trial, trec, tr, tres
        it += 1
    return BvpSolution(rec, res, it, np.array(guess), problem)


def continuation_guess(problem, stages, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, evolve_kw=None):
    """Free-end guess from a ladder of shorter problems ``T k / stages``.

    The ladder starts from the exact ``T = 0`` free end and seeds each rung
    with the previous solution. Raises ``_GuessFailed`` if a rung fails.
    """
    evolve_kw = dict(evolve_kw or {})
    steps = evolve_kw.get("steps")
    free = (problem.z2_conj if problem.xi == 1 else problem.z1).copy()
    for k in range(1, stages):
        rung = BvpProblem(problem.model, problem.z1, problem.z2_conj, problem.T * k / stages, problem.xi)
        if steps is not None:
            evolve_kw["steps"] = max(1, math.ceil(steps * k / stages))
        free = _newton(rung, free, tol, max_iter, evolve_kw).free_end
    return free


def _guess_key(g):
    return tuple(x for z in g for x in (z.real, z.imag))


def solve(problem, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, *, include_default=True, **evolve_kw):
    """Find trajectories meeting the boundary data.

    Every guess in ``problem.initial_guesses`` plus :func:`default_guess` is
    iterated independently. If none converges, :func:`continuation_guess`
    is tried with 4, then 16 rungs (only when ``include_default``).
    Converged solutions closer than ``1e-8`` in the free end are merged. The
    result is sorted by residual, then by guess.

    Parameters
    ----------
    problem : BvpProblem
    tol : float
        Required ``|v(T) - z2*|`` (or ``|u(T) - z1|`` for ``xi = -1``).
    max_iter : int
        Trajectory evaluations allowed per guess.
    **evolve_kw
        Passed to :func:`~csentangle.dynamics.evolve`. Unless ``steps`` is
        given, one step count is fixed for the whole problem.

    Raises
    ------
    FocalPointError
        Every guess stopped at a singular Jacobian.
    ShootingError
        No guess converged for any other reason.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if "steps" not in evolve_kw:
        evolve_kw["steps"] = problem.default_steps(evolve_kw.get("phase_step", DEFAULT_PHASE_STEP))
    guesses = list(problem.initial_guesses)
    if include_default:
        guesses.append(default_guess(problem, steps=evolve_kw.get("steps")))
    if not guesses:
        raise ValueError("at least one guess is required")
    found, failures = [], []
    for g in guesses:
        try:
            found.append(_newton(problem, g, tol, max_iter, evolve_kw))
        except _GuessFailed as exc:
            failures.append((g, exc))
    if not found and include_default and problem.T > 0:
        # last resort: walk out from T = 0 where the free end is known
        for stages in CONTINUATION_STAGES:
            try:
                g = continuation_guess(problem, stages, tol, max_iter, evolve_kw)
                found.append(_newton(problem, g, tol, max_iter, evolve_kw))
                break
            except _GuessFailed as exc:
                failures.append((problem.z2_conj if problem.xi == 1 else problem.z1, exc))
    if not found:
        best = min(f.residual for _, f in failures)
        text = "; ".join(f"guess {np.round(g, 6)}: {f.reason}" for g, f in failures)
        if all(f.focal for _, f in failures):
            raise FocalPointError(f"no solution, focal point for every guess ({text})")
        raise ShootingError(f"no guess converged (best residual {best:.3e}; {text})", best, failures)
    found.sort(key=lambda s: (s.residual, _guess_key(s.guess_used)))
    unique = []
    for sol in found:
        if all(np.max(np.abs(sol.free_end - u.free_end)) >= DEDUPE_DISTANCE for u in unique):
            unique.append(sol)
    return unique


@dataclass(frozen=True)
class IdentityReport:
    """Finite-difference checks of the boundary-data derivatives of ``S``.

    ``(i/hbar) dS/dz2*`` must equal ``u`` at the end where ``v`` is fixed and
    ``(i/hbar) dS/dz1`` must equal ``v`` at the end where ``u`` is fixed.
    """

    d_dz2c: np.ndarray
    expected_dz2c: np.ndarray
    d_dz1: np.ndarray
    expected_dz1: np.ndarray

    @property
    def residual(self):
        pairs = [(self.d_dz2c, self.expected_dz2c), (self.d_dz1, self.expected_dz1)]
        return max(float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) for a, b in pairs)


def _resolved_action(solution, z1, z2c, tol=1e-13):
    p = solution.problem
    prob = BvpProblem(p.model, z1, z2c, p.T, p.xi, initial_guesses=(solution.free_end,))
    sols = solve(prob, tol=tol, include_default=False, steps=solution.trajectory.step_count)
    return sols[0].trajectory.action_S


def action_derivative_identities(solution, step=1e-6):
    """Check the four action-derivative identities by re-solving perturbed problems."""
    p = solution.problem
    traj = solution.trajectory
    n = traj.n_modes
    fac = 1j / p.model.hbar
    d2, d1 = np.empty(n, complex), np.empty(n, complex)
    for r in range(n):
        e = np.zeros(n)
        e[r] = step
        d2[r] = fac * (_resolved_action(solution, p.z1, p.z2_conj + e) - _resolved_action(solution, p.z1, p.z2_conj - e)) / (2 * step)
        d1[r] = fac * (_resolved_action(solution, p.z1 + e, p.z2_conj) - _resolved_action(solution, p.z1 - e, p.z2_conj)) / (2 * step)
    if p.xi == 1:
        exp2, exp1 = traj.u[-1], traj.v[0]
    else:
        exp2, exp1 = traj.u[0], traj.v[-1]
    return IdentityReport(d2, exp2.copy(), d1, exp1.copy())


def mixed_action_hessian(solution, step=1e-3):
    """``X[r, s] = (i/hbar) d2S / dz2*_r dz1_s`` by a four-point difference."""
    p = solution.problem
    n = solution.trajectory.n_modes
    X = np.empty((n, n), complex)
    for r in range(n):
        for s in range(n):
            a = np.zeros(n)
            b = np.zeros(n)
            a[r] = step
            b[s] = step
            S = lambda sa, sb: _resolved_action(solution, p.z1 + sb * b, p.z2_conj + sa * a)
            X[r, s] = (S(1, 1) - S(1, -1) - S(-1, 1) + S(-1, -1)) / (4 * step * step)
    return 1j / p.model.hbar * X


def prefactor_consistency(solution, step=1e-3):
    """Relative gap between ``det X`` and ``1 / det(Jacobian block)``."""
    X = mixed_action_hessian(solution, step)
    want = 1.0 / np.linalg.det(solution.jacobian)
    return float(abs(np.linalg.det(X) - want) / abs(want))
