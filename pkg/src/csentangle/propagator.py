"""Semiclassical coherent-state propagator from boundary-value trajectories.

``K_xi(z2*, z1, T) = N * sum_traj det(B)^(-1/2) exp((i/hbar)(S_xi + G_xi))``
with ``B = M_vv`` for ``xi = +1`` and ``B = M_uu`` for ``xi = -1`` and
``N = exp(-|z1|^2/2 - |z2|^2/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import DEFAULT_PHASE_STEP, evolve
from .errors import FocalPointError, ModeMismatchError
from .shooting import DEFAULT_MAX_ITER, DEFAULT_TOL, FOCAL_DET, BvpProblem, solve

MAX_JUMP = math.pi / 2
_REFINEMENTS = 4


def continuous_sqrt(values, full=True):
    """Square root of a sampled curve, continued from the principal root at the first sample.

    Returns
    -------
    roots : ndarray
        Root at every sample, or only the last one when ``full`` is false.
    branch_index : int
        Net ``2 pi`` windings of the radicand's phase; an odd count means the
        last root is minus the principal one.
    max_jump : float
        Largest phase change of the root between consecutive samples.
    """
    w = np.ascontiguousarray(values, dtype=np.complex128)
    phase = _kernels.continuous_phase(w)
    phase -= 2 * np.pi * np.round(phase[0] / (2 * np.pi))
    if full:
        roots = np.sqrt(np.abs(w)) * np.exp(0.5j * phase)
    else:
        roots = np.array([np.sqrt(abs(w[-1])) * np.exp(0.5j * phase[-1])])
    max_jump = float(np.max(np.abs(np.diff(phase)))) / 2 if w.size > 1 else 0.0
    winding = int(round((phase[-1] - np.angle(w[-1])) / (2 * np.pi)))
    return roots, winding, max_jump


def block_dets(tangents, xi):
    """``det M_vv`` (``xi = +1``) or ``det M_uu`` (``xi = -1``) at every node."""
    n = tangents.shape[1] // 2
    blk = tangents[:, n:, n:] if xi == 1 else tangents[:, :n, :n]
    if n == 1:
        return blk[:, 0, 0].copy()
    return np.linalg.det(blk)


@dataclass(frozen=True)
class PropagatorValue:
    amplitude: complex
    contributions: tuple
    branch_index: tuple
    residuals: tuple
    prefactors: tuple
    max_phase_jump: float


def _normalization(label1, label2):
    return math.exp(-0.5 * float(np.sum(np.abs(label1.z) ** 2)) - 0.5 * float(np.sum(np.abs(label2.z) ** 2)))


def _prefactor(model, traj, phase_step):
    """Continuous inverse square root of the block determinant.

    If the determinant turns too quickly between nodes the trajectory is
    re-integrated on a finer grid from the same start.
    """
    for _ in range(_REFINEMENTS + 1):
        dets = block_dets(traj.tangents, traj.xi)
        if abs(dets[-1]) < FOCAL_DET:
            raise FocalPointError(f"prefactor determinant {abs(dets[-1]):.3e} below {FOCAL_DET}")
        roots, branch, jump = continuous_sqrt(dets, full=False)
        if jump < MAX_JUMP:
            return 1.0 / roots[-1], branch, jump
        traj = evolve(model, traj.start, traj.T, traj.xi, steps=2 * traj.step_count)
    raise FocalPointError("prefactor phase could not be followed continuously")


def propagate(
    model,
    label1,
    label2,
    T,
    xi=1,
    guesses=(),
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    phase_step=DEFAULT_PHASE_STEP,
    include_default=True,
):
    """Semiclassical ``<z2| exp(-i H T / hbar) |z1>`` (``xi = +1``) or its mirror (``xi = -1``).

    Parameters
    ----------
    model : HamiltonianModel
    label1, label2 : CoherentLabel
        Initial and final coherent states; they must share ``hbar`` and widths.
    T : float
    xi : {+1, -1}
    guesses : sequence
        Extra free-end guesses for the shooting step.
    include_default : bool
        Also iterate the backward-run guess (needed unless ``guesses``
        already holds it).

    Returns
    -------
    PropagatorValue
    """
    if not label1.same_basis(label2):
        raise ValueError("both coherent labels must share hbar and widths")
    if label1.n_modes != model.n_modes:
        raise ModeMismatchError("labels and model have different mode counts")
    if not math.isclose(label1.hbar, model.hbar, rel_tol=1e-12):
        raise ValueError("labels and model use different hbar")
    problem = BvpProblem(model, label1.z, np.conj(label2.z), T, xi, tuple(guesses))
    sols = solve(problem, tol, max_iter, include_default=include_default, phase_step=phase_step)
    norm = _normalization(label1, label2)
    terms, branches, residuals, prefs = [], [], [], []
    worst = 0.0
    for sol in sols:
        traj = sol.trajectory
        pref, branch, jump = _prefactor(model, traj, phase_step)
        worst = max(worst, jump)
        terms.append(complex(norm * pref * np.exp(1j / model.hbar * (traj.action_S + traj.correction_G))))
        branches.append(branch)
        residuals.append(sol.residual)
        prefs.append(complex(pref))
    return PropagatorValue(complex(sum(terms)), tuple(terms), tuple(branches), tuple(residuals), tuple(prefs), worst)


def exact_ho_propagator(omega, label1, label2, T, xi=1):
    """Closed-form harmonic-oscillator propagator between one-mode coherent states."""
    if label1.n_modes != 1 or label2.n_modes != 1:
        raise ModeMismatchError("the closed form is for one mode")
    z1 = complex(label1.z[0])
    z2c = complex(np.conj(label2.z[0]))
    ph = np.exp(-1j * omega * xi * T)
    return complex(np.exp(-0.5j * omega * xi * T - 0.5 * abs(z1) ** 2 - 0.5 * abs(z2c) ** 2 + z1 * z2c * ph))


def conjugation_check(model, label1, label2, T, **kw):
    """``|K_-(z2, z1, T) - conj(K_+(z1, z2, T))|`` computed semiclassically."""
    minus = propagate(model, label1, label2, T, xi=-1, **kw).amplitude
    plus = propagate(model, label2, label1, T, xi=1, **kw).amplitude
    return abs(minus - np.conj(plus))


def branch_scan(model, label1, label2, times, xi=1, max_depth=8, **kw):
    """Follow the leading prefactor along a time grid, bisecting coarse steps.

    Any step whose prefactor phase turns by ``pi/2`` or more is halved, up to
    ``max_depth`` times.

    Returns
    -------
    times : ndarray
        The refined grid.
    prefactors : ndarray
    max_jump : float
        Largest phase change between consecutive refined samples.
    """
    cache = {}

    def pref(T):
        if T not in cache:
            cache[T] = propagate(model, label1, label2, T, xi, **kw).prefactors[0]
        return cache[T]

    def turn(a, b):
        return abs(np.angle(pref(b) / pref(a)))

    grid = [float(t) for t in times]
    for _ in range(max_depth):
        refined = [grid[0]]
        split = False
        for a, b in zip(grid[:-1], grid[1:]):
            if turn(a, b) >= MAX_JUMP:
                refined.append(0.5 * (a + b))
                split = True
            refined.append(b)
        grid = refined
        if not split:
            break
    values = np.array([pref(t) for t in grid])
    jumps = [turn(a, b) for a, b in zip(grid[:-1], grid[1:])]
    return np.array(grid), values, max(jumps, default=0.0)
