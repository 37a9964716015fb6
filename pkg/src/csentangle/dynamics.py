"""Complexified Hamilton flow with tangent matrix, action and correction term.

All records live on the generalized-time axis ``t_xi`` running from 0 to
``T``. The equations of motion are the same for both ``xi``; the sign only
enters the action and the correction integral. Physical time is
``t = t_xi`` for ``xi = +1`` and ``t = T - t_xi`` for ``xi = -1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import ModeMismatchError, TrajectoryEscapeError
from .hamiltonian import PhasePoint

DEFAULT_PHASE_STEP = 4e-3
ESCAPE_BOUND = 1e6
MAX_STEPS = 10_000_000

_STATUS_TEXT = {
    _kernels.STATUS_ESCAPED: "trajectory escaped the allowed region",
    _kernels.STATUS_NONFINITE: "non-finite value in the flow",
    _kernels.STATUS_MAX_STEPS: "maximum number of steps exceeded",
}


@dataclass(frozen=True)
class TangentMatrix:
    """Linearized flow ``(du(T), dv(T)) = M (du(0), dv(0))``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 4):
            raise ModeMismatchError(f"tangent matrix must be 2x2 or 4x4, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, n_modes):
        return cls(np.eye(2 * n_modes))

    @property
    def n_modes(self):
        return self.matrix.shape[0] // 2

    @property
    def uu(self):
        n = self.n_modes
        return self.matrix[:n, :n]

    @property
    def uv(self):
        n = self.n_modes
        return self.matrix[:n, n:]

    @property
    def vu(self):
        n = self.n_modes
        return self.matrix[n:, :n]

    @property
    def vv(self):
        n = self.n_modes
        return self.matrix[n:, n:]

    def det(self):
        return complex(np.linalg.det(self.matrix))


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """One integrated trajectory on the generalized-time axis.

    Attributes
    ----------
    t : ndarray, shape (N+1,)
        Generalized-time nodes, ``t[0] == 0`` and ``t[-1] == T``.
    u, v : ndarray, shape (N+1, n)
    energies : ndarray, shape (N+1,)
        ``H`` at every node.
    tangents : ndarray, shape (N+1, 2n, 2n) or None
        Tangent matrix at every node (absent when not requested).
    """

    xi: int
    T: float
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    energies: np.ndarray
    tangents: np.ndarray | None
    action_S: complex
    boundary_Lambda: complex
    correction_G: complex
    step_count: int
    hbar: float

    @property
    def n_modes(self):
        return self.u.shape[1]

    @property
    def energy(self):
        return complex(self.energies[0])

    @property
    def start(self):
        return PhasePoint(self.u[0], self.v[0])

    @property
    def end(self):
        return PhasePoint(self.u[-1], self.v[-1])

    @cached_property
    def tangent(self):
        if self.tangents is None:
            raise ValueError("trajectory was integrated without the tangent matrix")
        return TangentMatrix(self.tangents[-1])

    @property
    def samples(self):
        return [(float(t), PhasePoint(u, v)) for t, u, v in zip(self.t, self.u, self.v)]

    def physical_time(self):
        return self.t.copy() if self.xi == 1 else self.T - self.t

    def energy_drift(self):
        """``max |H(t) - H(0)| / (1 + |H(0)|)``."""
        return float(np.max(np.abs(self.energies - self.energies[0])) / (1.0 + abs(self.energies[0])))

    def det_deviation(self):
        """``max |det M(t) - 1|`` over the nodes."""
        return float(np.max(np.abs(np.linalg.det(self.tangents) - 1.0)))

    def reality_deviation(self):
        return float(np.max(np.abs(self.v - np.conj(self.u))))

    def to_csv(self, path):
        """Dump ``t`` and real/imaginary parts of every ``u_r``, ``v_r``."""
        n = self.n_modes
        header = ["t"]
        for name in ("u", "v"):
            for r in range(n):
                header += [f"re_{name}{r}", f"im_{name}{r}"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.t.size):
                row = [self.t[k]]
                for arr in (self.u, self.v):
                    for r in range(n):
                        row += [arr[k, r].real, arr[k, r].imag]
                w.writerow([format_float(x) for x in row])


def format_float(x):
    """17 significant digits, enough for an exact double round trip."""
    return f"{float(x):.16e}"


def _check_start(model, start):
    if start.n_modes != model.n_modes:
        raise ModeMismatchError(f"model has {model.n_modes} modes, start point has {start.n_modes}")


def step_count(model, point, T, phase_step=DEFAULT_PHASE_STEP):
    """Uniform step count so that ``rate * h <= phase_step``."""
    if T == 0:
        return 0
    rate = max(model.linear_rate(point), 1e-300)
    return max(1, math.ceil(rate * abs(T) / phase_step))


def build_grid(T, steps, checkpoints=None):
    """Nodes from 0 to ``T``; optional checkpoints become nodes too.

    Each gap between consecutive checkpoints gets a uniform share of the
    step budget, at least one step.
    """
    if checkpoints is None:
        return np.linspace(0.0, T, steps + 1)
    marks = np.unique(np.concatenate([[0.0], np.asarray(checkpoints, float), [T]]))
    if marks[0] < 0 or marks[-1] > T:
        raise ValueError("checkpoints must lie in [0, T]")
    pieces = [np.zeros(1)]
    for a, b in zip(marks[:-1], marks[1:]):
        k = max(1, math.ceil(steps * (b - a) / T)) if T > 0 else 1
        seg = np.linspace(a, b, k + 1)[1:]
        seg[-1] = b
        pieces.append(seg)
    return np.concatenate(pieces)


def _initial_state(start, tangent):
    n = start.n_modes
    y0 = np.zeros(2 * n + 4 * n * n + 2, dtype=np.complex128)
    y0[:n] = start.u
    y0[n : 2 * n] = start.v
    if tangent:
        y0[2 * n : 2 * n + 4 * n * n] = np.eye(2 * n).ravel()
    return y0


def _raise_status(status, t):
    raise TrajectoryEscapeError(f"{_STATUS_TEXT.get(status, 'integration failed')} at t={t:.6g}", t=t)


def flow(model, start, duration, steps, escape_bound=ESCAPE_BOUND):
    """End point after a signed ``duration`` without tangent or action.

    Negative durations run the equations backward.
    """
    _check_start(model, start)
    grid = np.linspace(0.0, duration, steps + 1)
    ys, _, status, done = _kernels.integrate_grid(
        model._coeffs, model._powers, model.hbar, model.n_modes,
        np.concatenate([start.u, start.v]).astype(np.complex128), grid, escape_bound, False,
    )
    if status != _kernels.STATUS_OK:
        _raise_status(status, grid[done])
    n = model.n_modes
    return PhasePoint(ys[-1, :n], ys[-1, n : 2 * n])



def flow_samples(model, start, durations, phase_step=DEFAULT_PHASE_STEP, escape_bound=ESCAPE_BOUND):
    """Points reached after each signed duration, all from one run.

    ``durations`` must share a sign. Step density follows
    :func:`step_count` for the longest duration, so every sample sees
    about the step size a separate run would use.
    """
    _check_start(model, start)
    d = np.asarray(durations, dtype=float)
    sign = -1.0 if np.any(d < 0) else 1.0
    if np.any(sign * d < 0):
        raise ValueError("durations must share a sign")
    span = float(np.max(np.abs(d))) if d.size else 0.0
    n = model.n_modes
    if span == 0:
        return [start] * d.size
    grid = build_grid(span, step_count(model, start, span, phase_step), np.abs(d))
    ys, _, status, done = _kernels.integrate_grid(
        model._coeffs, model._powers, model.hbar, n,
        np.concatenate([start.u, start.v]).astype(np.complex128), sign * grid, escape_bound, False,
    )
    rows = np.searchsorted(grid, np.abs(d))
    if status != _kernels.STATUS_OK:
        reached = rows <= done
        return [PhasePoint(ys[r, :n], ys[r, n:]) if ok else None for r, ok in zip(rows, reached)]
    return [PhasePoint(ys[r, :n], ys[r, n:]) for r in rows]


def evolve(
    model,
    start,
    T,
    xi=1,
    *,
    steps=None,
    phase_step=DEFAULT_PHASE_STEP,
    tol=None,
    checkpoints=None,
    escape_bound=ESCAPE_BOUND,
    max_steps=MAX_STEPS,
    tangent=True,
):
    """Integrate from ``start`` at ``t_xi = 0`` up to ``t_xi = T``.

    Parameters
    ----------
    model : HamiltonianModel
    start : PhasePoint
        ``(u, v)`` at ``t_xi = 0``. For ``xi = -1`` this is the physical
        final time.
    T : float
        Non-negative duration.
    xi : {+1, -1}
    steps : int, optional
        Fixed RK4 step count. By default chosen from the linearized rate at
        ``start`` so that each step advances the phase by ``phase_step``.
    tol : float, optional
        Switch to step-doubling adaptivity with this local tolerance.
    checkpoints : array_like, optional
        Extra times that must be grid nodes (fixed-step mode only).
    tangent : bool
        Propagate the tangent matrix.

    Returns
    -------
    TrajectoryRecord

    Raises
    ------
    TrajectoryEscapeError
        If ``|u|`` or ``|v|`` exceeds ``escape_bound`` or a value turns non-finite.
    """
    if xi not in (1, -1):
        raise ValueError("xi must be +1 or -1")
    if not (T >= 0 and math.isfinite(T)):
        raise ValueError("T must be finite and non-negative")
    _check_start(model, start)
    n = model.n_modes
    y0 = _initial_state(start, tangent)
    args = (model._coeffs, model._powers, model.hbar, n)
    if tol is not None and T > 0:
        rate = max(model.linear_rate(start), 1e-12)
        ts, ys, es, status = _kernels.integrate_adaptive(
            *args, y0, float(T), float(tol), phase_step / rate, max_steps, escape_bound, tangent
        )
        if status != _kernels.STATUS_OK:
            _raise_status(status, ts[-1])
    else:
        if steps is None:
            steps = step_count(model, start, T, phase_step)
        if T == 0:
            steps = 0
        if steps > max_steps:
            _raise_status(_kernels.STATUS_MAX_STEPS, 0.0)
        ts = build_grid(float(T), int(steps), checkpoints)
        ys, es, status, done = _kernels.integrate_grid(*args, y0, ts, escape_bound, tangent)
        if status != _kernels.STATUS_OK:
            _raise_status(status, ts[done])
    u = ys[:, :n].copy()
    v = ys[:, n : 2 * n].copy()
    tangents = ys[:, 2 * n : 2 * n + 4 * n * n].reshape(-1, 2 * n, 2 * n).copy() if tangent else None
    s_int = ys[-1, -2]
    g_int = ys[-1, -1]
    lam = 0.5j * model.hbar * (np.dot(u[-1], v[-1]) + np.dot(u[0], v[0]))
    return TrajectoryRecord(
        xi=xi,
        T=float(T),
        t=np.asarray(ts, float).copy(),
        u=u,
        v=v,
        energies=es.copy(),
        tangents=tangents,
        action_S=complex(xi * s_int - lam),
        boundary_Lambda=complex(lam),
        correction_G=complex(xi * g_int),
        step_count=len(ts) - 1,
        hbar=model.hbar,
    )


def tangent_vs_finite_difference(model, start, T, xi=1, step=1e-6, **evolve_kw):
    """Compare each tangent column with a central difference of the flow.

    The perturbed runs reuse the unperturbed grid, so the comparison is
    between the discrete map and its exact derivative. The effective step
    is the representable difference ``(x + h) - x``.

    Returns ``max |FD - M| / max(1, max |M|)``.
    """
    base = evolve(model, start, T, xi, **evolve_kw)
    evolve_kw = {k: w for k, w in evolve_kw.items() if k not in ("steps", "tol")}
    M = base.tangents[-1]
    n = model.n_modes
    x0 = start.as_vector()
    err = 0.0
    for j in range(2 * n):
        plus = x0.copy()
        minus = x0.copy()
        plus[j] = complex(x0[j].real + step, x0[j].imag)
        minus[j] = complex(x0[j].real - step, x0[j].imag)
        width = (plus[j].real - x0[j].real) + (x0[j].real - minus[j].real)
        ends = []
        for x in (plus, minus):
            rec = evolve(model, PhasePoint(x[:n], x[n:]), T, xi, steps=base.step_count, tangent=False, **evolve_kw)
            ends.append(np.concatenate([rec.u[-1], rec.v[-1]]))
        col = (ends[0] - ends[1]) / width
        err = max(err, float(np.max(np.abs(col - M[:, j]))))
    return err / max(1.0, float(np.max(np.abs(M))))


def action_time_derivative_check(record, model, delta=1e-5, **evolve_kw):
    """Residual of ``dS/dT = -xi H`` with the boundary data of ``record`` held fixed.

    The boundary-value problem is re-solved at ``T +- delta``; for
    ``T < delta`` a second-order one-sided difference is used. Returns ``|dS/dT + xi H| / max(1, |H|)``.
    """
    from .shooting import BvpProblem, solve

    if record.xi == 1:
        z1, z2c, free = record.u[0], record.v[-1], record.v[0]
    else:
        z1, z2c, free = record.u[-1], record.v[0], record.u[0]

    def action(T):
        prob = BvpProblem(model, z1, z2c, T, record.xi, initial_guesses=(free,))
        return solve(prob, **evolve_kw)[0].trajectory.action_S

    if record.T >= delta:
        dS = (action(record.T + delta) - action(record.T - delta)) / (2 * delta)
    else:
        dS = (-3 * action(record.T) + 4 * action(record.T + delta) - action(record.T + 2 * delta)) / (2 * delta)
    H = record.energy
    return abs(dS + record.xi * H) / max(1.0, abs(H))
