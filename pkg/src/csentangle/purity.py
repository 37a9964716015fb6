"""Semiclassical purity of a two-mode pure state from its real trajectory.

The pipeline works on the tangent matrix ``M`` of the trajectory started at
``u = z0, v = conj(z0)``. With ``a = M_vu M_uu^-1`` and ``b = M_uv M_vv^-1``
(both symmetric) the purity is ``P = I * R^2`` where ``I`` is a
four-dimensional Gaussian integral over the traced mode and
``R^2 = 1 / (det M_uu det M_vv (1 - a_yy b_yy))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .dynamics import DEFAULT_PHASE_STEP, TangentMatrix, evolve
from .errors import FocalPointError, ModeMismatchError, PipelineInconsistencyError
from .hamiltonian import CoherentLabel, PhasePoint
from .propagator import continuous_sqrt
from .shooting import FOCAL_DET

log = logging.getLogger(__name__)

IMAG_SILENT = 1e-9
IMAG_ERROR = 1e-6


@dataclass(frozen=True)
class PurityBreakdown:
    """Every intermediate factor of the purity at one time ``T``."""

    T: float
    a_matrix: np.ndarray
    b_matrix: np.ndarray
    D: complex
    A_a: complex
    A_b: complex
    C_a: complex
    C_b: complex
    C_c: complex
    I_factor: complex
    R_tilde: complex
    det_Muu: complex
    det_Mvv: complex
    P: float
    S_lin: float
    x_parameter: float
    imag_residue: float
    tangent: TangentMatrix


@dataclass(frozen=True)
class DeterminantForm:
    det_A: complex
    det_B: complex
    det_C: complex
    det_D: complex
    det_Ap: complex
    det_Bp: complex
    det_Muu: complex
    det_Mvv: complex
    E: complex
    E_prime: complex
    E_dprime: complex
    P_det: float
    P_det_imag: float


def linear_entropy(P):
    return 1.0 - P


def _z0(z0):
    z = z0.z if isinstance(z0, CoherentLabel) else np.atleast_1d(np.asarray(z0, dtype=np.complex128))
    if z.shape != (2,):
        raise ModeMismatchError("the purity needs a two-mode initial state")
    if not np.all(np.isfinite(z)):
        raise ValueError("z0 must be finite")
    return z


def kerr_x(z0, Gamma, T):
    """``x = |z0x|^2 |z0y|^2 Gamma^2 T^2``."""
    z = _z0(z0)
    return float(abs(z[0]) ** 2 * abs(z[1]) ** 2 * (Gamma * T) ** 2)


def kerr_closed_form(z0, Gamma, T):
    """Closed-form Kerr purities.

    Returns
    -------
    x : float
    printed : float
        ``(1 + x) / sqrt(1 + 6x + x^2 (3 + 2x)^2)``, the published closed form.
    pipeline : float
        ``1 / sqrt(1 + 4x)``, the symbolic reduction of :func:`purity_semiclassical`
        on the Kerr tangent blocks.
    """
    x = kerr_x(z0, Gamma, T)
    printed = (1 + x) / math.sqrt(1 + 6 * x + x * x * (3 + 2 * x) ** 2)
    pipeline = 1 / math.sqrt(1 + 4 * x)
    return x, printed, pipeline


def kerr_block_determinants(kerr, z0, T):
    """Closed-form block determinants of the Kerr tangent from ``(z0, z0*)``.

    With ``a = i Gamma T`` and rates ``l_x = i (Omega_x + Gamma |z0y|^2)``,
    ``l_y = i (Omega_y + Gamma |z0x|^2)``. Keys follow the field names of
    :class:`DeterminantForm`.
    """
    z = _z0(z0)
    zx, zy = z
    G = kerr.Gamma
    a = 1j * G * T
    lx = 1j * (kerr.Omega_x + G * abs(zy) ** 2)
    ly = 1j * (kerr.Omega_y + G * abs(zx) ** 2)
    nx, ny = abs(zx) ** 2, abs(zy) ** 2
    core = 1 - a * a * nx * ny
    return {
        "det_Muu": complex(np.exp(-(lx + ly) * T) * core),
        "det_Mvv": complex(np.exp((lx + ly) * T) * core),
        "det_A": complex(a * a * nx * np.conj(zy) ** 2 * np.exp(-(lx - ly) * T)),
        "det_B": complex(a * a * nx * zy**2 * np.exp((lx - ly) * T)),
        "det_C": complex(a * a * np.conj(zx) ** 2 * ny * np.exp((lx - ly) * T)),
        "det_D": complex(a * a * zx**2 * ny * np.exp(-(lx - ly) * T)),
        "det_Ap": complex(a * np.conj(zx) * np.conj(zy)),
        "det_Bp": complex(-a * zx * zy),
    }


def _factors(M):
    """Pipeline factors for a stack of 4x4 tangents (shape (K, 4, 4))."""
    Muu, Muv, Mvu, Mvv = M[:, :2, :2], M[:, :2, 2:], M[:, 2:, :2], M[:, 2:, 2:]
    det_uu = np.linalg.det(Muu)
    det_vv = np.linalg.det(Mvv)
    bad = np.flatnonzero((np.abs(det_uu) < FOCAL_DET) | (np.abs(det_vv) < FOCAL_DET))
    if bad.size:
        raise FocalPointError(f"singular M_uu or M_vv block at node {bad[0]}")
    a = Mvu @ np.linalg.inv(Muu)
    b = Muv @ np.linalg.inv(Mvv)
    ayy, byy = a[:, 1, 1], b[:, 1, 1]
    axy, bxy = a[:, 0, 1], b[:, 0, 1]
    one_minus = 1.0 - ayy * byy
    D = 1.0 / one_minus
    f = dict(a=a, b=b, det_uu=det_uu, det_vv=det_vv, one_minus=one_minus, D=D)
    f["A_a"], f["A_b"] = a[:, 0, 0], b[:, 0, 0]
    f["C_a"] = axy**2 * byy * D
    f["C_b"] = bxy**2 * ayy * D
    f["C_c"] = axy * bxy * D
    p = f["A_a"] + f["C_a"]
    q = f["A_b"] + f["C_b"]
    c2 = f["C_c"] ** 2
    f["radicand"] = (1 - p * q) ** 2 - 2 * c2 * (1 + p * q) + c2 * c2
    return f


def _breakdowns(traj, nodes, x_of_T):
    """Pipeline along ``traj``, reported at the node indices ``nodes``."""
    f = _factors(traj.tangents)
    I_all = 1.0 / continuous_sqrt(f["radicand"])[0]
    R_all = 1.0 / (
        continuous_sqrt(f["det_uu"])[0] * continuous_sqrt(f["det_vv"])[0] * continuous_sqrt(f["one_minus"])[0]
    )
    out = []
    for k in nodes:
        T = float(traj.t[k])
        Pc = I_all[k] * R_all[k] ** 2
        imag = float(Pc.imag)
        if abs(imag) > IMAG_ERROR:
            raise PipelineInconsistencyError(f"purity has imaginary part {imag:.3e} at T={T:.6g}")
        if abs(imag) > IMAG_SILENT:
            log.warning("purity imaginary residue %.3e at T=%.6g", imag, T)
        P = float(Pc.real)
        out.append(
            PurityBreakdown(
                T=T,
                a_matrix=f["a"][k].copy(),
                b_matrix=f["b"][k].copy(),
                D=complex(f["D"][k]),
                A_a=complex(f["A_a"][k]),
                A_b=complex(f["A_b"][k]),
                C_a=complex(f["C_a"][k]),
                C_b=complex(f["C_b"][k]),
                C_c=complex(f["C_c"][k]),
                I_factor=complex(I_all[k]),
                R_tilde=complex(R_all[k]),
                det_Muu=complex(f["det_uu"][k]),
                det_Mvv=complex(f["det_vv"][k]),
                P=P,
                S_lin=linear_entropy(P),
                x_parameter=x_of_T(T),
                imag_residue=imag,
                tangent=TangentMatrix(traj.tangents[k]),
            )
        )
    return out


def _check_model(model):
    if model.n_modes != 2:
        raise ModeMismatchError("the purity needs a two-mode model")
    if not model.is_hermitian():
        raise ValueError("the purity needs a Hamiltonian that is real on real phase space")


def purity_curve(model, z0, times, kerr=None, phase_step=DEFAULT_PHASE_STEP, **evolve_kw):
    """Purity at every time in ``times`` from a single trajectory.

    The requested times are made integration nodes, so each value equals
    what :func:`purity_semiclassical` returns for that time on the same grid.
    """
    _check_model(model)
    z = _z0(z0)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(times < 0):
        raise ValueError("times must be a non-empty list of non-negative values")
    T = float(times.max())
    start = PhasePoint.real(z)
    if T == 0:
        traj = evolve(model, start, 0.0)
        nodes = np.zeros(times.size, dtype=int)
    else:
        # fixed steps from the total span keep the density independent of the checkpoints
        traj = evolve(model, start, T, phase_step=phase_step, checkpoints=times, **evolve_kw)
        nodes = np.searchsorted(traj.t, times)
        nodes = np.clip(nodes, 0, traj.t.size - 1)
        if not np.allclose(traj.t[nodes], times, rtol=0, atol=1e-12 * max(T, 1.0)):
            raise RuntimeError("requested times are missing from the integration grid")
    x_of_T = (lambda t: kerr_x(z, kerr.Gamma, t)) if kerr is not None else (lambda t: math.nan)
    return _breakdowns(traj, nodes, x_of_T)


def purity_semiclassical(model, z0, T, kerr=None, phase_step=DEFAULT_PHASE_STEP, **evolve_kw):
    """Semiclassical purity of mode ``x`` after time ``T``.

    Parameters
    ----------
    model : HamiltonianModel
        Two-mode and hermitian.
    z0 : CoherentLabel or array_like
        Initial product coherent state ``(z0x, z0y)``.
    T : float
    kerr : KerrPairModel, optional
        Only used to fill ``x_parameter``.

    Returns
    -------
    PurityBreakdown

    Raises
    ------
    FocalPointError
        ``M_uu`` or ``M_vv`` singular somewhere on ``[0, T]``.
    PipelineInconsistencyError
        ``|Im P| > 1e-6``.
    """
    _check_model(model)
    z = _z0(z0)
    if not (T >= 0 and math.isfinite(T)):
        raise ValueError("T must be finite and non-negative")
    traj = evolve(model, PhasePoint.real(z), float(T), phase_step=phase_step, **evolve_kw)
    x_of_T = (lambda t: kerr_x(z, kerr.Gamma, t)) if kerr is not None else (lambda t: math.nan)
    return _breakdowns(traj, [traj.t.size - 1], x_of_T)[0]


_PERM_ABCD = [0, 3, 2, 1]
_PERM_PRIME = [0, 2, 1, 3]


def purity_determinant_form(tangent):
    """Purity from block determinants of row-permuted tangent matrices.

    ``[[A, D], [C, B]]`` is ``M`` with rows reordered ``(1, 4, 3, 2)`` and
    ``[[A', D'], [C', B']]`` with rows ``(1, 3, 2, 4)``. Reported for
    comparison only; the authoritative value is :func:`purity_semiclassical`.
    """
    M = tangent.matrix if isinstance(tangent, TangentMatrix) else np.asarray(tangent, dtype=np.complex128)
    if M.shape != (4, 4):
        raise ModeMismatchError("the determinant form needs a two-mode tangent")
    P1 = M[_PERM_ABCD]
    P2 = M[_PERM_PRIME]
    det = lambda blk: complex(np.linalg.det(blk))
    dA, dD, dC, dB = det(P1[:2, :2]), det(P1[:2, 2:]), det(P1[2:, :2]), det(P1[2:, 2:])
    dAp, dBp = det(P2[:2, :2]), det(P2[2:, 2:])
    duu, dvv = det(M[:2, :2]), det(M[2:, 2:])
    dd = duu * dvv
    if abs(duu) < FOCAL_DET or abs(dvv) < FOCAL_DET:
        raise FocalPointError("singular M_uu or M_vv block")
    Ep = -4 * (dd * dAp * dBp) ** 2
    Edp = dAp**2 * dB * dD - (dAp * dBp) ** 2 + dBp**2 * dA * dC
    # the printed bracket adds and removes E'' again; kept verbatim
    E = Ep + (Edp + (dd - dA * dB) * (dd - dC * dD) - Edp) ** 2
    P = dd / np.sqrt(complex(E))
    return DeterminantForm(dA, dB, dC, dD, dAp, dBp, duu, dvv, complex(E), complex(Ep), complex(Edp), float(P.real), float(P.imag))


# ---------------------------------------------------------------- quadrature

_C1 = np.array([[1, 1j], [1, -1j]])


@dataclass(frozen=True)
class SaddleCheck:
    """Closed forms of the two Gaussian factors against tensor Gauss-Hermite sums."""

    I_closed: complex
    I_quadrature: complex
    cal_I_closed: complex
    cal_I_quadrature: complex

    @property
    def residual_I(self):
        return abs(self.I_quadrature - self.I_closed) / abs(self.I_closed)

    @property
    def residual_cal_I(self):
        return abs(self.cal_I_quadrature - self.cal_I_closed) / abs(self.cal_I_closed)

    @property
    def residuals(self):
        return self.residual_I, self.residual_cal_I


def _real_form(A):
    """``Q`` with ``exp(zeta^T A zeta / 2) = exp(-r^T Q r)`` for ``zeta = (w, w*, ...)``."""
    k = A.shape[0] // 2
    C = np.kron(np.eye(k), _C1)
    return -0.5 * C.T @ A @ C


def _gauss_integral(A, n_quad):
    """``int exp(zeta^T A zeta / 2) prod dz* dz / (2 pi i)`` two ways."""
    Q = _real_form(A)
    if np.min(np.linalg.eigvalsh(0.5 * (Q.real + Q.real.T))) <= 0:
        raise ValueError("non-convergent Gaussian: real part of the quadratic form is not positive definite")
    closed = complex(1.0 / np.sqrt(complex(np.linalg.det(Q))))
    x, w = hermgauss(n_quad)
    E = Q - np.eye(Q.shape[0])
    d = Q.shape[0]
    # sum over all axes but the first in one array, loop over the first
    rest = np.meshgrid(*([x] * (d - 1)), indexing="ij")
    wrest = np.ones([n_quad] * (d - 1))
    for ax in range(d - 1):
        shape = [1] * (d - 1)
        shape[ax] = n_quad
        wrest = wrest * w.reshape(shape)
    quad_rest = np.zeros([n_quad] * (d - 1), dtype=complex)
    for i in range(1, d):
        for j in range(1, d):
            quad_rest += E[i, j] * rest[i - 1] * rest[j - 1]
    lin = sum(2 * E[0, j] * rest[j - 1] for j in range(1, d))
    total = 0j
    for xi, wi in zip(x, w):
        expo = -(E[0, 0] * xi * xi + lin * xi + quad_rest)
        total += wi * np.sum(wrest * np.exp(expo))
    return closed, complex(total / math.pi ** (d / 2))


def saddle_matrices(tangent):
    """Complex-symmetric matrices behind the two Gaussian factors."""
    M = tangent.matrix if isinstance(tangent, TangentMatrix) else np.asarray(tangent, dtype=np.complex128)
    f = _factors(M[None])
    alpha, beta = f["a"][0, 1, 1], f["b"][0, 1, 1]
    p = f["A_a"][0] + f["C_a"][0]
    q = f["A_b"][0] + f["C_b"][0]
    c = f["C_c"][0]
    A2 = np.array([[alpha, -1], [-1, beta]])
    A4 = np.array([[p, -1, 0, c], [-1, q, c, 0], [0, c, p, -1], [c, 0, -1, q]])
    return A2, A4, f


def gaussian_saddle_check(tangent, n_quad=64):
    """Compare ``I = (1 - a_yy b_yy)^(-1/2)`` and the four-dimensional factor
    with tensor-product Gauss-Hermite quadrature.

    Raises ``ValueError`` when a quadratic form does not converge.
    """
    A2, A4, f = saddle_matrices(tangent)
    I_closed, I_quad = _gauss_integral(A2, n_quad)
    J_closed, J_quad = _gauss_integral(A4, n_quad)
    # the closed forms written through the pipeline factors
    I_pipe = complex(1.0 / np.sqrt(f["one_minus"][0]))
    J_pipe = complex(1.0 / np.sqrt(f["radicand"][0]))
    if abs(I_pipe - I_closed) > 1e-10 * abs(I_closed) or abs(J_pipe - J_closed) > 1e-10 * abs(J_closed):
        raise ValueError("Gaussian factors fall on a non-principal branch; compare the quadratic forms directly")
    return SaddleCheck(I_pipe, I_quad, J_pipe, J_quad)
