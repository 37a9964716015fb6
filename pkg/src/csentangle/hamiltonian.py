"""Classical Hamiltonians H(v, u) in the complexified coherent-state variables.

A Hamiltonian is stored as a list of normal-ordered monomials
``coeff * prod_r v_r**m_r * u_r**n_r``; values and all first and second
derivatives are exact (no numerical differentiation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ModeMismatchError

DEFAULT_MAX_DEGREE = 8


def _as_modes(values, name="value"):
    arr = np.atleast_1d(np.asarray(values, dtype=np.complex128)).copy()
    if arr.ndim != 1 or arr.size not in (1, 2):
        raise ModeMismatchError(f"{name} must have 1 or 2 modes, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(u, v)`` of the complexified phase space.

    Real phase space corresponds to ``v == conj(u)``.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = _as_modes(self.u, "u")
        v = _as_modes(self.v, "v")
        if u.shape != v.shape:
            raise ModeMismatchError(f"u has {u.size} modes but v has {v.size}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("phase point components must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def real(cls, z):
        """The real point ``u = z, v = conj(z)``."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        return cls(z, np.conj(z))

    @property
    def n_modes(self):
        return self.u.size

    def as_vector(self):
        return np.concatenate([self.u, self.v])

    def is_real(self, atol=1e-12):
        return bool(np.all(np.abs(self.v - np.conj(self.u)) <= atol))


@dataclass(frozen=True)
class CoherentLabel:
    """Coherent-state label: amplitude ``z`` plus position/momentum widths.

    ``b * c == hbar`` must hold for every mode. With the default widths
    ``b = c = sqrt(hbar)`` (unit mass and frequency).
    """

    z: np.ndarray
    b: np.ndarray | None = None
    c: np.ndarray | None = None
    hbar: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        z = _as_modes(self.z, "z")
        n = z.size
        root = math.sqrt(self.hbar)
        b = np.full(n, root) if self.b is None else np.broadcast_to(np.asarray(self.b, float), (n,)).copy()
        c = self.hbar / b if self.c is None else np.broadcast_to(np.asarray(self.c, float), (n,)).copy()
        if np.any(b <= 0) or np.any(c <= 0):
            raise ValueError("coherent-state widths must be positive")
        if np.any(np.abs(b * c - self.hbar) > 1e-12 * self.hbar):
            raise ValueError("widths must satisfy b*c == hbar for every mode")
        for arr in (b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_oscillator(cls, z, mass=1.0, omega=1.0, hbar=1.0):
        """Label whose widths are those of the oscillator ``(mass, omega)``."""
        mass = np.asarray(mass, float)
        omega = np.asarray(omega, float)
        b = np.sqrt(hbar / (mass * omega))
        return cls(z, b=b, c=hbar / b, hbar=hbar)

    @property
    def n_modes(self):
        return self.z.size

    def same_basis(self, other, rtol=1e-12):
        return (
            self.n_modes == other.n_modes
            and math.isclose(self.hbar, other.hbar, rel_tol=rtol)
            and np.allclose(self.b, other.b, rtol=rtol, atol=0)
            and np.allclose(self.c, other.c, rtol=rtol, atol=0)
        )


def phase_to_uv(q, p, label):
    """Map real or complex ``(q, p)`` to ``(u, v)`` with the label's widths."""
    q = np.atleast_1d(np.asarray(q, dtype=np.complex128))
    p = np.atleast_1d(np.asarray(p, dtype=np.complex128))
    if q.shape != label.b.shape or p.shape != label.b.shape:
        raise ModeMismatchError("q, p and the label must have the same number of modes")
    s = 1.0 / math.sqrt(2.0)
    return PhasePoint(s * (q / label.b + 1j * p / label.c), s * (q / label.b - 1j * p / label.c))


def uv_to_phase(point, label):
    """Inverse of :func:`phase_to_uv`; returns ``(q, p)`` as complex arrays."""
    if point.n_modes != label.n_modes:
        raise ModeMismatchError("point and label must have the same number of modes")
    s = 1.0 / math.sqrt(2.0)
    q = s * label.b * (point.u + point.v)
    p = -1j * s * label.c * (point.u - point.v)
    return q, p


@dataclass(frozen=True)
class Monomial:
    """``coeff * prod_r v_r**m_r * u_r**n_r`` with ``powers[r] == (m_r, n_r)``."""

    coeff: complex
    powers: tuple

    def __post_init__(self):
        powers = tuple((int(m), int(n)) for m, n in self.powers)
        if any(m < 0 or n < 0 for m, n in powers):
            raise ValueError("monomial powers must be non-negative")
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "coeff", complex(self.coeff))

    @property
    def degree(self):
        return sum(m + n for m, n in self.powers)

    def partner_powers(self):
        return tuple((n, m) for m, n in self.powers)


@dataclass(frozen=True)
class HamiltonianModel:
    """Normal-ordered polynomial Hamiltonian ``H(v, u)`` for one or two modes."""

    monomials: tuple
    hbar: float = 1.0
    max_degree: int = DEFAULT_MAX_DEGREE
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False)
    _powers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        monos = tuple(m if isinstance(m, Monomial) else Monomial(*m) for m in self.monomials)
        if not monos:
            raise ValueError("a Hamiltonian needs at least one monomial")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        n = len(monos[0].powers)
        if n not in (1, 2):
            raise ModeMismatchError("only one- and two-mode Hamiltonians are supported")
        for mono in monos:
            if len(mono.powers) != n:
                raise ModeMismatchError("all monomials must list powers for every mode")
            if mono.degree > self.max_degree:
                raise ValueError(f"monomial degree {mono.degree} exceeds max_degree={self.max_degree}")
        coeffs = np.array([m.coeff for m in monos], dtype=np.complex128)
        # kernel layout: exponents of (u_0.., v_0..)
        powers = np.array([[p[1] for p in m.powers] + [p[0] for p in m.powers] for m in monos], dtype=np.int64)
        object.__setattr__(self, "monomials", monos)
        object.__setattr__(self, "_coeffs", coeffs)
        object.__setattr__(self, "_powers", powers)

    @property
    def n_modes(self):
        return len(self.monomials[0].powers)

    def _check(self, point):
        if point.n_modes != self.n_modes:
            raise ModeMismatchError(f"model has {self.n_modes} modes, point has {point.n_modes}")

    def _derivs(self, point):
        self._check(point)
        nv = 2 * self.n_modes
        grad = np.empty(nv, dtype=np.complex128)
        hess = np.empty((nv, nv), dtype=np.complex128)
        value = _kernels.derivatives(self._coeffs, self._powers, point.as_vector(), grad, hess)
        return value, grad, hess

    def evaluate(self, point):
        """``H(v, u)`` at ``point``."""
        return self._derivs(point)[0]

    __call__ = evaluate

    def gradient(self, point):
        """Return ``(dH/du, dH/dv)``, one entry per mode."""
        _, grad, _ = self._derivs(point)
        n = self.n_modes
        return grad[:n], grad[n:]

    def hessian(self, point):
        """Return ``(H_uu, H_uv, H_vv)``; ``H_uv[r, s] = d2H/du_r dv_s``."""
        _, _, hess = self._derivs(point)
        n = self.n_modes
        return hess[:n, :n], hess[:n, n:], hess[n:, n:]

    def full_hessian(self, point):
        """Second derivatives over ``(u_0.., v_0..)`` as one ``2n x 2n`` matrix."""
        return self._derivs(point)[2]

    def is_hermitian(self, tol=1e-12):
        """Every monomial has a partner with swapped powers and conjugate coefficient.

        This makes ``H(conj(u), u)`` real for every ``u``.
        """
        table = {}
        for mono in self.monomials:
            table[mono.powers] = table.get(mono.powers, 0j) + mono.coeff
        scale = max(abs(c) for c in table.values()) or 1.0
        for powers, coeff in table.items():
            partner = table.get(tuple((n, m) for m, n in powers), 0j)
            if abs(partner - np.conj(coeff)) > tol * scale:
                return False
        return True

    def linear_rate(self, point):
        """Spectral norm of the linearized flow generator at ``point``.

        Used as the characteristic angular frequency when choosing steps.
        """
        hess = self.full_hessian(point)
        n = self.n_modes
        gen = np.empty_like(hess)
        gen[:n] = -1j * hess[n:]
        gen[n:] = 1j * hess[:n]
        return float(np.linalg.norm(gen, 2)) / self.hbar

    def records(self):
        """Monomials as ``(coeff_re, coeff_im, m_x, n_x, m_y, n_y)`` tuples."""
        out = []
        for mono in self.monomials:
            flat = [p for pair in mono.powers for p in pair]
            if self.n_modes == 1:
                flat += [0, 0]
            out.append((mono.coeff.real, mono.coeff.imag, *flat))
        return out

    @classmethod
    def from_records(cls, records, n_modes=2, hbar=1.0, max_degree=DEFAULT_MAX_DEGREE):
        """Inverse of :meth:`records`. One-mode models ignore the ``y`` powers."""
        monos = []
        for rec in records:
            if len(rec) != 6:
                raise ValueError("each record needs coeff_re, coeff_im, m_x, n_x, m_y, n_y")
            re, im, mx, nx, my, ny = rec
            powers = ((mx, nx),) if n_modes == 1 else ((mx, nx), (my, ny))
            if n_modes == 1 and (int(my) or int(ny)):
                raise ModeMismatchError("one-mode model has nonzero y powers")
            monos.append(Monomial(complex(float(re), float(im)), powers))
        return cls(tuple(monos), hbar=hbar, max_degree=max_degree)


def hermiticity_check(model, tol=1e-12):
    return model.is_hermitian(tol)


@dataclass(frozen=True)
class KerrPairModel:
    """Parameters of two oscillators coupled through ``lam * H_x * H_y``."""

    omega_x: float
    omega_y: float
    lam: float
    hbar: float = 1.0

    @property
    def Gamma(self):
        return self.lam * self.hbar * self.omega_x * self.omega_y

    @property
    def Omega_x(self):
        return self.omega_x + self.Gamma / 2

    @property
    def Omega_y(self):
        return self.omega_y + self.Gamma / 2

    @property
    def epsilon0(self):
        return self.hbar * (self.omega_x + self.omega_y) / 2


def build_harmonic(omega, hbar=1.0):
    """``hbar*omega*(v*u + 1/2)``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    e = hbar * omega
    return HamiltonianModel((Monomial(e, ((1, 1),)), Monomial(e / 2, ((0, 0),))), hbar=hbar)


def build_kerr_pair(omega_x, omega_y, lam, hbar=1.0):
    """Coupled oscillators ``H_x + H_y + lam H_x H_y`` in normal-ordered form.

    Returns the classical model together with its :class:`KerrPairModel`.
    """
    if not (omega_x > 0 and omega_y > 0):
        raise ValueError("frequencies must be positive")
    kerr = KerrPairModel(float(omega_x), float(omega_y), float(lam), float(hbar))
    monos = (
        Monomial(hbar * kerr.Omega_x, ((1, 1), (0, 0))),
        Monomial(hbar * kerr.Omega_y, ((0, 0), (1, 1))),
        Monomial(hbar * kerr.Gamma, ((1, 1), (1, 1))),
        Monomial(kerr.epsilon0, ((0, 0), (0, 0))),
    )
    return HamiltonianModel(monos, hbar=hbar), kerr
