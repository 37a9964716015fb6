"""Exact reference: truncated Fock-space states for number-diagonal Hamiltonians."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .errors import CutoffError, ModeMismatchError

TAIL = 1e-12
CUTOFF_MARGIN = 5


def tail_probability(mean, N_cut):
    """Poisson weight beyond ``N_cut`` for a coherent state with ``|z|^2 = mean``."""
    return float(poisson.sf(N_cut, mean)) if mean > 0 else 0.0


def default_cutoff(*z):
    """Smallest ``N`` with tail below ``1e-12`` for every amplitude, plus 5."""
    mean = max(abs(complex(v)) ** 2 for v in z)
    N = 0
    while tail_probability(mean, N) >= TAIL:
        N += 1
    return N + CUTOFF_MARGIN


def _check_cutoff(z, N_cut):
    tail = tail_probability(abs(z) ** 2, N_cut)
    if tail >= TAIL:
        raise CutoffError(f"N_cut={N_cut} leaves probability {tail:.2e} for |z|={abs(z):.4g}")


@dataclass(frozen=True)
class FockState:
    """Amplitudes over occupation numbers, shape ``(N+1,)`` or ``(N+1, N+1)``."""

    amplitudes: np.ndarray
    N_cut: int

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.complex128)
        if a.ndim not in (1, 2) or any(s != self.N_cut + 1 for s in a.shape):
            raise ValueError("amplitude array does not match N_cut")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_modes(self):
        return self.amplitudes.ndim

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


@dataclass(frozen=True)
class ReducedDensity:
    matrix: np.ndarray

    @property
    def hermitian(self):
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=1e-12))

    def trace(self):
        return complex(np.trace(self.matrix))

    def purity(self):
        return float(np.sum(np.abs(self.matrix) ** 2))


def _coherent_1(z, N_cut):
    z = complex(z)
    _check_cutoff(z, N_cut)
    a = np.empty(N_cut + 1, dtype=np.complex128)
    a[0] = math.exp(-0.5 * abs(z) ** 2)
    for n in range(1, N_cut + 1):
        a[n] = a[n - 1] * z / math.sqrt(n)
    return a / np.linalg.norm(a)


def coherent_fock(z, N_cut=None):
    """Coherent state ``|z>`` (one mode) or ``|z_x>|z_y>`` (two modes).

    Raises
    ------
    CutoffError
        If a coherent amplitude keeps more than ``1e-12`` of its probability
        above ``N_cut``.
    """
    zs = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if zs.size not in (1, 2) or zs.ndim != 1:
        raise ModeMismatchError("one or two coherent amplitudes expected")
    if N_cut is None:
        N_cut = default_cutoff(*zs)
    vecs = [_coherent_1(v, N_cut) for v in zs]
    amps = vecs[0] if zs.size == 1 else np.outer(vecs[0], vecs[1])
    return FockState(amps / np.linalg.norm(amps), N_cut)


def kerr_phases(kerr, T, N_cut):
    n = np.arange(N_cut + 1)
    nn, mm = np.meshgrid(n, n, indexing="ij")
    energy = kerr.Omega_x * nn + kerr.Omega_y * mm + kerr.Gamma * nn * mm + kerr.epsilon0 / kerr.hbar
    return np.exp(-1j * energy * T)


def evolve_kerr(state, kerr, T):
    """Exact evolution under the number-diagonal Kerr Hamiltonian."""
    if state.n_modes != 2:
        raise ModeMismatchError("the Kerr pair acts on two modes")
    return FockState(state.amplitudes * kerr_phases(kerr, T, state.N_cut), state.N_cut)


def reduced_density(state):
    """``rho_x = Tr_y |psi><psi|``."""
    if state.n_modes != 2:
        raise ModeMismatchError("partial trace needs a two-mode state")
    psi = state.amplitudes
    return ReducedDensity(psi @ psi.conj().T)


def reduced_purity(state):
    return reduced_density(state).purity()


def kerr_exact_purity_sum(z0x, z0y, Gamma, T, N_cut=None):
    """Closed double sum for the Kerr purity of mode ``x``.

    ``P = sum_{n,m} p_n p_m exp(-4 |z0y|^2 sin^2(Gamma T (n - m) / 2))`` with
    Poisson weights ``p_n`` of mean ``|z0x|^2``.
    """
    mean = abs(complex(z0x)) ** 2
    if N_cut is None:
        N_cut = default_cutoff(z0x)
    _check_cutoff(complex(z0x), N_cut)
    p = poisson.pmf(np.arange(N_cut + 1), mean) if mean > 0 else np.eye(1, N_cut + 1)[0]
    diff = np.subtract.outer(np.arange(N_cut + 1), np.arange(N_cut + 1))
    kern = np.exp(-4 * abs(complex(z0y)) ** 2 * np.sin(0.5 * Gamma * T * diff) ** 2)
    return float(p @ kern @ p)


def short_time_purity(z0, Gamma, T):
    """``1 - 2 |z0x|^2 |z0y|^2 Gamma^2 T^2``."""
    z = np.atleast_1d(np.asarray(z0, dtype=np.complex128))
    if z.shape != (2,):
        raise ModeMismatchError("two amplitudes expected")
    return 1.0 - 2.0 * abs(z[0]) ** 2 * abs(z[1]) ** 2 * (Gamma * T) ** 2


def kerr_amplitude(kerr, z1, z2, T, N_cut=None):
    """Exact ``<z2| exp(-i H T / hbar) |z1>`` for the Kerr pair."""
    z1 = np.atleast_1d(np.asarray(z1, dtype=np.complex128))
    z2 = np.atleast_1d(np.asarray(z2, dtype=np.complex128))
    if N_cut is None:
        N_cut = default_cutoff(*z1, *z2)
    a = coherent_fock(z1, N_cut).amplitudes
    b = coherent_fock(z2, N_cut).amplitudes
    return complex(np.sum(np.conj(b) * a * kerr_phases(kerr, T, N_cut)))
