"""Compiled inner loops: monomial derivatives and RK4 propagation.

State vector layout for ``n`` modes::

    [u_0..u_{n-1}, v_0..v_{n-1}, M (2n x 2n, row major), S_int, G_int]

``S_int`` accumulates the action integrand ``(i hbar/2)(u' v - u v') - H``
(which equals ``sum(u dH/du + v dH/dv)/2 - H`` on shell) and ``G_int``
accumulates ``sum_r d2H/du_r dv_r / 2``. Both ride along as extra ODE
components, so RK4 applies Simpson weights to them on the same stage
evaluations that advance the trajectory. A state of length ``2n`` carries
only ``(u, v)``.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_ESCAPED = 1
STATUS_NONFINITE = 2
STATUS_MAX_STEPS = 3


@njit(cache=True, nogil=True, error_model="numpy")
def derivatives(coeffs, powers, x, grad, hess):
    """Value, gradient and Hessian of a monomial Hamiltonian.

    ``x`` holds the variables ``(u_0, .., u_{n-1}, v_0, .., v_{n-1})`` and
    ``powers[k, i]`` the exponent of ``x[i]`` in monomial ``k``.
    ``grad`` and ``hess`` are overwritten.
    """
    nv = x.shape[0]
    work = np.empty((3, nv), dtype=np.complex128)
    return _derivatives(coeffs, powers, x, nv, grad, hess, work)


@njit(cache=True, nogil=True, error_model="numpy", inline="always")
def _derivatives(coeffs, powers, x, nv, grad, hess, work):
    # only x[:nv] is read, so the full state vector may be passed
    for i in range(nv):
        grad[i] = 0j
        for j in range(nv):
            hess[i, j] = 0j
    H = 0j
    for k in range(coeffs.shape[0]):
        c = coeffs[k]
        for i in range(nv):
            pi = powers[k, i]
            xi = x[i]
            if pi == 0:
                work[0, i] = 1.0
                work[1, i] = 0.0
                work[2, i] = 0.0
            elif pi == 1:
                work[0, i] = xi
                work[1, i] = 1.0
                work[2, i] = 0.0
            else:
                q = 1.0 + 0j
                for _ in range(pi - 2):
                    q *= xi
                work[2, i] = pi * (pi - 1) * q
                work[1, i] = pi * q * xi
                work[0, i] = q * xi * xi
        term = c
        for i in range(nv):
            term *= work[0, i]
        H += term
        for i in range(nv):
            if powers[k, i] == 0:
                continue
            rest = c
            for j in range(nv):
                if j != i:
                    rest *= work[0, j]
            grad[i] += work[1, i] * rest
            hess[i, i] += work[2, i] * rest
            for j in range(i + 1, nv):
                if powers[k, j] == 0:
                    continue
                rest2 = c
                for l in range(nv):
                    if l != i and l != j:
                        rest2 *= work[0, l]
                val = work[1, i] * work[1, j] * rest2
                hess[i, j] += val
                hess[j, i] += val
    return H


@njit(cache=True, nogil=True, error_model="numpy", inline="always")
def rhs(coeffs, powers, hbar, n, y, dy, grad, hess, work, tangent):
    nv = 2 * n
    H = _derivatives(coeffs, powers, y, nv, grad, hess, work)
    ih = 1j / hbar
    for r in range(n):
        dy[r] = -ih * grad[n + r]
        dy[n + r] = ih * grad[r]
    if y.shape[0] == nv:
        return H
    off = nv
    if tangent:
        for i in range(nv):
            if i < n:
                row = n + i
                fac = -ih
            else:
                row = i - n
                fac = ih
            for j in range(nv):
                acc = 0.0 + 0.0j
                for k in range(nv):
                    acc += hess[row, k] * y[off + k * nv + j]
                dy[off + i * nv + j] = fac * acc
    else:
        for i in range(nv * nv):
            dy[off + i] = 0.0
    s = 0.0 + 0.0j
    g = 0.0 + 0.0j
    for r in range(n):
        s += y[r] * grad[r] + y[n + r] * grad[n + r]
        g += hess[r, n + r]
    dy[off + nv * nv] = 0.5 * s - H
    dy[off + nv * nv + 1] = 0.5 * g
    return H


@njit(cache=True, nogil=True, error_model="numpy")
def _too_big(y, n, bound):
    for i in range(2 * n):
        a = abs(y[i])
        if not np.isfinite(a):
            return STATUS_NONFINITE
        if a > bound:
            return STATUS_ESCAPED
    return STATUS_OK


@njit(cache=True, nogil=True, error_model="numpy", inline="always")
def _rk4_step(coeffs, powers, hbar, n, y, h, k1, k2, k3, k4, tmp, out, grad, hess, work, tangent):
    H = rhs(coeffs, powers, hbar, n, y, k1, grad, hess, work, tangent)
    for i in range(y.shape[0]):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    rhs(coeffs, powers, hbar, n, tmp, k2, grad, hess, work, tangent)
    for i in range(y.shape[0]):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    rhs(coeffs, powers, hbar, n, tmp, k3, grad, hess, work, tangent)
    for i in range(y.shape[0]):
        tmp[i] = y[i] + h * k3[i]
    rhs(coeffs, powers, hbar, n, tmp, k4, grad, hess, work, tangent)
    for i in range(y.shape[0]):
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return H


@njit(cache=True, nogil=True, error_model="numpy")
def energy(coeffs, powers, n, y):
    nv = 2 * n
    grad = np.empty(nv, dtype=np.complex128)
    hess = np.empty((nv, nv), dtype=np.complex128)
    work = np.empty((3, nv), dtype=np.complex128)
    return _derivatives(coeffs, powers, y, nv, grad, hess, work)


@njit(cache=True, nogil=True, error_model="numpy")
def integrate_grid(coeffs, powers, hbar, n, y0, tgrid, bound, tangent):
    """Classical RK4 over the nodes of ``tgrid`` (any monotone spacing).

    With ``tangent`` false the matrix block of the state is left untouched.

    Returns ``(ys, energies, status, n_done)``; on failure rows past
    ``n_done`` are left unset.
    """
    m = y0.shape[0]
    nv = 2 * n
    npts = tgrid.shape[0]
    ys = np.empty((npts, m), dtype=np.complex128)
    es = np.empty(npts, dtype=np.complex128)
    k1 = np.empty(m, dtype=np.complex128)
    k2 = np.empty(m, dtype=np.complex128)
    k3 = np.empty(m, dtype=np.complex128)
    k4 = np.empty(m, dtype=np.complex128)
    tmp = np.empty(m, dtype=np.complex128)
    grad = np.empty(nv, dtype=np.complex128)
    hess = np.empty((nv, nv), dtype=np.complex128)
    work = np.empty((3, nv), dtype=np.complex128)
    y = y0.copy()
    out = np.empty(m, dtype=np.complex128)
    ys[0] = y0
    status = _too_big(y0, n, bound)
    if status != STATUS_OK:
        return ys, es, status, 0
    for k in range(npts - 1):
        h = tgrid[k + 1] - tgrid[k]
        # literal mode counts let the compiler unroll the inner loops
        if n == 1:
            es[k] = _rk4_step(coeffs, powers, hbar, 1, y, h, k1, k2, k3, k4, tmp, out, grad, hess, work, tangent)
        else:
            es[k] = _rk4_step(coeffs, powers, hbar, 2, y, h, k1, k2, k3, k4, tmp, out, grad, hess, work, tangent)
        for i in range(m):
            y[i] = out[i]
            ys[k + 1, i] = out[i]
        status = _too_big(y, n, bound)
        if status != STATUS_OK:
            return ys, es, status, k + 1
    es[npts - 1] = energy(coeffs, powers, n, ys[npts - 1])
    return ys, es, STATUS_OK, npts - 1


@njit(cache=True, nogil=True, error_model="numpy")
def integrate_adaptive(coeffs, powers, hbar, n, y0, T, tol, h0, max_steps, bound, tangent):
    """RK4 with step doubling; the two-half-step result is kept."""
    m = y0.shape[0]
    nv = 2 * n
    cap = 1024
    ts = np.empty(cap, dtype=np.float64)
    ys = np.empty((cap, m), dtype=np.complex128)
    k1 = np.empty(m, dtype=np.complex128)
    k2 = np.empty(m, dtype=np.complex128)
    k3 = np.empty(m, dtype=np.complex128)
    k4 = np.empty(m, dtype=np.complex128)
    tmp = np.empty(m, dtype=np.complex128)
    full = np.empty(m, dtype=np.complex128)
    half = np.empty(m, dtype=np.complex128)
    two = np.empty(m, dtype=np.complex128)
    grad = np.empty(nv, dtype=np.complex128)
    hess = np.empty((nv, nv), dtype=np.complex128)
    work = np.empty((3, nv), dtype=np.complex128)
    ts[0] = 0.0
    ys[0] = y0
    count = 1
    status = _too_big(y0, n, bound)
    t = 0.0
    h = min(h0, T) if T > 0 else 0.0
    steps = 0
    while status == STATUS_OK and t < T:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if t + h > T:
            h = T - t
        y = ys[count - 1]
        _rk4_step(coeffs, powers, hbar, n, y, h, k1, k2, k3, k4, tmp, full, grad, hess, work, tangent)
        _rk4_step(coeffs, powers, hbar, n, y, 0.5 * h, k1, k2, k3, k4, tmp, half, grad, hess, work, tangent)
        _rk4_step(coeffs, powers, hbar, n, half, 0.5 * h, k1, k2, k3, k4, tmp, two, grad, hess, work, tangent)
        err = 0.0
        for i in range(m):
            e = abs(two[i] - full[i]) / (1.0 + abs(two[i]))
            if e > err:
                err = e
        err /= 15.0
        steps += 1
        if not np.isfinite(err):
            status = STATUS_NONFINITE
            break
        if err <= tol or h < 1e-14 * max(T, 1.0):
            if count == cap:
                cap *= 2
                ts2 = np.empty(cap, dtype=np.float64)
                ys2 = np.empty((cap, m), dtype=np.complex128)
                ts2[:count] = ts[:count]
                ys2[:count] = ys[:count]
                ts = ts2
                ys = ys2
            t = T if t + h >= T else t + h
            ts[count] = t
            ys[count] = two
            count += 1
            status = _too_big(two, n, bound)
        if err > 0.0:
            fac = 0.9 * (tol / err) ** 0.2
            fac = min(4.0, max(0.1, fac))
        else:
            fac = 4.0
        h = h * fac
    es = np.empty(count, dtype=np.complex128)
    for k in range(count):
        es[k] = energy(coeffs, powers, n, ys[k])
    return ts[:count], ys[:count], es, status


@njit(cache=True, nogil=True, error_model="numpy")
def continuous_phase(w):
    """Phase of ``w`` continued sample to sample (jumps taken in (-pi, pi])."""
    npts = w.shape[0]
    out = np.empty(npts, dtype=np.float64)
    out[0] = np.angle(w[0])
    for k in range(1, npts):
        out[k] = out[k - 1] + np.angle(w[k] / w[k - 1])
    return out
