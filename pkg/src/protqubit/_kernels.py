"""Compiled inner loops on H(t) = sum_k c_k(t) A_k: fixed-step RK4 and a Magnus reference."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _assemble(ops, c, row, out):
    K, d, _ = ops.shape
    for a in range(d):
        for b in range(d):
            v = 0j
            for q in range(K):
                v += c[row, q] * ops[q, a, b]
            out[a, b] = v


@njit(cache=True, nogil=True)
def _apply(h, x, out):
    # out = -i h x
    d, m = x.shape
    for a in range(d):
        for j in range(m):
            v = 0j
            for b in range(d):
                v += h[a, b] * x[b, j]
            out[a, j] = -1j * v


@njit(cache=True, nogil=True)
def rk4_propagate(ops, coef, psi0, dt):
    """Advance psi0 by (coef.shape[0] - 1) // 2 steps of classic RK4.

    ``coef[2s]``, ``coef[2s + 1]``, ``coef[2s + 2]`` hold the term
    coefficients at the start, midpoint and end of step s.
    """
    K, d, _ = ops.shape
    m = psi0.shape[1]
    nsteps = (coef.shape[0] - 1) // 2
    psi = psi0.copy()
    h_start = np.empty((d, d), np.complex128)
    h_mid = np.empty((d, d), np.complex128)
    h_end = np.empty((d, d), np.complex128)
    k = np.empty((d, m), np.complex128)
    acc = np.empty((d, m), np.complex128)
    tmp = np.empty((d, m), np.complex128)
    _assemble(ops, coef, 0, h_end)
    for s in range(nsteps):
        h_start, h_end = h_end, h_start
        _assemble(ops, coef, 2 * s + 1, h_mid)
        _assemble(ops, coef, 2 * s + 2, h_end)

        _apply(h_start, psi, k)
        for a in range(d):
            for j in range(m):
                acc[a, j] = k[a, j]
                tmp[a, j] = psi[a, j] + 0.5 * dt * k[a, j]
        _apply(h_mid, tmp, k)
        for a in range(d):
            for j in range(m):
                acc[a, j] += 2.0 * k[a, j]
                tmp[a, j] = psi[a, j] + 0.5 * dt * k[a, j]
        _apply(h_mid, tmp, k)
        for a in range(d):
            for j in range(m):
                acc[a, j] += 2.0 * k[a, j]
                tmp[a, j] = psi[a, j] + dt * k[a, j]
        _apply(h_end, tmp, k)
        for a in range(d):
            for j in range(m):
                psi[a, j] += dt / 6.0 * (acc[a, j] + k[a, j])
    return psi


@njit(cache=True, nogil=True)
def _expm_apply(h, t, psi, term, nxt):
    """psi <- exp(-i t h) psi by a Taylor series, split so each piece has ||t h|| <= 0.5."""
    d, m = psi.shape
    x = 0.0
    for a in range(d):
        row = 0.0
        for b in range(d):
            row += abs(h[a, b])
        x = max(x, row)
    x *= abs(t)
    pieces = max(1, int(np.ceil(x / 0.5)))
    tp = t / pieces
    xp = x / pieces
    for _ in range(pieces):
        for a in range(d):
            for j in range(m):
                term[a, j] = psi[a, j]
        k = 0
        bound = 1.0
        while bound > 1e-17:
            k += 1
            _apply(h, term, nxt)
            for a in range(d):
                for j in range(m):
                    term[a, j] = nxt[a, j] * (tp / k)
                    psi[a, j] += term[a, j]
            bound *= xp / (k + 1)


@njit(cache=True, nogil=True)
def magnus4_steps(ops, coef, psi, h, a1, a2):
    """Commutator-free fourth-order Magnus steps, in place on ``psi``.

    ``coef[2s]`` and ``coef[2s + 1]`` hold the term coefficients at the two
    Gauss nodes of step s.
    """
    K, d, _ = ops.shape
    m = psi.shape[1]
    h1 = np.empty((d, d), np.complex128)
    h2 = np.empty((d, d), np.complex128)
    first = np.empty((d, d), np.complex128)
    second = np.empty((d, d), np.complex128)
    term = np.empty((d, m), np.complex128)
    nxt = np.empty((d, m), np.complex128)
    for s in range(coef.shape[0] // 2):
        _assemble(ops, coef, 2 * s, h1)
        _assemble(ops, coef, 2 * s + 1, h2)
        for a in range(d):
            for b in range(d):
                first[a, b] = a1 * h1[a, b] + a2 * h2[a, b]
                second[a, b] = a2 * h1[a, b] + a1 * h2[a, b]
        _expm_apply(first, h, psi, term, nxt)
        _expm_apply(second, h, psi, term, nxt)
    return psi
