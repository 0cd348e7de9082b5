"""Independent reference constructions used as test oracles.

Nothing here imports the package: operators are built from explicit
Kronecker products, squares are taken by matrix multiplication, and time
evolution uses dense matrix exponentials.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
PAULIS = {"X": X, "Y": Y, "Z": Z}


def site_op(op, i, j, n):
    """op on site (i, j) (1-based), row-major with (1, 1) the leftmost factor."""
    k = (i - 1) * n + (j - 1)
    out = np.ones((1, 1), dtype=complex)
    for s in range(n * n):
        out = np.kron(out, op if s == k else I2)
    return out


def string_op(factors, n):
    """factors: dict {(i, j): 'X'|'Y'|'Z'}."""
    out = np.eye(2 ** (n * n), dtype=complex)
    for (i, j), a in factors.items():
        out = out @ site_op(PAULIS[a], i, j, n)
    return out


def h0_square(n, jx=1.0, jy=1.0):
    """-Jx sum_i (sum_j X_ij)^2 - Jy sum_j (sum_i Y_ij)^2, squares by matmul."""
    d = 2 ** (n * n)
    h = np.zeros((d, d), dtype=complex)
    for i in range(1, n + 1):
        line = sum(site_op(X, i, j, n) for j in range(1, n + 1))
        h -= jx * line @ line
    for j in range(1, n + 1):
        line = sum(site_op(Y, i, j, n) for i in range(1, n + 1))
        h -= jy * line @ line
    return h


def h0_pair(n, jx=1.0, jy=1.0):
    """Same couplings counting each pair on a line once: -J sum_{a<b} s_a s_b."""
    d = 2 ** (n * n)
    return 0.5 * (h0_square(n, jx, jy) + n * n * (jx + jy) * np.eye(d))


def p_op(i, n):
    return string_op({(i, j): "Y" for j in range(1, n + 1)}, n)


def q_op(j, n):
    return string_op({(i, j): "X" for i in range(1, n + 1)}, n)


def collective(axis, n):
    return sum(site_op(PAULIS[axis], i, j, n) for i in range(1, n + 1) for j in range(1, n + 1))


def ground_space(h):
    w, v = np.linalg.eigh(h)
    return w, v[:, :2]


def zero_logical(n, h=None):
    """|0_L>: ground-space vector with P_1 = (-1)^n, phase-free comparison only."""
    h = h0_pair(n) if h is None else h
    _, g = ground_space(h)
    pw, pv = np.linalg.eigh(g.conj().T @ p_op(1, n) @ g)
    target = (-1) ** n
    return g @ pv[:, int(np.argmin(np.abs(pw - target)))]


def ferro_minus_y(n):
    down = np.array([1.0, -1j]) / np.sqrt(2.0)
    psi = np.ones(1, dtype=complex)
    for _ in range(n * n):
        psi = np.kron(psi, down)
    return psi


def expm_evolve(h, psi, t):
    return expm(-1j * t * h) @ psi


def apply_string(factors, psi, n):
    """Apply a Pauli string to a state (or columns of states) without building the matrix."""
    psi = np.asarray(psi, dtype=complex)
    cols = psi.reshape(2 ** (n * n), -1)
    t = cols.reshape([2] * (n * n) + [cols.shape[1]])
    for (i, j), a in factors.items():
        k = (i - 1) * n + (j - 1)
        t = np.moveaxis(np.tensordot(PAULIS[a], t, axes=([1], [k])), 0, k)
    return t.reshape(psi.shape)
