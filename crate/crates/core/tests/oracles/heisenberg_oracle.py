"""Residuals r1, r2, r3 of the square roots of the finite Heisenberg
representation, from closed-form eigendecompositions (no eigensolver).

Shift T e_x = e_{x+1} has eigenvectors f_k(x) = w^{-kx}/sqrt(N) with
eigenvalue w^k; modulation M = diag(w^x); C = w^{-1} I; w = e^{2 pi i/N}.
U = T^{1/2}, V = M^{1/2} on the principal branch (angles in (-pi, pi]),
W = U V U^-1 V^-1,
r1 = |W^(ab) - C|_1, r2 = |[U, W]|_1, r3 = |[V, W]|_1 with the induced
1-norm (max column sum).

Usage: python3 heisenberg_oracle.py > heisenberg_residuals.txt
"""

from fractions import Fraction

import numpy as np


def principal_angle(k, n):
    # angle of w^k reduced to (-pi, pi], exactly in rationals of pi
    f = Fraction(k % n, n)
    if f > Fraction(1, 2):
        f -= 1
    return 2 * np.pi * float(f)


def norm1(m):
    return np.abs(m).sum(axis=0).max()


def residuals(n, a, b):
    x = np.arange(n)
    w = np.exp(2j * np.pi / n)
    f = np.exp(-2j * np.pi * np.outer(x, x) / n) / np.sqrt(n)
    half_t = np.array([np.exp(1j * principal_angle(k, n) / a) for k in x])
    u = f @ np.diag(half_t) @ f.conj().T
    v = np.diag([np.exp(1j * principal_angle(k, n) / b) for k in x])
    c = np.eye(n) / w
    ww = u @ v @ u.conj().T @ v.conj().T
    r1 = norm1(np.linalg.matrix_power(ww, a * b) - c)
    r2 = norm1(u @ ww - ww @ u)
    r3 = norm1(v @ ww - ww @ v)
    return r1, r2, r3


if __name__ == "__main__":
    print("# N a b r1 r2 r3")
    for n in (2, 8, 16):
        r = residuals(n, 2, 2)
        print(n, 2, 2, *(repr(float(v)) for v in r))
