"""Eigenvalues of the f64 matrix K = I - G, G[i, j] = g(j - i),
g(d) = (sin(pi d/2) - sin(pi d/4)) / (pi d), g(0) = 1/4, of size 129,
computed at 40 significant digits with the f64 entries taken as exact.

Writes the symbol values g(-128..128) as exact f64 reprs, then the
eigenvalues in ascending order.

Usage: python3 toeplitz_eigen_oracle.py > toeplitz_eigen.txt
"""

import mpmath as mp
import numpy as np

N = 129


def symbol(d):
    if d == 0:
        return 0.25
    return float((np.sin(np.pi * d / 2) - np.sin(np.pi * d / 4)) / (np.pi * d))


if __name__ == "__main__":
    mp.mp.dps = 40
    g = {d: symbol(d) for d in range(-(N - 1), N)}
    k = mp.matrix(N, N)
    for i in range(N):
        for j in range(N):
            k[i, j] = mp.mpf((1.0 if i == j else 0.0) - g[j - i])
    ev = sorted(mp.eigsy(k, eigvals_only=True))
    print("# symbol d value")
    for d in range(-(N - 1), N):
        print("g", d, repr(g[d]))
    print("# eigenvalues ascending")
    for v in ev:
        print("e", mp.nstr(v, 25))
