"""Slow reference implementations used only as test oracles."""
import itertools
import math

import numpy as np


def naive_matmul(a, b):
    rows, inner = a.shape
    cols = b.shape[1]
    out = np.zeros((rows, cols), dtype=complex)
    for i in range(rows):
        for j in range(cols):
            acc = 0j
            for k in range(inner):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def jacobi_eigvalsh(a, tol=1e-15, max_sweeps=100):
    """Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(sum(abs(a[p, q]) ** 2 for p in range(n) for q in range(n) if p != q))
        if off <= tol * np.linalg.norm(a):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                # unitary rotation zeroing a[p, q]
                phase = apq / abs(apq)
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * math.atan2(2 * abs(apq), aqq - app)
                c, s = math.cos(theta), math.sin(theta)
                J = np.eye(n, dtype=complex)
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s * phase
                J[q, p] = -s * np.conj(phase)
                a = J.conj().T @ a @ J
    return np.sort(np.diag(a).real)[::-1]


def brute_force_detect(Y, sigma, points, scale):
    m_t = sigma.shape[1]
    out = np.zeros((m_t, Y.shape[1]), dtype=int)
    for t in range(Y.shape[1]):
        best, best_d = None, float("inf")
        for cand in itertools.product(range(len(points)), repeat=m_t):
            x = np.array([scale * points[k] for k in cand])
            r = Y[:, t] - sigma @ x
            d = float(np.sum(np.abs(r) ** 2))
            if d < best_d:
                best, best_d = cand, d
        out[:, t] = best
    return out


def random_unitary(n, rng):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
