"""Dense complex matrix helpers.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128`` with
C (row-major) storage. The text dump format is::

    rows cols
    re im          # one line per entry, row-major

with every float written in shortest round-trip form so that a dump/load
cycle reproduces the array bit for bit.
"""
from __future__ import annotations

import io
from typing import TextIO

import numpy as np

from .errors import ConvergenceError, ShapeError

SVD_RESIDUAL_TOL = 1e-8


def as_matrix(a, finite=True) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError("expected a non-empty 2-D matrix", m.shape)
    if finite and not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return a @ b


def frobenius_norm_sq(a) -> float:
    a = np.asarray(a)
    return float(np.sum(a.real ** 2 + a.imag ** 2))


def truncated_svd(a, k: int):
    """Top-``k`` singular triples of ``a``.

    Returns ``(U, s, V)`` with ``a @ V[:, i] ~= s[i] * U[:, i]``; ``s`` is
    descending. Backed by LAPACK's divide-and-conquer SVD. The residual of
    every retained triple is checked against ``1e-8 * s[0]`` and a
    :class:`ConvergenceError` is raised when LAPACK fails or the check does
    not hold.
    """
    a = as_matrix(a, finite=False)
    if not 1 <= k <= min(a.shape):
        raise ValueError(f"k={k} outside [1, {min(a.shape)}]")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}", float("inf")) from exc
    u = u[:, :k]
    s = s[:k]
    v = vh[:k].conj().T
    residual = svd_residual(a, u, s, v)
    scale = s[0] if s[0] > 0 else 1.0
    if not residual <= SVD_RESIDUAL_TOL * scale:
        raise ConvergenceError("SVD residual above tolerance", residual)
    return u, s, v


def svd_residual(a, u, s, v) -> float:
    """Largest ``||a v_i - s_i u_i||`` over the supplied triples."""
    r = a @ v - u * s[None, :]
    return float(np.max(np.linalg.norm(r, axis=0)))


def singular_values(a, k: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    s = np.linalg.svd(a, compute_uv=False)
    return s if k is None else s[..., :k]


def dump_matrix(a, fh: TextIO | None = None) -> str | None:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ShapeError("dump_matrix", a.shape)
    out = fh if fh is not None else io.StringIO()
    out.write(f"{a.shape[0]} {a.shape[1]}\n")
    for z in a.ravel(order="C"):
        out.write(f"{float(z.real)!r} {float(z.imag)!r}\n")
    if fh is None:
        return out.getvalue()
    return None


def load_matrix(src: TextIO | str) -> np.ndarray:
    text = src if isinstance(src, str) else src.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix dump")
    rows, cols = (int(t) for t in lines[0].split())
    body = lines[1:]
    if len(body) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {len(body)}")
    vals = np.empty(rows * cols, dtype=np.complex128)
    for idx, ln in enumerate(body):
        re, im = ln.split()
        vals[idx] = complex(float(re), float(im))
    return vals.reshape(rows, cols)
