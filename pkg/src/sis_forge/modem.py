"""Constellations, joint maximum-likelihood detection and SER."""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

MAX_HYPOTHESES = 65536


@dataclass(frozen=True)
class Constellation:
    name: str
    points: np.ndarray  # unit average energy
    labels: np.ndarray  # Gray-coded bit label of each point

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def bits(self) -> int:
        return int(np.log2(self.size))


def gray(k):
    k = np.asarray(k)
    return k ^ (k >> 1)


def qam4() -> Constellation:
    # label bit 0 flips the real sign, bit 1 the imaginary sign
    idx = np.arange(4)
    re_ = np.where(idx & 1, -1.0, 1.0)
    im_ = np.where(idx & 2, -1.0, 1.0)
    return Constellation("4-QAM", (re_ + 1j * im_) / np.sqrt(2), idx.copy())


def psk(k: int) -> Constellation:
    if k < 2 or k & (k - 1):
        raise ValueError(f"PSK order must be a power of two >= 2, got {k}")
    pos = np.arange(k)
    labels = gray(pos)
    offset = np.pi / k if k == 4 else 0.0
    pts = np.empty(k, dtype=np.complex128)
    pts[labels] = np.exp(1j * (2 * np.pi * pos / k + offset))
    return Constellation(f"PSK-{k}", pts, np.arange(k))


def get_constellation(name: str) -> Constellation:
    key = name.strip().upper()
    if key in ("4-QAM", "4QAM", "QAM4"):
        return qam4()
    if key == "QPSK":
        c = psk(4)
        return Constellation("QPSK", c.points, c.labels)
    m = re.fullmatch(r"PSK-?(\d+)", key)
    if m:
        return psk(int(m.group(1)))
    raise ValueError(f"unknown constellation {name!r}")


def power_scale(tx_power_w: float, m_t: int) -> float:
    return float(np.sqrt(tx_power_w / m_t))


def modulate(indices, constellation: Constellation, scale: float) -> np.ndarray:
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= constellation.size):
        raise ValueError(f"symbol index outside [0, {constellation.size})")
    return scale * constellation.points[idx]


def hypotheses(constellation, m_t):
    """Every candidate index vector as columns, (m_t, K**m_t), first stream slowest."""
    n_hyp = constellation.size ** m_t
    if n_hyp > MAX_HYPOTHESES:
        raise ValueError(f"{n_hyp} joint hypotheses exceed {MAX_HYPOTHESES}; "
                         "use per-stream detection (detect_zf) instead")
    grid = np.array(list(itertools.product(range(constellation.size), repeat=m_t)))
    return grid.T  # (m_t, K^m_t)


def ml_detect(Y, sigma, constellation: Constellation, scale: float) -> np.ndarray:
    """Joint ML decision per column of ``Y`` given the effective channel ``sigma``.

    Leading batch axes on ``Y`` and ``sigma`` are supported.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    S = np.asarray(sigma, dtype=np.complex128)
    if S.shape[-2] != Y.shape[-2]:
        raise ShapeError("ml_detect", Y.shape, S.shape)
    hyp = hypotheses(constellation, S.shape[-1])
    c = S @ (scale * constellation.points[hyp])  # (..., M_r, Hy)
    # ||y - c||^2 up to the per-column constant ||y||^2
    energy = np.sum(c.real ** 2 + c.imag ** 2, axis=-2)[..., None, :]
    metric = energy - 2 * (np.conj(np.swapaxes(Y, -1, -2)) @ c).real
    best = np.argmin(metric, axis=-1)            # (..., T)
    return np.moveaxis(hyp[:, best], 0, -2)


def detect_zf(Y, sigma, constellation: Constellation, scale: float) -> np.ndarray:
    """Per-stream nearest-point decision after zero-forcing equalization."""
    x = np.linalg.pinv(np.asarray(sigma)) @ np.asarray(Y) / scale
    d = np.abs(x[..., None] - constellation.points) ** 2
    return np.argmin(d, axis=-1)


def symbol_error_rate(detected, truth) -> float:
    detected = np.asarray(detected)
    truth = np.asarray(truth)
    if detected.shape != truth.shape:
        raise ShapeError("symbol_error_rate", detected.shape, truth.shape)
    return float(np.mean(detected != truth))
