"""Training losses with their gradient seeds on ``Y`` and ``Sigma``.

Seeds follow the ``sisnet`` convention: ``dL/dRe(z) + 1j*dL/dIm(z)``.
Both losses accept a single block (``Y`` of shape (M_r, T)) or a batch
with a leading axis, in which case the value is averaged over the batch
and the seeds carry the matching ``1/B`` factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import cxmat
from .errors import ShapeError, SisError
from .modem import Constellation, hypotheses

OBJECTIVES = ("ser_ce", "svd_gap")
SVD_SOURCES = ("channel", "effective")
CE_LOGITS = ("marginal", "diagonal")


@dataclass
class LossValue:
    value: float
    grad_y: np.ndarray | None
    grad_sigma: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)


def stream_logits(Y, sigma, constellation: Constellation, scale: float, noise_var: float):
    """Distance logits of every stream against its own diagonal gain, (..., M, T, K)."""
    gain = np.diagonal(sigma, axis1=-2, axis2=-1)[..., :, None]  # (..., M, 1)
    ref = gain[..., None] * (scale * constellation.points)       # (..., M, 1, K)
    diff = Y[..., None] - ref
    return -(diff.real ** 2 + diff.imag ** 2) / noise_var, diff


def cross_entropy_loss(Y, sigma, truth, constellation: Constellation, scale: float,
                       noise_var: float, logits: str = "marginal") -> LossValue:
    """Mean per-stream cross-entropy of the transmitted symbols.

    ``logits="marginal"`` scores each stream with the exact marginal
    posterior of the joint Gaussian likelihood
    ``-||Y[:, t] - Sigma a x||^2 / noise_var`` over all candidate vectors
    ``x``. ``logits="diagonal"`` scores stream m only against its own gain
    ``Sigma[m, m]`` and ignores the other streams.
    """
    if not noise_var > 0:
        raise ValueError("noise variance must be positive")
    if logits == "marginal":
        return _marginal_ce(Y, sigma, truth, constellation, scale, noise_var)
    if logits != "diagonal":
        raise ValueError(f"logits must be one of {CE_LOGITS}")
    Y = np.asarray(Y, dtype=np.complex128)
    S = np.asarray(sigma, dtype=np.complex128)
    truth = np.asarray(truth)
    m = min(S.shape[-2], S.shape[-1])
    if Y.shape[-2] < m or truth.shape[-2] < m or Y.shape[-1] != truth.shape[-1]:
        raise ShapeError("cross_entropy_loss", Y.shape, S.shape, truth.shape)
    Ym, Tm = Y[..., :m, :], truth[..., :m, :]
    logits, diff = stream_logits(Ym, S[..., :m, :m], constellation, scale, noise_var)
    lse = logsumexp(logits, axis=-1)
    true_logit = np.take_along_axis(logits, Tm[..., None], axis=-1)[..., 0]
    per = lse - true_logit
    count = per.size
    value = float(np.sum(per) / count)

    w = np.exp(logits - lse[..., None])
    np.put_along_axis(w, Tm[..., None], np.take_along_axis(w, Tm[..., None], axis=-1) - 1.0,
                      axis=-1)
    w /= count
    # d(-|diff|^2/s2) seeds: on Y -> -2 diff / s2, on the gain -> 2 conj(a s_k) diff / s2
    gy = np.zeros_like(Y)
    gy[..., :m, :] = np.sum(w * (-2.0 / noise_var) * diff, axis=-1)
    ck = (scale * constellation.points).conj()
    g_gain = np.sum(w * (2.0 / noise_var) * ck * diff, axis=(-2, -1))  # (..., M)
    gs = np.zeros_like(S)
    idx = np.arange(m)
    gs[..., idx, idx] = g_gain
    train_ser = float(np.mean(np.argmax(logits, axis=-1) != Tm))
    return LossValue(value, gy, gs, {"train_ser": train_ser})


def _marginal_ce(Y, sigma, truth, constellation, scale, noise_var):
    Y = np.asarray(Y, dtype=np.complex128)
    S = np.asarray(sigma, dtype=np.complex128)
    truth = np.asarray(truth)
    m_t = S.shape[-1]
    if Y.shape[-2] != S.shape[-2] or truth.shape[-2] != m_t or Y.shape[-1] != truth.shape[-1]:
        raise ShapeError("cross_entropy_loss", Y.shape, S.shape, truth.shape)
    K = constellation.size
    hyp = hypotheses(constellation, m_t)                  # (M_t, K^M_t), first stream slowest
    cand = scale * constellation.points[hyp]              # (M_t, Hy)
    c = S @ cand                                          # (..., M_r, Hy)
    diff = Y[..., :, :, None] - c[..., :, None, :]        # (..., M_r, T, Hy)
    logit = -np.sum(diff.real ** 2 + diff.imag ** 2, axis=-3) / noise_var  # (..., T, Hy)
    lse = logsumexp(logit, axis=-1)                        # (..., T)
    p = np.exp(logit - lse[..., None])
    grid = logit.reshape(logit.shape[:-1] + (K,) * m_t)
    lead = logit.ndim - 1
    per = np.empty(truth.shape)                            # (..., M_t, T)
    w = m_t * p
    for m in range(m_t):
        others = tuple(lead + a for a in range(m_t) if a != m)
        marg = logsumexp(grid, axis=others) if others else grid   # (..., T, K)
        tm = truth[..., m, :]
        true_marg = np.take_along_axis(marg, tm[..., None], axis=-1)[..., 0]
        per[..., m, :] = lse - true_marg
        consistent = hyp[m][None, :] == tm[..., None]      # (..., T, Hy)
        w -= np.where(consistent, np.exp(logit - true_marg[..., None]), 0.0)
    count = per.size
    value = float(np.sum(per) / count)
    w /= count
    gy = np.sum(w[..., None, :, :] * (-2.0 / noise_var) * diff, axis=-1)
    # d logit / d Sigma: 2/noise_var * diff x^H summed over t and hypotheses
    wd = w[..., None, :, :] * (2.0 / noise_var) * diff     # (..., M_r, T, Hy)
    gs = np.einsum("...rth,sh->...rs", wd, cand.conj())
    decided = np.argmax(logit, axis=-1)                    # joint MAP, (..., T)
    train_ser = float(np.mean(np.moveaxis(hyp[:, decided], 0, -2) != truth))
    return LossValue(value, gy, gs, {"train_ser": train_ser})


def svd_target(H, m: int) -> np.ndarray:
    _, s, _ = cxmat.truncated_svd(H, m)
    return np.diag(s).astype(np.complex128)


def svd_targets(H_batch, m: int) -> np.ndarray:
    """Batched ``svd_target`` using singular values only."""
    s = cxmat.singular_values(H_batch, m)
    out = np.zeros(s.shape[:-1] + (m, m), dtype=np.complex128)
    idx = np.arange(m)
    out[..., idx, idx] = s
    return out


def optimal_scalar(sigma, target):
    """Least-squares complex scalar minimizing ``||c*sigma - target||_F``."""
    num = np.sum(np.conj(sigma) * target, axis=(-2, -1))
    den = np.sum(np.abs(sigma) ** 2, axis=(-2, -1))
    if np.any(den == 0):
        raise SisError("effective channel is zero; alignment scalar undefined")
    return num / den


def frobenius_gap(sigma, target) -> LossValue:
    """Normalized Frobenius gap with the optimal alignment scalar.

    ``gap = ||c*S - T||^2 / ||T T^H||^2`` with ``c`` the least-squares
    scalar. Since ``c`` is a stationary point, the seed on ``S`` is the
    partial derivative at fixed ``c``: ``2 conj(c) (c S - T) / ||T T^H||^2``.
    """
    S = np.asarray(sigma, dtype=np.complex128)
    T = np.asarray(target, dtype=np.complex128)
    m = T.shape[-1]
    if S.shape[-2] < m or S.shape[-1] < m:
        raise ShapeError("frobenius_gap", S.shape, T.shape)
    Sm = S[..., :m, :m]
    c = optimal_scalar(Sm, T)
    resid = c[..., None, None] * Sm - T
    tt = T @ np.conj(np.swapaxes(T, -1, -2))
    den = np.sum(np.abs(tt) ** 2, axis=(-2, -1))
    gaps = np.sum(np.abs(resid) ** 2, axis=(-2, -1)) / den
    batch = gaps.size
    gs = np.zeros_like(S)
    gs[..., :m, :m] = 2.0 * np.conj(c)[..., None, None] * resid / den[..., None, None] / batch
    return LossValue(float(np.mean(gaps)), None, gs,
                     {"gamma_c": float(np.mean(gaps)), "scalar": c})


def self_aligned_gap(sigma) -> LossValue:
    """Frobenius gap against the singular values of ``sigma`` itself.

    The target moves with ``sigma``, so the seed includes the singular-value
    sensitivities ``d s_k = Re(u_k^H dS v_k)`` (distinct values assumed).
    """
    S = np.asarray(sigma, dtype=np.complex128)
    m = min(S.shape[-2], S.shape[-1])
    Sm = S[..., :m, :m]
    u, sv, vh = np.linalg.svd(Sm)
    T = np.zeros_like(Sm)
    idx = np.arange(m)
    T[..., idx, idx] = sv
    c = optimal_scalar(Sm, T)
    resid = c[..., None, None] * Sm - T
    num = np.sum(np.abs(resid) ** 2, axis=(-2, -1))
    den = np.sum(sv ** 4, axis=-1)
    gaps = num / den
    batch = gaps.size
    d_s = (-2.0 * resid[..., idx, idx].real / den[..., None]
           - num[..., None] * 4.0 * sv ** 3 / den[..., None] ** 2)      # (..., m)
    g = 2.0 * np.conj(c)[..., None, None] * resid / den[..., None, None]
    g = g + (u * d_s[..., None, :]) @ vh
    gs = np.zeros_like(S)
    gs[..., :m, :m] = g / batch
    return LossValue(float(np.mean(gaps)), None, gs, {"gamma_c": float(np.mean(gaps)), "scalar": c})
