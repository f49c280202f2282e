"""End-to-end training of both surface stacks and frozen-phase testing."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import modem, objectives, sisnet
from . import wavefield as wf
from .config import TrainConfig
from .errors import DivergenceError, ShapeError
from .geometry import build_geometry, wavelength_for
from .sisnet import LinkState, PhaseStack

log = logging.getLogger(__name__)

INIT_DOMAIN = 7
FINAL_DOMAIN = 3


@dataclass
class Link:
    """Everything fixed by the configuration: geometry, kernels, LOS term."""
    config: TrainConfig
    geo_t: object
    geo_r: object
    kernels_t: list
    kernels_r: list
    los: np.ndarray
    path_gain: float
    constellation: modem.Constellation
    scale: float

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "Link":
        lam = wavelength_for(cfg.frequency_hz)
        h = cfg.antenna_height_m
        geo_t = build_geometry("tx", cfg.mt, cfg.nt, cfg.lt, lam, cfg.alpha1_t, cfg.alpha2_t,
                               cfg.alpha3_t, (0.0, 0.0, h))
        geo_r = build_geometry("rx", cfg.mr, cfg.nr, cfg.lr, lam, cfg.alpha1_r, cfg.alpha2_r,
                               cfg.alpha3_r, (cfg.distance_m, 0.0, h))
        d = wf.surface_separation(geo_t, geo_r)
        const = modem.get_constellation(cfg.constellation)
        return cls(cfg, geo_t, geo_r, wf.chain_kernels(geo_t), wf.chain_kernels(geo_r),
                   wf.los_matrix(geo_t, geo_r), wf.path_loss_amplitude(lam, d), const,
                   modem.power_scale(cfg.tx_power_w, cfg.mt))

    def draw(self, domain: int, index: int, symbols: int):
        """One realization: channel, symbol indices and noise from a dedicated stream."""
        cfg = self.config
        rng = wf.realization_rng(cfg.seed, domain, index)
        w_los, w_nlos = wf.rician_weights(cfg.rician_kappa)
        scatter = wf.complex_normal(rng, (cfg.nr, cfg.nt))
        H = self.path_gain * (w_los * self.los + w_nlos * scatter)
        idx = rng.integers(0, self.constellation.size, size=(cfg.mt, symbols))
        Z = wf.sample_noise(cfg.mr, symbols, cfg.noise_var, rng)
        return H, idx, Z


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_ser: float
    test_ser: float
    test_stderr: float
    seconds: float


@dataclass
class TrainResult:
    stack_t: PhaseStack
    stack_r: PhaseStack
    history: list = field(default_factory=list)
    initial_test_ser: float | None = None
    best_epoch: int = 0
    final: "EvalResult | None" = None  # returned stacks on a held-out set


@dataclass
class EvalResult:
    ser: float
    stderr: float
    per_realization: np.ndarray


def init_phases(cfg: TrainConfig, rng: np.random.Generator):
    stack_t = PhaseStack("tx", rng.uniform(0.0, 2 * np.pi, (cfg.lt, cfg.nt)))
    stack_r = PhaseStack("rx", rng.uniform(0.0, 2 * np.pi, (cfg.lr, cfg.nr)))
    return stack_t, stack_r


class Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, stacks, grads):
        for stack, g in zip(stacks, grads):
            if g.shape != stack.angles.shape:
                raise ShapeError("gradient", g.shape, stack.angles.shape)
            stack.angles = stack.angles - self.lr * g
            stack.wrap()


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, stacks, grads):
        if self.m is None:
            self.m = [np.zeros_like(s.angles) for s in stacks]
            self.v = [np.zeros_like(s.angles) for s in stacks]
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, (stack, g) in enumerate(zip(stacks, grads)):
            if g.shape != stack.angles.shape:
                raise ShapeError("gradient", g.shape, stack.angles.shape)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            step = self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            stack.angles = stack.angles - step
            stack.wrap()


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return Sgd(cfg.learning_rate)
    return Adam(cfg.learning_rate)


def optimizer_step(stacks, grads, optimizer):
    optimizer.step(stacks, grads)
    return stacks


def batch_step(link: Link, state: LinkState, objective: str, first_item: int,
               batch_size: int, domain: int = wf.TRAIN_DOMAIN):
    """Loss, phase gradients and training SER for one mini-batch.

    Items are drawn and processed in chunks of ``chunk_size`` in a fixed
    order; the loss is the batch mean.
    """
    cfg = link.config
    acc = state.zero_grads()
    total = 0.0
    errors = 0
    T = cfg.symbols_per_block
    m = min(cfg.mt, cfg.mr)
    for start in range(0, batch_size, cfg.chunk_size):
        stop = min(start + cfg.chunk_size, batch_size)
        draws = [link.draw(domain, first_item + b, T) for b in range(start, stop)]
        H = np.stack([d[0] for d in draws])
        idx = np.stack([d[1] for d in draws])
        Z = np.stack([d[2] for d in draws])
        X = link.scale * link.constellation.points[idx]
        sigma, HP = state.sigma(H)
        Y = sigma @ X + Z
        frac = (stop - start) / batch_size
        if objective == "ser_ce":
            lv = objectives.cross_entropy_loss(Y, sigma, idx, link.constellation, link.scale,
                                               cfg.noise_var, cfg.ce_logits)
            G = lv.grad_sigma + lv.grad_y @ np.conj(np.swapaxes(X, -1, -2))
        elif cfg.svd_source == "effective":
            lv = objectives.self_aligned_gap(sigma)
            G = lv.grad_sigma
        else:
            targets = objectives.svd_targets(H, m)
            lv = objectives.frobenius_gap(sigma, targets)
            G = lv.grad_sigma
        total += frac * lv.value
        state.accumulate(H, HP, frac * G, acc)
        errors += int(np.sum(modem.ml_detect(Y, sigma, link.constellation, link.scale) != idx))
    g_phi, g_theta = state.phase_grads(acc)
    train_ser = errors / (batch_size * cfg.mt * T)
    return total, g_phi, g_theta, train_ser


def evaluate(stack_t, stack_r, cfg: TrainConfig, n_realizations: int | None = None,
             link: Link | None = None, domain: int = wf.TEST_DOMAIN,
             symbols: int | None = None) -> EvalResult:
    """Frozen-phase SER with joint ML detection on fresh channels."""
    link = link or Link.from_config(cfg)
    n = cfg.test_realizations if n_realizations is None else n_realizations
    if n < 1:
        raise ValueError("need at least one test realization")
    T = cfg.test_symbols if symbols is None else symbols
    state = LinkState.build(stack_t, stack_r, link.kernels_t, link.kernels_r)
    sers = np.empty(n)
    for r in range(n):
        H, idx, Z = link.draw(domain, r, T)
        sigma, _ = state.sigma(H)
        Y = sigma @ (link.scale * link.constellation.points[idx]) + Z
        det = modem.ml_detect(Y, sigma, link.constellation, link.scale)
        sers[r] = modem.symbol_error_rate(det, idx)
    stderr = float(np.std(sers, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return EvalResult(float(np.mean(sers)), stderr, sers)


def train(cfg: TrainConfig, on_epoch=None, initial=None, evaluate_initial=True,
          monitor=None) -> TrainResult:
    """Run ``cfg.epochs`` epochs; returns the stacks with the best test SER.

    Test SER is measured after every epoch on a fixed set of held-out
    channels; the winning stacks are then re-scored on a second, unseen set
    (``result.final``) so the reported figure carries no selection bias.
    ``on_epoch(record)`` is called after every epoch. ``initial`` overrides
    the random initial stacks. ``monitor(epoch, stack_t, stack_r)`` sees the
    current (not best) stacks after every epoch, read-only.
    """
    cfg.validate()
    link = Link.from_config(cfg)
    if initial is None:
        stack_t, stack_r = init_phases(cfg, wf.realization_rng(cfg.seed, INIT_DOMAIN, 0))
    else:
        stack_t, stack_r = initial[0].copy(), initial[1].copy()
    result = TrainResult(stack_t.copy(), stack_r.copy())
    if cfg.epochs == 0:
        return result
    best = float("inf")
    if evaluate_initial:
        result.initial_test_ser = evaluate(stack_t, stack_r, cfg, link=link).ser
    opt = make_optimizer(cfg)
    item = 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        losses, sers = [], []
        for _ in range(cfg.batches_per_epoch):
            state = LinkState.build(stack_t, stack_r, link.kernels_t, link.kernels_r)
            loss, g_phi, g_theta, ser = batch_step(link, state, cfg.objective, item,
                                                   cfg.batch_size)
            item += cfg.batch_size
            if not np.isfinite(loss) or not (np.all(np.isfinite(g_phi))
                                             and np.all(np.isfinite(g_theta))):
                raise DivergenceError(epoch, loss)
            opt.step([stack_t, stack_r], [g_phi, g_theta])
            losses.append(loss)
            sers.append(ser)
            log.debug("epoch %d loss %.6g |grad| %.3e", epoch, loss,
                      float(np.sqrt(np.sum(g_phi ** 2) + np.sum(g_theta ** 2))))
        for stack in (stack_t, stack_r):
            if not np.all((stack.angles >= 0) & (stack.angles < sisnet.TWO_PI)):
                raise DivergenceError(epoch, float("nan"))
        ev = evaluate(stack_t, stack_r, cfg, link=link)
        rec = EpochRecord(epoch, float(np.mean(losses)), float(np.mean(sers)), ev.ser,
                          ev.stderr, time.perf_counter() - t0)
        result.history.append(rec)
        log.info("epoch %d loss %.6g train_ser %.4f test_ser %.4f", epoch, rec.train_loss,
                 rec.train_ser, rec.test_ser)
        if ev.ser < best:
            best = ev.ser
            result.stack_t, result.stack_r = stack_t.copy(), stack_r.copy()
            result.best_epoch = epoch
        if on_epoch is not None:
            on_epoch(rec)
        if monitor is not None:
            monitor(epoch, stack_t, stack_r)
    result.final = evaluate(result.stack_t, result.stack_r, cfg, link=link, domain=FINAL_DOMAIN)
    return result
