"""Stacked surfaces as a complex-valued network with trainable phases.

Transmit chain: the field propagates from plane l-1 through ``W^l`` and
layer l then rotates row i by ``exp(1j*phi[l, i])``, giving
``P = Phi^L W^L ... Phi^1 W^1``. Receive chain: layer l rotates first and
``E^l`` carries the field to the next plane, giving
``Q = E^L Theta^L ... E^1 Theta^1``.

Gradient convention: for a real loss ``L`` of a complex array ``z`` the
seed is ``dL/dRe(z) + 1j*dL/dIm(z)`` (twice the conjugate Wirtinger
derivative), so that ``dL = Re(sum(conj(g) * dz))``. A linear map
``z = A u`` sends the seed back as ``A^H g``; a phase layer
``z = exp(1j*phi) * u`` contributes ``dL/dphi = sum_t Im(g * conj(z))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeError, SisError

TWO_PI = 2.0 * np.pi


@dataclass
class PhaseStack:
    side: str
    angles: np.ndarray  # (layers, elements), radians in [0, 2pi)

    def __post_init__(self):
        self.angles = np.array(self.angles, dtype=float, ndmin=2)
        if self.side not in ("tx", "rx"):
            raise ValueError(f"side must be 'tx' or 'rx', got {self.side!r}")
        self.wrap()

    @property
    def layers(self) -> int:
        return self.angles.shape[0]

    @property
    def elements(self) -> int:
        return self.angles.shape[1]

    def phasors(self) -> np.ndarray:
        return np.exp(1j * self.angles)

    def wrap(self):
        a = np.mod(self.angles, TWO_PI)
        # mod can round up to exactly 2pi for tiny negative inputs
        a[a >= TWO_PI] = 0.0
        self.angles = a
        return self

    def copy(self) -> "PhaseStack":
        return PhaseStack(self.side, self.angles.copy())

    @classmethod
    def zeros(cls, side, layers, elements):
        return cls(side, np.zeros((layers, elements)))

    def dumps(self) -> str:
        lines = [f"{self.side} {self.layers} {self.elements}"]
        lines.extend(f"{a:.17g}" for a in self.angles.ravel())
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PhaseStack":
        lines = text.split()
        side, layers, elements = lines[0], int(lines[1]), int(lines[2])
        vals = np.array([float(v) for v in lines[3:]])
        if vals.size != layers * elements:
            raise ValueError(f"checkpoint holds {vals.size} angles, header says {layers * elements}")
        return cls(side, vals.reshape(layers, elements))

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "PhaseStack":
        return cls.loads(Path(path).read_text())


def _matrices(kernels):
    return [getattr(k, "matrix", k) for k in kernels]


def _check_chain(stack, mats, x):
    if len(mats) != stack.layers:
        raise ShapeError(f"{stack.layers}-layer stack needs {stack.layers} kernels",
                         (len(mats),), (stack.layers,))
    if x.ndim != 2:
        raise ShapeError("wavefield must be 2-D", x.shape)
    rows = x.shape[0]
    for l, m in enumerate(mats):
        if stack.side == "tx":
            if m.shape[1] != rows or m.shape[0] != stack.elements:
                raise ShapeError(f"kernel {l + 1}", m.shape, (stack.elements, rows))
        else:
            if m.shape[1] != rows or rows != stack.elements:
                raise ShapeError(f"kernel {l + 1}", m.shape, (None, stack.elements))
        rows = m.shape[0]


def forward_field(stack: PhaseStack, kernels, x_in, tape: list | None = None) -> np.ndarray:
    """Push the columns of ``x_in`` through one side's surface stack.

    When ``tape`` is a list, the phase-stage output of every layer is
    appended to it (what ``backward_field`` needs).
    """
    mats = _matrices(kernels)
    x = np.asarray(x_in, dtype=np.complex128)
    _check_chain(stack, mats, x)
    ph = stack.phasors()
    for l, m in enumerate(mats):
        if stack.side == "tx":
            x = ph[l][:, None] * (m @ x)
            if tape is not None:
                tape.append(x)
        else:
            x = ph[l][:, None] * x
            if tape is not None:
                tape.append(x)
            x = m @ x
    return x


def backward_field(stack: PhaseStack, kernels, fields, grad_out):
    """Reverse pass matching ``forward_field``.

    Returns ``(grad_angles, grad_in)`` for the loss seed ``grad_out`` on the
    chain output.
    """
    mats = _matrices(kernels)
    if len(fields) != stack.layers:
        raise SisError("tape does not cover every layer")
    ph = stack.phasors()
    grad = np.zeros(stack.angles.shape)
    g = np.asarray(grad_out, dtype=np.complex128)
    for l in range(stack.layers - 1, -1, -1):
        z = fields[l]
        if stack.side == "tx":
            grad[l] = np.sum((g * z.conj()).imag, axis=1)
            g = mats[l].conj().T @ (ph[l].conj()[:, None] * g)
        else:
            g = mats[l].conj().T @ g
            grad[l] = np.sum((g * z.conj()).imag, axis=1)
            g = ph[l].conj()[:, None] * g
    return grad, g


def _receive_transposed(stack: PhaseStack, kernels):
    """Phase stack and kernels of the transposed receive chain ``Q^T``."""
    mats = [m.T for m in _matrices(kernels)[::-1]]
    return PhaseStack("tx", stack.angles[::-1]), mats


def transmit_transform(stack_t: PhaseStack, kernels_t, tape: list | None = None) -> np.ndarray:
    """``P`` (N_t x M_t)."""
    mats = _matrices(kernels_t)
    m_t = mats[0].shape[1]
    return forward_field(stack_t, mats, np.eye(m_t, dtype=np.complex128), tape)


def receive_transform_t(stack_r: PhaseStack, kernels_r, tape: list | None = None) -> np.ndarray:
    """``Q^T`` (N_r x M_r), built through M_r columns rather than N_r."""
    st, mats = _receive_transposed(stack_r, kernels_r)
    m_r = mats[0].shape[1]
    return forward_field(st, mats, np.eye(m_r, dtype=np.complex128), tape)


def backward_transmit(stack_t, kernels_t, tape, grad_p) -> np.ndarray:
    return backward_field(stack_t, kernels_t, tape, grad_p)[0]


def backward_receive_t(stack_r, kernels_r, tape, grad_qt) -> np.ndarray:
    st, mats = _receive_transposed(stack_r, kernels_r)
    return backward_field(st, mats, tape, grad_qt)[0][::-1]


def effective_transform(stack: PhaseStack, kernels) -> np.ndarray:
    """``P`` for a transmit stack, ``Q`` for a receive stack."""
    if stack.side == "tx":
        return transmit_transform(stack, kernels)
    return receive_transform_t(stack, kernels).T.copy()


def effective_channel(P, H, Q) -> np.ndarray:
    P, H, Q = (np.asarray(a, dtype=np.complex128) for a in (P, H, Q))
    if Q.shape[-1] != H.shape[-2] or H.shape[-1] != P.shape[-2]:
        raise ShapeError("effective channel Q H P", Q.shape, H.shape, P.shape)
    return Q @ (H @ P)


@dataclass
class ForwardTape:
    stack_t: PhaseStack
    stack_r: PhaseStack
    kernels_t: list
    kernels_r: list
    H: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    sigma: np.ndarray
    tx_fields: list = field(default_factory=list)
    rx_fields: list = field(default_factory=list)


def end_to_end(stack_t, stack_r, kernels_t, kernels_r, H, X, Z=None, tape: bool = False):
    """Received block ``Y = Q H P X + Z`` computed layer by layer.

    With ``tape=True`` the identity probe is carried alongside ``X`` so the
    same pass also yields ``Sigma`` and the returned :class:`ForwardTape`
    can backpropagate seeds on either ``Y`` or ``Sigma``. Returns ``Y`` or
    ``(Y, tape)``.
    """
    H = np.asarray(H, dtype=np.complex128)
    X = np.asarray(X, dtype=np.complex128)
    m_t = _matrices(kernels_t)[0].shape[1]
    if X.ndim != 2 or X.shape[0] != m_t:
        raise ShapeError("transmit block", X.shape, (m_t, None))
    if H.shape != (stack_r.elements, stack_t.elements):
        raise ShapeError("channel", H.shape, (stack_r.elements, stack_t.elements))
    t = X.shape[1]
    probe = np.concatenate([X, np.eye(m_t, dtype=np.complex128)], axis=1) if tape else X
    tx_fields = [] if tape else None
    rx_fields = [] if tape else None
    out = forward_field(stack_t, kernels_t, probe, tx_fields)
    out = forward_field(stack_r, kernels_r, H @ out, rx_fields)
    if Z is None:
        Z = np.zeros((out.shape[0], t), dtype=np.complex128)
    Z = np.asarray(Z, dtype=np.complex128)
    if Z.shape != (out.shape[0], t):
        raise ShapeError("noise block", Z.shape, (out.shape[0], t))
    Y = out[:, :t] + Z
    if not tape:
        return Y
    rec = ForwardTape(stack_t, stack_r, kernels_t, kernels_r, H, X, Z, Y, out[:, t:],
                      tx_fields, rx_fields)
    return Y, rec


def backprop_phases(tape: ForwardTape | None, grad_y, grad_sigma=None):
    """Phase gradients ``(dL/dphi, dL/dtheta)`` from seeds on ``Y`` and ``Sigma``."""
    if tape is None or not tape.tx_fields or not tape.rx_fields:
        raise SisError("backprop_phases needs a complete forward tape")
    grad_y = np.asarray(grad_y, dtype=np.complex128)
    if grad_y.shape != tape.Y.shape:
        raise ShapeError("Y seed", grad_y.shape, tape.Y.shape)
    if grad_sigma is None:
        grad_sigma = np.zeros(tape.sigma.shape, dtype=np.complex128)
    grad_sigma = np.asarray(grad_sigma, dtype=np.complex128)
    if grad_sigma.shape != tape.sigma.shape:
        raise ShapeError("Sigma seed", grad_sigma.shape, tape.sigma.shape)
    seed = np.concatenate([grad_y, grad_sigma], axis=1)
    g_theta, g = backward_field(tape.stack_r, tape.kernels_r, tape.rx_fields, seed)
    g = tape.H.conj().T @ g
    g_phi, _ = backward_field(tape.stack_t, tape.kernels_t, tape.tx_fields, g)
    return g_phi, g_theta


# -- batched path used by training --------------------------------------------

@dataclass
class LinkState:
    """Effective transforms of both stacks plus the tapes to differentiate them."""
    stack_t: PhaseStack
    stack_r: PhaseStack
    kernels_t: list
    kernels_r: list
    P: np.ndarray
    Qt: np.ndarray
    tape_t: list
    tape_r: list

    @classmethod
    def build(cls, stack_t, stack_r, kernels_t, kernels_r) -> "LinkState":
        tape_t, tape_r = [], []
        P = transmit_transform(stack_t, kernels_t, tape_t)
        Qt = receive_transform_t(stack_r, kernels_r, tape_r)
        return cls(stack_t, stack_r, kernels_t, kernels_r, P, Qt, tape_t, tape_r)

    def sigma(self, H):
        """``(Sigma, H P)`` for one channel or a (B, N_r, N_t) batch."""
        HP = np.asarray(H) @ self.P
        return self.Qt.T @ HP, HP

    def zero_grads(self):
        return (np.zeros(self.P.shape, dtype=np.complex128),
                np.zeros(self.Qt.shape, dtype=np.complex128))

    def accumulate(self, H, HP, grad_sigma, acc):
        """Add the transform seeds implied by ``grad_sigma`` to ``acc = (gP, gQt)``."""
        H = np.asarray(H)
        G = np.asarray(grad_sigma, dtype=np.complex128)
        if H.ndim == 2:
            H, HP, G = H[None], HP[None], G[None]
        qhg = self.Qt.conj() @ G                      # (B, N_r, M_t)
        gP, gQt = acc
        for b in range(H.shape[0]):                   # fixed order keeps sums reproducible
            gP += H[b].conj().T @ qhg[b]
            gQt += HP[b].conj() @ G[b].T
        return gP, gQt

    def phase_grads(self, acc):
        gP, gQt = acc
        g_phi = backward_transmit(self.stack_t, self.kernels_t, self.tape_t, gP)
        g_theta = backward_receive_t(self.stack_r, self.kernels_r, self.tape_r, gQt)
        return g_phi, g_theta


# -- gradient verification ----------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    samples: int
    worst: dict  # side -> (layer, element, analytic, numeric, rel_error)

    def lines(self):
        out = [f"max relative error {self.max_rel_error:.3e} over {self.samples} parameters"]
        for side, (l, i, a, n, e) in sorted(self.worst.items()):
            out.append(f"  worst {side}[{l},{i}]: analytic {a:+.6e} numeric {n:+.6e} rel {e:.3e}")
        return out


def finite_diff_check(stack_t, stack_r, loss_and_grad, sample_count, rng=None,
                      step=1e-6, floor=1e-4):
    """Compare analytic phase gradients with central differences.

    ``loss_and_grad(stack_t, stack_r) -> (value, g_phi, g_theta)``. Each
    sampled parameter's error is ``|a - n| / max(|a|, |n|, floor * scale)``
    with ``scale = max(1, |loss|)``: differences below the rounding level of
    the loss are judged in absolute terms (1e-9 absolute reads as 1e-5).
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    value, g_phi, g_theta = loss_and_grad(stack_t, stack_r)
    grads = {"phi": (stack_t, g_phi), "theta": (stack_r, g_theta)}
    scale = max(1.0, abs(float(value)))
    sizes = [g_phi.size, g_theta.size]
    total = sum(sizes)
    picks = rng.choice(total, size=min(sample_count, total), replace=False)
    worst = {}
    max_err = 0.0
    for p in picks:
        name = "phi" if p < sizes[0] else "theta"
        stack, g = grads[name]
        flat = p if name == "phi" else p - sizes[0]
        l, i = np.unravel_index(flat, g.shape)
        orig = stack.angles[l, i]
        stack.angles[l, i] = orig + step
        up = loss_and_grad(stack_t, stack_r)[0]
        stack.angles[l, i] = orig - step
        down = loss_and_grad(stack_t, stack_r)[0]
        stack.angles[l, i] = orig
        numeric = (up - down) / (2 * step)
        analytic = float(g[l, i])
        denom = max(abs(analytic), abs(numeric), floor * scale, np.finfo(float).tiny)
        err = abs(analytic - numeric) / denom if analytic != numeric else 0.0
        if name not in worst or err > worst[name][4]:
            worst[name] = (int(l), int(i), analytic, numeric, err)
        max_err = max(max_err, err)
    return GradCheckReport(max_err, len(picks), worst)
