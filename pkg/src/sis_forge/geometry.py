"""Physical layout of the antenna arrays and stacked surface layers.

Coordinates are in meters with the link running along +x. Each layer is a
square ``n x n`` grid in the y-z plane; element ``i`` sits in row
``i // n`` (z) and column ``i % n`` (y). Layers are stored in signal order:
on the transmit side layer 1 is nearest the antennas, on the receive side
layer 1 is the one facing the transmitter and the last layer is nearest
the receive antennas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

SPEED_OF_LIGHT = 299_792_458.0


def wavelength_for(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz


def grid_side(n: int) -> int:
    side = math.isqrt(n)
    if n < 1 or side * side != n:
        raise GeometryError(f"elements per layer must be a perfect square, got {n}")
    return side


def centered_offsets(count: int, spacing: float) -> np.ndarray:
    return (np.arange(count) - (count - 1) / 2.0) * spacing


@dataclass(frozen=True)
class SisGeometry:
    side: str
    layers: int
    elements: int
    wavelength: float
    alpha1: float
    alpha2: float
    alpha3: float
    anchor: tuple
    element_coords: np.ndarray = field(repr=False)  # (layers, elements, 3)
    antenna_coords: np.ndarray = field(repr=False)  # (antennas, 3)
    notes: tuple = ()

    @property
    def grid(self) -> int:
        return grid_side(self.elements)

    @property
    def antennas(self) -> int:
        return self.antenna_coords.shape[0]

    @property
    def layer_gap(self) -> float:
        if self.layers < 2:
            return 0.0
        return self.alpha3 * self.wavelength / (self.layers - 1)

    @property
    def facing_layer(self) -> int:
        """0-based index of the layer that faces the far node."""
        return self.layers - 1 if self.side == "tx" else 0

    def layer_center(self, layer: int) -> np.ndarray:
        return self.element_coords[layer].mean(axis=0)

    def element_offsets(self) -> np.ndarray:
        """(y, z) offsets of each element from the anchor, shape (N, 2)."""
        return self.element_coords[0, :, 1:] - np.asarray(self.anchor)[1:]

    def plane(self, index: int) -> np.ndarray:
        """Coordinates of plane ``index`` in signal order.

        Transmit side: plane 0 is the antenna array, planes 1..L the layers.
        Receive side: planes 0..L-1 are the layers, plane L the antennas.
        """
        if self.side == "tx":
            if index == 0:
                return self.antenna_coords
            return self.element_coords[index - 1]
        if index == self.layers:
            return self.antenna_coords
        return self.element_coords[index]

    def dump(self) -> str:
        lines = []
        for layer in range(self.layers):
            for i, (x, y, z) in enumerate(self.element_coords[layer]):
                lines.append(f"{layer + 1} {i} {x!r} {y!r} {z!r}")
        return "\n".join(lines) + "\n"


def build_geometry(side, m_antennas, n, layers, wavelength, alpha1, alpha2, alpha3,
                   anchor=(0.0, 0.0, 0.0)) -> SisGeometry:
    if side not in ("tx", "rx"):
        raise GeometryError(f"side must be 'tx' or 'rx', got {side!r}")
    if m_antennas < 1:
        raise GeometryError("need at least one antenna")
    if layers < 1:
        raise GeometryError("need at least one layer")
    if alpha2 <= 0:
        raise GeometryError("element spacing alpha2 must be positive")
    if layers >= 2 and alpha3 <= 0:
        raise GeometryError("thickness alpha3 must be positive for two or more layers")
    if wavelength <= 0:
        raise GeometryError("wavelength must be positive")
    side_n = grid_side(n)
    notes = ()
    if layers == 1 and alpha3:
        notes = ("single layer: thickness alpha3 ignored",)

    anchor = tuple(float(c) for c in anchor)
    ax, ay, az = anchor
    offs = centered_offsets(side_n, alpha2 * wavelength)
    zz, yy = np.meshgrid(offs, offs, indexing="ij")
    y = ay + yy.ravel()
    z = az + zz.ravel()

    gap = alpha3 * wavelength / (layers - 1) if layers >= 2 else 0.0
    depth = alpha1 * wavelength + gap * np.arange(layers)
    if side == "tx":
        xs = ax + depth
    else:
        # receive layer 1 faces the transmitter; the last one sits alpha1 from the antennas
        xs = ax - depth[::-1]

    coords = np.empty((layers, n, 3))
    coords[:, :, 0] = xs[:, None]
    coords[:, :, 1] = y[None, :]
    coords[:, :, 2] = z[None, :]

    ant = np.zeros((m_antennas, 3))
    ant[:, 0] = ax
    ant[:, 1] = ay
    ant[:, 2] = az + centered_offsets(m_antennas, wavelength / 2)

    coords.setflags(write=False)
    ant.setflags(write=False)
    return SisGeometry(side, layers, n, float(wavelength), float(alpha1), float(alpha2),
                       float(alpha3), anchor, coords, ant, notes)


def pairwise_distance_and_angle(p, q, plane_normal=(1.0, 0.0, 0.0)):
    """Distance from ``p`` to ``q`` and ``|cos|`` of the angle to the plane normal.

    Broadcasts over leading dimensions.
    """
    diff = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0):
        raise GeometryError("coincident points: propagation kernel is singular")
    normal = np.asarray(plane_normal, dtype=float)
    cos_chi = np.abs(diff @ normal) / r
    if np.ndim(r) == 0:
        return float(r), float(cos_chi)
    return r, cos_chi
