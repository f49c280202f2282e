"""Fixed propagation physics: inter-plane diffraction kernels, the Rician
surface-to-surface channel and receiver noise."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cxmat
from .errors import GeometryError
from .geometry import SisGeometry, pairwise_distance_and_angle

TRAIN_DOMAIN = 0
TEST_DOMAIN = 1


@dataclass(frozen=True)
class PropagationKernel:
    matrix: np.ndarray  # (dst_count, src_count)
    src: int
    dst: int
    alpha2: float


def diffraction_coefficients(r, cos_chi, wavelength, alpha2):
    """Rayleigh-Sommerfeld coupling for distances ``r`` and obliquity ``cos_chi``."""
    r = np.asarray(r, dtype=float)
    area = (alpha2 * wavelength) ** 2
    amp = area * np.asarray(cos_chi, dtype=float) / r
    return amp * (1.0 / (2 * np.pi * r) - 1j / wavelength) * np.exp(2j * np.pi * r / wavelength)


def build_kernel(geometry: SisGeometry, src: int, dst: int) -> PropagationKernel:
    """Kernel from plane ``src`` to the adjacent plane ``dst`` (see ``SisGeometry.plane``)."""
    n_planes = geometry.layers + 1
    if not (0 <= src < n_planes and dst == src + 1 < n_planes):
        raise GeometryError(f"planes {src}->{dst} are not adjacent in signal order")
    a = geometry.plane(src)
    b = geometry.plane(dst)
    r, cos_chi = pairwise_distance_and_angle(a[None, :, :], b[:, None, :])
    m = diffraction_coefficients(r, cos_chi, geometry.wavelength, geometry.alpha2)
    m.setflags(write=False)
    return PropagationKernel(m, src, dst, geometry.alpha2)


def chain_kernels(geometry: SisGeometry) -> list[PropagationKernel]:
    """The L kernels of one side in signal order (W^1..W^L or E^1..E^L)."""
    return [build_kernel(geometry, l, l + 1) for l in range(geometry.layers)]


def geometry_hash(geometry: SisGeometry) -> str:
    h = hashlib.sha256()
    h.update(repr((geometry.side, geometry.layers, geometry.elements, geometry.wavelength,
                   geometry.alpha1, geometry.alpha2, geometry.alpha3, geometry.anchor)).encode())
    h.update(np.ascontiguousarray(geometry.element_coords).tobytes())
    h.update(np.ascontiguousarray(geometry.antenna_coords).tobytes())
    return h.hexdigest()[:16]


def cached_chain_kernels(geometry: SisGeometry, cache_dir) -> list[PropagationKernel]:
    """``chain_kernels`` backed by text dumps under ``cache_dir``."""
    cache = Path(cache_dir) / geometry_hash(geometry)
    kernels = []
    for l in range(geometry.layers):
        path = cache / f"kernel_{l}_{l + 1}.txt"
        if path.exists():
            m = cxmat.load_matrix(path.read_text())
            m.setflags(write=False)
            kernels.append(PropagationKernel(m, l, l + 1, geometry.alpha2))
        else:
            k = build_kernel(geometry, l, l + 1)
            cache.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(cxmat.dump_matrix(k.matrix))
            tmp.replace(path)
            kernels.append(k)
    return kernels


# -- Rician channel -----------------------------------------------------------

@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray  # (N_r, N_t)
    kappa: float
    d: float
    seed_tag: int = 0


def path_loss_amplitude(wavelength: float, d: float) -> float:
    if d <= 0:
        raise GeometryError("surface separation must be positive")
    return wavelength / (4 * np.pi * d)


def surface_separation(geo_t: SisGeometry, geo_r: SisGeometry) -> float:
    ct = geo_t.layer_center(geo_t.facing_layer)
    cr = geo_r.layer_center(geo_r.facing_layer)
    return float(np.linalg.norm(cr - ct))


def los_offsets(geometry: SisGeometry) -> np.ndarray:
    """Per-element LOS offset in wavelengths, measured from the layer center.

    The offset is the sum of the y and z displacements; swapping this for
    another convention only touches this function.
    """
    layer = geometry.element_coords[geometry.facing_layer]
    rel = layer[:, 1:] - layer[:, 1:].mean(axis=0)
    return (rel[:, 0] + rel[:, 1]) / geometry.wavelength


def los_matrix(geo_t: SisGeometry, geo_r: SisGeometry) -> np.ndarray:
    """Unit-modulus rank-1 line-of-sight term, shape (N_r, N_t)."""
    a_t = np.exp(-2j * np.pi * geo_t.alpha2 * los_offsets(geo_t))
    a_r = np.exp(-2j * np.pi * geo_r.alpha2 * los_offsets(geo_r))
    return np.outer(a_r, a_t)


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circular complex Gaussian samples with total variance ``variance``."""
    g = rng.standard_normal(tuple(shape) + (2,))
    return (g[..., 0] + 1j * g[..., 1]) * math.sqrt(variance / 2.0)


def rician_weights(kappa: float):
    if kappa < 0:
        raise ValueError("Rician factor must be non-negative")
    if math.isinf(kappa):
        return 1.0, 0.0
    return math.sqrt(kappa / (kappa + 1.0)), math.sqrt(1.0 / (kappa + 1.0))


def sample_channel(geo_t: SisGeometry, geo_r: SisGeometry, kappa: float,
                   rng: np.random.Generator, seed_tag: int = 0, los=None) -> ChannelRealization:
    w_los, w_nlos = rician_weights(kappa)
    d = surface_separation(geo_t, geo_r)
    c = path_loss_amplitude(geo_t.wavelength, d)
    if los is None:
        los = los_matrix(geo_t, geo_r)
    scatter = complex_normal(rng, (geo_r.elements, geo_t.elements))
    H = c * (w_los * los + w_nlos * scatter)
    return ChannelRealization(H, float(kappa), d, seed_tag)


def realization_rng(base_seed: int, domain: int, index: int) -> np.random.Generator:
    """Independent stream for realization ``index`` of a seed domain.

    Streams depend only on (seed, domain, index), never on scheduling, so
    serial and parallel runs draw identical channels.
    """
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(domain), int(index)]))


def sample_noise(m_r: int, t: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    if not variance > 0:
        raise ValueError("noise variance must be positive; use the noiseless path instead")
    return complex_normal(rng, (m_r, t), variance)
