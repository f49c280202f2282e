import numpy as np
import pytest

from sis_forge.errors import GeometryError
from sis_forge.geometry import build_geometry, pairwise_distance_and_angle, wavelength_for

LAM = wavelength_for(3e9)


def default_geometry(side="tx", layers=3, n=484, anchor=(0, 0, 15)):
    return build_geometry(side, 4, n, layers, LAM, 4, 0.5, 6, anchor)


def test_484_elements_make_22_by_22_grid():
    g = default_geometry()
    assert g.grid == 22
    ys = np.unique(np.round(g.element_coords[0, :, 1], 12))
    zs = np.unique(np.round(g.element_coords[0, :, 2], 12))
    assert len(ys) == 22 and len(zs) == 22


def test_three_layers_six_wavelengths_gap_is_three():
    g = default_geometry()
    assert g.layer_gap == pytest.approx(3 * LAM)
    xs = g.element_coords[:, 0, 0]
    np.testing.assert_allclose(np.diff(xs), 3 * LAM, rtol=1e-12)


def test_two_by_two_offsets():
    g = build_geometry("tx", 1, 4, 1, 1.0, 1, 0.5, 0, (0, 0, 0))
    np.testing.assert_allclose(sorted(set(g.element_coords[0, :, 1])), [-0.25, 0.25])
    np.testing.assert_allclose(sorted(set(g.element_coords[0, :, 2])), [-0.25, 0.25])


def test_in_row_and_row_spacing():
    g = build_geometry("tx", 2, 9, 2, 0.1, 4, 0.5, 6)
    c = g.element_coords[0]
    assert c[1, 1] - c[0, 1] == pytest.approx(0.05)
    assert c[1, 2] == c[0, 2]
    assert c[3, 2] - c[0, 2] == pytest.approx(0.05)


def test_layer_one_at_standoff():
    g = default_geometry()
    assert g.element_coords[0, 0, 0] - g.antenna_coords[0, 0] == pytest.approx(4 * LAM)
    r = default_geometry("rx", anchor=(50, 0, 15))
    # the receive layer next to the antennas is the last one in signal order
    assert r.antenna_coords[0, 0] - r.element_coords[-1, 0, 0] == pytest.approx(4 * LAM)
    assert r.element_coords[0, 0, 0] < r.element_coords[-1, 0, 0]


def test_single_layer_ignores_thickness():
    g = build_geometry("tx", 1, 4, 1, LAM, 4, 0.5, 6)
    assert g.notes and "ignored" in g.notes[0]
    assert g.element_coords[0, 0, 0] == pytest.approx(4 * LAM)
    assert build_geometry("tx", 1, 4, 1, LAM, 4, 0.5, 0).notes == ()


@pytest.mark.parametrize("n", [2, 485, 0])
def test_non_square_rejected(n):
    with pytest.raises(GeometryError):
        build_geometry("tx", 1, n, 1, LAM, 1, 0.5, 1)


def test_bad_inputs():
    with pytest.raises(GeometryError):
        build_geometry("tx", 1, 4, 2, LAM, 1, 0.5, 0)
    with pytest.raises(GeometryError):
        build_geometry("tx", 1, 4, 0, LAM, 1, 0.5, 1)
    with pytest.raises(GeometryError):
        build_geometry("up", 1, 4, 1, LAM, 1, 0.5, 1)


def test_offsets_reflection_symmetric():
    g = default_geometry(n=49)
    off = g.element_offsets()
    key = lambda a: sorted(map(tuple, np.round(a, 12)))  # noqa: E731
    assert key(off) == key(off * [-1, 1]) == key(off * [1, -1])


def test_tx_rx_share_offsets():
    t = default_geometry("tx", n=25)
    r = default_geometry("rx", n=25, anchor=(50, 0, 15))
    np.testing.assert_allclose(t.element_offsets(), r.element_offsets(), atol=1e-12)


def test_antennas_on_z_axis_half_wavelength():
    g = default_geometry()
    np.testing.assert_allclose(np.diff(g.antenna_coords[:, 2]), LAM / 2)
    np.testing.assert_allclose(g.antenna_coords[:, :2], [[0, 0]] * 4)
    assert g.antenna_coords[:, 2].mean() == pytest.approx(15)


@pytest.mark.parametrize("q,r,c", [((1, 0, 0), 1, 1), ((0, 1, 0), 1, 0), ((3, 4, 0), 5, 0.6)])
def test_distance_and_angle(q, r, c):
    dist, cos_chi = pairwise_distance_and_angle((0, 0, 0), q, (1, 0, 0))
    assert dist == pytest.approx(r) and cos_chi == pytest.approx(c)


def test_coincident_points_rejected():
    with pytest.raises(GeometryError):
        pairwise_distance_and_angle((1, 2, 3), (1, 2, 3))


def test_dump_lists_every_element():
    g = build_geometry("tx", 1, 4, 2, 0.1, 1, 0.5, 1)
    lines = g.dump().splitlines()
    assert len(lines) == 8 and lines[0].startswith("1 0 ")
