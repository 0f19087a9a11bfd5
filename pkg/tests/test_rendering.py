"""Ray caster, differentiable renderers and the camera-aligned embedding."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vglab.autodiff as ad
from vglab.autodiff import Tensor, check_gradients
from vglab.errors import ShapeError
from vglab.rendering import (
    GridKind,
    ImageBuf,
    Viewpoint,
    VoxelGrid,
    absorption_compose,
    absorption_render,
    emission_absorption_compose,
    emission_absorption_render,
    gather_ray_samples,
    normal_map_render,
    raycast_batch,
    raycast_render,
    read_vox,
    rotate_embed,
    visual_hull_compose,
    visual_hull_render,
    write_vox,
)

AMBIENT, DIFFUSE = 0.15, 0.85


def centered_cube(v, half):
    vals = np.zeros((v, v, v))
    lo, hi = v // 2 - half, v // 2 + half
    vals[lo:hi, lo:hi, lo:hi] = 1.0
    return VoxelGrid.binary(vals)


# ------------------------------------------------------------- ray caster

def test_empty_grid_renders_background():
    img = raycast_render(VoxelGrid.binary(np.zeros((8, 8, 8))), Viewpoint(30, 20), 16, 16)
    assert img.pixels.max() == 0.0


def test_frontal_face_shading_matches_hand_evaluation():
    # camera on +x at elevation 0; entry face normal (1,0,0); both lights sit
    # at azimuth +-45, elevation -45, so n . l = cos(45)^2 = 0.5 for each
    g = centered_cube(9, 2)
    img = raycast_render(g, Viewpoint(0.0, 0.0), 33, 33)
    expected = AMBIENT + 2 * (DIFFUSE / 2) * 0.5
    assert img.pixels[16, 16] == pytest.approx(expected, abs=1e-12)


def test_raycast_rejects_continuous_grids():
    g = VoxelGrid.continuous(np.full((4, 4, 4), 0.5))
    with pytest.raises(ShapeError):
        raycast_render(g, Viewpoint(0, 0), 8, 8)


def test_raycast_referential_transparency():
    g = centered_cube(8, 3)
    view = Viewpoint(123.0, 41.0)
    a = raycast_render(g, view, 24, 24).pixels
    b = raycast_render(g, view, 24, 24).pixels
    assert np.array_equal(a, b)


def test_raycast_azimuth_periodicity_bit_identical():
    # dyadic azimuths survive the +360 round trip exactly
    g = centered_cube(8, 3)
    for az in (0.0, 45.0, 33.25, 287.5):
        a = raycast_render(g, Viewpoint(az, 25.0), 16, 16).pixels
        b = raycast_render(g, Viewpoint(az + 360.0, 25.0), 16, 16).pixels
        assert np.array_equal(a, b)


def test_raycast_batch_matches_single_calls():
    rng = np.random.default_rng(3)
    grids = np.stack([(rng.uniform(size=(8, 8, 8)) > 0.7).astype(float) for _ in range(3)])
    views = [Viewpoint(rng.uniform(0, 360), rng.uniform(-30, 60)) for _ in range(3)]
    batch = raycast_batch(grids, views, 16, 16)
    for i in range(3):
        single = raycast_render(VoxelGrid.binary(grids[i]), views[i], 16, 16).pixels
        assert np.array_equal(batch[i], single)


def test_normal_map_background_and_unit_normals():
    g = centered_cube(8, 3)
    nm = normal_map_render(g, Viewpoint(33.0, 25.0), 24, 24).pixels
    decoded = nm * 2.0 - 1.0
    lengths = np.linalg.norm(decoded, axis=2)
    hit = lengths > 0.5
    assert hit.any()
    np.testing.assert_allclose(lengths[hit], 1.0, atol=1e-9)
    assert np.allclose(nm[~hit], 0.5)


def test_normal_map_frontal_face_color():
    g = centered_cube(9, 2)
    nm = normal_map_render(g, Viewpoint(0.0, 0.0), 33, 33).pixels
    np.testing.assert_allclose(nm[16, 16], [0.5, 0.5, 1.0], atol=1e-12)


def _analytic_box_silhouette(view, height, width, lo, hi):
    from vglab.rendering import pixel_rays
    eye, dirs = pixel_rays(view, height, width)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
    t0 = (lo - eye) * inv
    t1 = (hi - eye) * inv
    near = np.where(np.isnan(np.minimum(t0, t1)), -np.inf, np.minimum(t0, t1)).max(axis=1)
    far = np.where(np.isnan(np.maximum(t0, t1)), np.inf, np.maximum(t0, t1)).min(axis=1)
    return ((near <= far) & (far > 0)).reshape(height, width)


def test_raycast_silhouette_matches_analytic_box():
    # closed-form ray-box intersection is an exact oracle for hit pixels
    v, half = 16, 5
    g = centered_cube(v, half)
    lo, hi = -half / v, half / v
    for view in (Viewpoint(0.0, 0.0), Viewpoint(90.0, 0.0), Viewpoint(0.0, 90.0)):
        shade = raycast_render(g, view, 32, 32).pixels
        expected = _analytic_box_silhouette(view, 32, 32, np.full(3, lo), np.full(3, hi))
        np.testing.assert_array_equal(shade > 0, expected)


def test_silhouette_consistency_axis_aligned():
    # on an axis-on view, the ray-cast silhouette and the AO model agree
    # about which pixels see the cube (geometry keeps pixel rays off the
    # half-voxel taper rim where finite sampling is ambiguous)
    g = centered_cube(16, 5)
    view = Viewpoint(0.0, 0.0)
    shade = raycast_render(g, view, 32, 32).pixels
    ao = absorption_render(g, view, 32, 32).pixels
    np.testing.assert_array_equal(shade > 0, ao > 0.99)


def test_raycast_vs_visual_hull_silhouette():
    g = centered_cube(16, 4)
    view = Viewpoint(0.0, 0.0)
    shade = raycast_render(g, view, 16, 16).pixels
    vh = visual_hull_render(g, view, 16, 16).pixels
    np.testing.assert_array_equal(shade > 0, vh > 0.5)


# ------------------------------------------------- differentiable models

def test_visual_hull_formula_values():
    one = visual_hull_compose(Tensor([[1.0]]), tau=1.0)
    assert one.item() == pytest.approx(1.0 - np.exp(-1.0))
    zero = visual_hull_compose(Tensor([[0.0, 0.0]]), tau=0.5)
    assert zero.item() == 0.0
    with pytest.raises(ShapeError):
        visual_hull_compose(Tensor([[1.0]]), tau=0.0)


def test_absorption_formula_values():
    assert absorption_compose(Tensor([[0.5, 0.5]])).item() == pytest.approx(0.75)
    assert absorption_compose(Tensor([[0.0, 0.0, 0.0]])).item() == 0.0
    assert absorption_compose(Tensor([[1.0, 0.3]])).item() == 1.0


def test_emission_absorption_reduces_to_absorption(rng):
    va = Tensor(rng.uniform(0.05, 0.95, size=(5, 9)))
    ve = Tensor(np.ones((5, 9)))
    ea = emission_absorption_compose(va, ve, 0.0).numpy()
    ao = absorption_compose(va).numpy()
    assert np.abs(ea - ao).max() < 1e-12


def test_emission_absorption_near_identity_small_eps(rng):
    va = Tensor(rng.uniform(0.05, 0.95, size=(5, 9)))
    ve = Tensor(np.ones((5, 9)))
    ea = emission_absorption_compose(va, ve, 1e-8).numpy()
    ao = absorption_compose(va).numpy()
    assert np.abs(ea - ao).max() < 1e-6


def test_emission_absorption_zero_absorption_is_zero():
    va = Tensor(np.zeros((2, 4)))
    ve = Tensor(np.ones((2, 4)))
    ea = emission_absorption_compose(va, ve, 1e-8).numpy()
    np.testing.assert_array_equal(ea, 0.0)


def test_emission_absorption_rejects_negative_eps():
    with pytest.raises(ShapeError):
        emission_absorption_compose(Tensor([[0.5]]), Tensor([[1.0]]), -1.0)


def test_ea_render_matches_ao_render(rng):
    vals = rng.uniform(0.1, 0.9, size=(8, 8, 8))
    ga = VoxelGrid.continuous(vals)
    ge = VoxelGrid.continuous(np.ones((8, 8, 8)))
    view = Viewpoint(70.0, 30.0)
    ea = emission_absorption_render(ga, ge, view, 16, 16, eps=0.0).pixels
    ao = absorption_render(ga, view, 16, 16).pixels
    assert np.abs(ea - ao).max() < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 7 ** 3 - 1), st.floats(0.05, 0.45))
def test_visual_hull_monotone_in_voxel_values(flat_index, bump):
    rng = np.random.default_rng(flat_index)
    vals = rng.uniform(0.0, 0.5, size=(7, 7, 7))
    view = Viewpoint(40.0, 20.0)
    base = visual_hull_render(VoxelGrid.continuous(vals), view, 12, 12).pixels
    vals2 = vals.copy()
    vals2.flat[flat_index] += bump
    raised = visual_hull_render(VoxelGrid.continuous(vals2), view, 12, 12).pixels
    assert (raised >= base - 1e-12).all()


def test_gradcheck_differentiable_renderers(rng):
    v = 4
    grids = Tensor(rng.uniform(0.1, 0.9, size=(1, v, v, v)), requires_grad=True)
    views = [Viewpoint(25.0, 30.0)]

    def vh():
        s = gather_ray_samples(grids, views, 6, 6)
        return ad.mean(ad.square(visual_hull_compose(s, tau=1.0)))

    def aoc():
        s = gather_ray_samples(grids, views, 6, 6)
        return ad.mean(ad.square(absorption_compose(s)))

    def eac():
        s = gather_ray_samples(grids, views, 6, 6)
        return ad.mean(ad.square(emission_absorption_compose(
            s, 1.0 - 0.5 * s, 1e-3)))

    for fn in (vh, aoc, eac):
        check_gradients(fn, [grids])


# --------------------------------------------------------------- embedding

def test_rotate_embed_identity_alignment():
    # azimuth 0 / elevation 0 maps output axes onto signed world axes, so the
    # resample lands exactly on voxel centers: a permuted, centered copy
    rng = np.random.default_rng(5)
    v = 4
    vals = rng.uniform(size=(v, v, v))
    out = rotate_embed(VoxelGrid.continuous(vals), Viewpoint(0.0, 0.0)).numpy()[0]
    assert out.shape == (2 * v, 2 * v, 2 * v)
    np.testing.assert_allclose(out.sum(), vals.sum(), rtol=1e-12)
    nz = np.argwhere(out > 0)
    assert nz.min() >= v // 2 and nz.max() < v // 2 + v


def test_rotate_embed_full_turn_matches_identity_pose():
    rng = np.random.default_rng(6)
    vals = rng.uniform(size=(5, 5, 5))
    g = VoxelGrid.continuous(vals)
    a = rotate_embed(g, Viewpoint(12.5, 33.0)).numpy()
    b = rotate_embed(g, Viewpoint(12.5 + 360.0, 33.0)).numpy()
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_rotate_embed_mass_preservation_sphere():
    v = 16
    ax = (np.arange(v) + 0.5) / v - 0.5
    x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
    sphere = ((x ** 2 + y ** 2 + z ** 2) < 0.35 ** 2).astype(float)
    g = VoxelGrid.continuous(sphere)
    rng = np.random.default_rng(7)
    for _ in range(5):
        view = Viewpoint(rng.uniform(0, 360), rng.uniform(-60, 60))
        out = rotate_embed(g, view).numpy()
        assert abs(out.sum() - sphere.sum()) / sphere.sum() < 0.02


def test_rotate_embed_promotes_binary():
    g = centered_cube(4, 1)
    out = rotate_embed(g, Viewpoint(45.0, 30.0))
    assert out.shape == (1, 8, 8, 8)


# ------------------------------------------------------------------ files

def test_vox_roundtrip(tmp_path, rng):
    vals = rng.uniform(size=(6, 6, 6)).astype(np.float32)
    g = VoxelGrid.continuous(vals)
    p = tmp_path / "g.vox"
    write_vox(g, p)
    g2 = read_vox(p)
    assert g2.kind is GridKind.CONTINUOUS
    np.testing.assert_array_equal(g2.values, vals)


def test_vox_binary_kind_detection(tmp_path):
    g = centered_cube(5, 2)
    p = tmp_path / "b.vox"
    write_vox(g, p)
    assert read_vox(p).kind is GridKind.BINARY


def test_image_buf_validation():
    with pytest.raises(ShapeError):
        ImageBuf(np.full((4, 4), 2.0))
    with pytest.raises(ShapeError):
        ImageBuf(np.full((4, 4, 2), 0.5))
