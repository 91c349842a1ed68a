import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import directed_hausdorff

from deformable.bench import circle_setup
from deformable.forces import ElectroParams, HeatParams, UnitedParams, build_force_source
from deformable.geometry import circle_polygon, densify, fit_circle, signed_area
from deformable.grid import ScalarField, VectorField
from deformable.levelset import (EvolutionTerminated, GacParams, LevelSet, OpenContourError,
                                 advection_term, central_gradient, curvature_field, eikonal_error,
                                 enclosed_area, evolve_gac, extract_zero_contour, gac_step,
                                 init_from_contour, needs_rebuild, rebuild_band,
                                 zero_crossing_loops)
from deformable.snakes import Contour


def hausdorff(a: Contour, b: Contour) -> float:
    A, B = densify(a.vertices, 0.1), densify(b.vertices, 0.1)
    return max(directed_hausdorff(A, B)[0], directed_hausdorff(B, A)[0])


def circle_ls(r=10.0, center=(32, 32), bw=5.0, n=400, shape=(64, 64)):
    return init_from_contour(Contour(circle_polygon(center, r, n)), shape, bw)


def star_polygon(rng, center=(32, 32), n=96):
    """Star-shaped curve with a random low-order Fourier radius, sampled as a polygon."""
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    r = np.full(n, 14.0)
    for k in (2, 3, 4, 5):
        r += rng.uniform(0, 1.5 / (k - 1)) * np.cos(k * theta + rng.uniform(0, 2 * np.pi))
    return np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)])


def analytic_sdf(r, center=(32, 32), shape=(64, 64)):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    return r - np.hypot(xx - center[0], yy - center[1])


# --- params -------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(dt=0), dict(band_width=2), dict(reinit_trigger=5),
                                dict(reinit_every=-1), dict(advection="weno"), dict(max_iters=-1),
                                dict(tol_window=0)])
def test_gac_params_validation(kw):
    with pytest.raises(ValueError):
        GacParams(**kw)


# --- initialization -----------------------------------------------------------

def test_circle_signed_distance_values():
    ls = circle_ls(10, bw=5)
    assert ls.phi[32, 32] == 5.0
    assert abs(ls.phi[32, 42]) <= 0.1
    assert abs(ls.phi[32, 45] + 3) <= 0.15
    assert ls.phi[0, 0] == -5.0


def test_band_covers_zero_level():
    ls = circle_ls(10, bw=4)
    sign_change = np.zeros_like(ls.band)
    s = ls.phi > 0
    sign_change[:, :-1] |= s[:, :-1] != s[:, 1:]
    sign_change[:-1, :] |= s[:-1, :] != s[1:, :]
    assert np.all(ls.band[sign_change])


def test_eikonal_after_init():
    ls = circle_ls(10, bw=5)
    assert eikonal_error(ls) <= 0.1


def test_init_matches_analytic_distance():
    ls = circle_ls(12, bw=6, n=2000)
    ref = analytic_sdf(12)
    sel = np.abs(ref) < 5
    assert np.abs(ls.phi[sel] - ref[sel]).max() < 0.01


def test_far_region_signs_for_annulus_like_shape():
    # a U shape: its concave pocket is outside, far from the curve
    pts = np.array([[10, 10], [50, 10], [50, 50], [40, 50], [40, 20], [20, 20], [20, 50], [10, 50]], float)
    ls = init_from_contour(Contour(pts), (64, 64), 3)
    assert ls.phi[40, 30] == -3  # inside the pocket -> outside the shape
    assert ls.phi[15, 30] > 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_round_trip_hausdorff(seed):
    c = Contour(star_polygon(np.random.default_rng(seed)))
    ls = init_from_contour(c, (64, 64), 5)
    assert hausdorff(extract_zero_contour(ls), c) < 0.5


def test_round_trip_t_polygon():
    from deformable.grid import synth_t_shape
    _, poly = synth_t_shape()
    c = Contour(poly)
    assert hausdorff(extract_zero_contour(init_from_contour(c, (128, 128), 5)), c) < 0.5


def test_round_trip_ten_fixed_stars():
    for seed in range(10):
        c = Contour(star_polygon(np.random.default_rng(1000 + seed)))
        ls = init_from_contour(c, (64, 64), 5)
        assert hausdorff(extract_zero_contour(ls), c) < 0.5


# --- curvature ----------------------------------------------------------------

@pytest.mark.parametrize("r", [10, 20])
def test_curvature_of_circle(r):
    ls = circle_ls(r, bw=5, n=2000, shape=(80, 80), center=(40, 40))
    k = curvature_field(ls).values
    near = np.abs(ls.phi) < 0.5
    assert np.all(np.abs(k[near] + 1.0 / r) <= 0.01)


def test_curvature_of_plane_is_zero():
    xx = np.mgrid[0:20, 0:20][1].astype(float)
    phi = np.clip(10.3 - xx, -5, 5)
    ls = LevelSet(phi, np.abs(phi) < 5, 5.0)
    k = curvature_field(ls).values
    assert np.abs(k[ls.band]).max() < 1e-12


def test_curvature_outside_band_is_zero():
    ls = circle_ls(10, bw=3)
    k = curvature_field(ls).values
    assert not k[~ls.band].any()


# --- stepping -----------------------------------------------------------------

def test_balloon_speed():
    ls = circle_ls(10, bw=5)
    p = GacParams(alpha=0, beta=0.1, gamma=0, dt=0.5, max_iters=20, tol=0, reinit_every=0)
    radii = [fit_circle(extract_zero_contour(ls).vertices)[2]]
    evolve_gac(ls, None, p, callback=lambda it, s: radii.append(fit_circle(extract_zero_contour(s).vertices)[2]))
    growth = (radii[-1] - radii[0]) / 20
    assert abs(growth - 0.05) <= 0.1 * 0.05
    rate = np.polyfit(0.5 * np.arange(21), radii, 1)[0]
    assert abs(rate - 0.1) <= 0.05 * 0.1


def test_deflating_balloon_shrinks():
    ls = circle_ls(10, bw=5)
    p = GacParams(alpha=0, beta=-0.2, gamma=0, dt=0.5, max_iters=10, tol=0)
    c, _ = evolve_gac(ls, None, p)
    assert abs(fit_circle(c.vertices)[2] - 9.0) < 0.1


def test_curvature_flow_radius_law():
    r0, alpha, dt = 15.0, 1.0, 0.2
    ls = circle_ls(r0, bw=10)
    p = GacParams(alpha=alpha, beta=0, gamma=0, dt=dt, band_width=10, reinit_every=0,
                  max_iters=int((r0 ** 2 - 25) / (2 * alpha) / dt), tol=0)
    errs = []

    def check(it, s):
        if it % 10 == 0:
            r = fit_circle(extract_zero_contour(s).vertices)[2]
            errs.append(abs(r - np.sqrt(r0 ** 2 - 2 * alpha * it * dt)) / np.sqrt(r0 ** 2 - 2 * alpha * it * dt))
    evolve_gac(ls, None, p, callback=check)
    assert len(errs) == p.max_iters // 10
    assert max(errs) < 0.02


def test_only_band_cells_change():
    ls = circle_ls(10, bw=3)
    rng = np.random.default_rng(0)
    f = VectorField(ScalarField(rng.normal(size=(64, 64))), ScalarField(rng.normal(size=(64, 64))))
    nxt = gac_step(ls, f, GacParams(alpha=0.3, beta=0.2, gamma=1, dt=0.1, band_width=3))
    assert np.array_equal(nxt.phi[~ls.band], ls.phi[~ls.band])
    assert not np.array_equal(nxt.phi[ls.band], ls.phi[ls.band])


def _rotated_gradient(phi):
    gx, gy = central_gradient(phi)
    return VectorField(ScalarField(-gy), ScalarField(gx))


def test_tangential_field_leaves_phi_unchanged():
    ls = circle_ls(10, bw=5)
    f = _rotated_gradient(ls.phi)
    p = GacParams(alpha=0, beta=0, gamma=1, dt=0.5, band_width=5, advection="central")
    cur = ls
    for _ in range(10):
        nxt = gac_step(cur, f, p)
        assert np.abs(nxt.phi - cur.phi)[cur.band].max() <= 1e-9
        cur = nxt


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_tangential_advection_exactly_zero_any_phi(seed):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(12, 15)) * rng.uniform(0.1, 10)
    f = _rotated_gradient(phi)
    term = advection_term(phi, f.fx.values, f.fy.values, GacParams(gamma=1.7, advection="central"))
    assert not term.any()


def test_sign_scheme_speed_independent_of_force_scale():
    rates = []
    for scale in (1.0, 10.0):
        ls = circle_ls(10, bw=5)
        yy, xx = np.mgrid[0:64, 0:64].astype(float)
        r = np.maximum(np.hypot(xx - 32, yy - 32), 1e-9)
        # outward radial force: F . grad(phi) < 0 on the band, so the front expands
        f = VectorField(ScalarField(scale * (xx - 32) / r * 0.3), ScalarField(scale * (yy - 32) / r * 0.3))
        p = GacParams(alpha=0, beta=0, gamma=0.2, dt=0.5, use_sign_scheme=True, max_iters=20, tol=0,
                      reinit_every=0)
        radii = [10.0]
        evolve_gac(ls, lambda it: f, p,
                   callback=lambda it, s: radii.append(fit_circle(extract_zero_contour(s).vertices)[2]))
        rates.append(np.polyfit(0.5 * np.arange(21), radii, 1)[0])
    assert abs(rates[0] - 0.2) <= 0.05 * 0.2
    assert abs(rates[1] - rates[0]) <= 0.05 * rates[0]


def test_sign_scheme_zero_where_orthogonal():
    phi = analytic_sdf(10)
    f = _rotated_gradient(phi)
    term = advection_term(phi, f.fx.values, f.fy.values, GacParams(gamma=1, use_sign_scheme=True))
    assert not term.any()


def test_upwind_advection_translates_plane():
    xx = np.mgrid[0:20, 0:30][1].astype(float)
    phi = np.clip(12.0 - xx, -5, 5)
    ls = LevelSet(phi, np.abs(phi) < 5, 5.0)
    f = VectorField(ScalarField(np.full((20, 30), 0.5)), ScalarField(np.zeros((20, 30))))
    nxt = gac_step(ls, f, GacParams(alpha=0, beta=0, gamma=1, dt=1.0))
    # phi_t = -F . grad phi = 0.5, so the interface moves right by 0.5
    inner = ls.band & (np.abs(phi) < 4)
    np.testing.assert_allclose(nxt.phi[inner], phi[inner] + 0.5, atol=1e-12)


# --- narrow band --------------------------------------------------------------

@pytest.fixture(scope="module")
def united_source():
    _, edge, _ = circle_setup()
    src, _ = build_force_source(edge, "united", ElectroParams(), HeatParams(), UnitedParams())
    return src


@pytest.mark.parametrize("bw", [3.0, 5.0])
def test_narrow_band_matches_full_grid(united_source, bw):
    c0 = Contour(circle_polygon((32, 32), 22, 140))
    p = GacParams(alpha=0.2, beta=0, gamma=1, dt=0.2, band_width=bw, max_iters=30, tol=0, reinit_every=0)
    a, ra = evolve_gac(init_from_contour(c0, (64, 64), bw), united_source, p)
    # band wider than the grid: every cell is updated and nothing is rebuilt
    pf = GacParams(alpha=0.2, beta=0, gamma=1, dt=0.2, band_width=200, max_iters=30, tol=0, reinit_every=0)
    full = init_from_contour(c0, (64, 64), 200)
    assert full.band.all()
    b, rb = evolve_gac(full, united_source, pf)
    assert rb.reinit_count == 0 and ra.reinit_count > 0
    assert hausdorff(a, b) < 0.2


def test_rebuild_idempotent_on_fresh_sdf():
    ls = circle_ls(10, bw=5)
    again = rebuild_band(ls)
    assert np.abs(again.phi - ls.phi)[ls.band].max() < 0.1


def test_rebuild_after_constant_shift_restores_eikonal():
    ls = circle_ls(10, bw=5)
    shifted = LevelSet(np.clip(ls.phi + 0.4, -5, 5), ls.band, 5.0)
    rebuilt = rebuild_band(shifted)
    assert eikonal_error(rebuilt) <= 0.1
    assert abs(fit_circle(extract_zero_contour(rebuilt).vertices)[2] - 10.4) < 0.05


def test_rebuild_all_positive_raises():
    ls = LevelSet(np.full((10, 10), 2.0), np.ones((10, 10), bool), 3.0)
    with pytest.raises(EvolutionTerminated):
        rebuild_band(ls)


def test_eikonal_holds_after_every_rebuild(united_source):
    c0 = Contour(circle_polygon((32, 32), 24, 150))
    errs = []
    orig = rebuild_band

    import deformable.levelset as lsmod

    def spy(ls):
        out = orig(ls)
        errs.append(eikonal_error(out))
        return out
    lsmod.rebuild_band = spy
    try:
        evolve_gac(init_from_contour(c0, (64, 64), 5), united_source,
                   GacParams(alpha=0.2, gamma=1, dt=0.2, max_iters=150, reinit_every=20))
    finally:
        lsmod.rebuild_band = orig
    assert len(errs) >= 3
    assert max(errs) <= 0.1


def test_needs_rebuild_trigger():
    ls = circle_ls(10, bw=5)
    assert not needs_rebuild(ls, 1.5)
    moved = LevelSet(np.clip(ls.phi + 4.0, -5, 5), ls.band, 5.0)
    assert needs_rebuild(moved, 1.5)


# --- extraction ---------------------------------------------------------------

def test_extract_circle_vertices_on_radius():
    ls = circle_ls(10, bw=5)
    v = extract_zero_contour(ls).vertices
    assert np.abs(np.hypot(v[:, 0] - 32, v[:, 1] - 32) - 10).max() <= 0.1


def test_extract_analytic_circle():
    phi = analytic_sdf(10)
    v = extract_zero_contour(LevelSet(np.clip(phi, -5, 5), np.abs(phi) < 5, 5.0)).vertices
    assert np.abs(np.hypot(v[:, 0] - 32, v[:, 1] - 32) - 10).max() <= 0.1


def test_extract_open_chain_rejected():
    xx = np.mgrid[0:16, 0:16][1].astype(float)
    phi = np.clip(xx - 5.5, -3, 3)
    with pytest.raises(OpenContourError):
        extract_zero_contour(LevelSet(phi, np.abs(phi) < 3, 3.0))


def test_extract_no_crossing():
    with pytest.raises(EvolutionTerminated):
        extract_zero_contour(LevelSet(np.full((8, 8), -1.0), np.zeros((8, 8), bool), 3.0))


def test_extract_returns_largest_component():
    phi = np.maximum(analytic_sdf(4, center=(12, 12)), analytic_sdf(9, center=(40, 40)))
    c = extract_zero_contour(LevelSet(np.clip(phi, -5, 5), np.abs(phi) < 5, 5.0))
    x, y, r = fit_circle(c.vertices)
    assert abs(x - 40) < 0.05 and abs(r - 9) < 0.1


def test_saddle_resolved_by_centre_average():
    phi = -np.ones((6, 6))
    phi[2, 2] = phi[3, 3] = 1.0
    phi[2, 3] = phi[3, 2] = -0.5
    # centre average 0.25 > 0: the two inside cells connect into one loop
    assert [len(loop) for loop in zero_crossing_loops(phi)] == [8]
    phi[2, 3] = phi[3, 2] = -2.0
    assert sorted(len(loop) for loop in zero_crossing_loops(phi)) == [4, 4]
    c = extract_zero_contour(LevelSet(phi, np.ones((6, 6), bool), 3.0))
    assert len(c) == 4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_extracted_contour_is_ccw_and_closed(seed):
    c = Contour(star_polygon(np.random.default_rng(seed)))
    out = extract_zero_contour(init_from_contour(c, (64, 64), 4))
    assert signed_area(out.vertices) > 0
    gaps = np.linalg.norm(np.roll(out.vertices, -1, axis=0) - out.vertices, axis=1)
    assert gaps.max() < 1.5


# --- evolution ----------------------------------------------------------------

def test_gac_united_circle_accuracy(united_source):
    from deformable.bench import boundary_error
    _, _, truth = circle_setup()
    ls = init_from_contour(Contour(circle_polygon((32, 32), 25, 200)), (64, 64), 5)
    c, rep = evolve_gac(ls, united_source, GacParams(alpha=0.2, gamma=1, dt=0.2, max_iters=2000))
    assert rep.converged
    assert boundary_error(c, truth)[0] < 1.0


def test_max_iters_zero_returns_initial_contour():
    ls = circle_ls(10, bw=5)
    c, rep = evolve_gac(ls, None, GacParams(max_iters=0))
    assert rep.iterations == 0 and not rep.converged
    assert hausdorff(c, extract_zero_contour(ls)) == 0


def test_vanishing_contour_terminates():
    ls = circle_ls(3, bw=3)
    with pytest.raises(EvolutionTerminated):
        evolve_gac(ls, None, GacParams(alpha=0, beta=-1.0, gamma=0, dt=0.5, band_width=3, max_iters=50))


def test_enclosed_area_of_circle():
    assert abs(enclosed_area(analytic_sdf(10)) - np.pi * 100) < 0.005 * np.pi * 100
