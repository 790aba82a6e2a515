import math

import numpy as np
import pytest

from svgseg.svg_ingest import (
    AffineTransform2D,
    NormalizedPath,
    apply_affine,
    canonicalize_commands,
)
from svgseg.path_geometry import (
    SampledPolyline,
    compile_path,
    contains,
    count_intersections,
    curvature_profile,
    is_contiguous,
    median_point,
    min_pairwise_distance,
    path_area,
    path_length,
    sample_equal_arclength,
)


def make_path(d):
    return NormalizedPath(0, canonicalize_commands(d))


LINE = make_path("M 0,0 L 2,0")
SQUARE = make_path("M 0,0 L 0,1 L 1,1 L 1,0 Z")
CIRCLE = make_path("M 1,0 A 1,1 0 0 1 0,1 A 1,1 0 0 1 -1,0 "
                   "A 1,1 0 0 1 0,-1 A 1,1 0 0 1 1,0 Z")
POINT = make_path("M 3,4")


# --- sampling ----------------------------------------------------------------

def test_sample_line_uniform():
    poly = sample_equal_arclength(LINE, 3)
    assert np.allclose(poly.points, [(0, 0), (1, 0), (2, 0)])
    assert poly.spacing == pytest.approx(1.0)
    assert not poly.closed


def test_sample_circle_quarters():
    # Analytic circle parameterization oracle: arc length s maps to angle s/r.
    poly = sample_equal_arclength(CIRCLE, 5)
    expect = np.array([(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)], dtype=float)
    assert np.abs(poly.points - expect).max() < 1e-3
    assert poly.closed


def test_sample_degenerate_point():
    poly = sample_equal_arclength(POINT, 4)
    assert np.allclose(poly.points, [(3, 4)] * 4)
    assert poly.spacing == 0


def test_sample_spacing_uniform_along_curve():
    path = make_path("M 0,0 C 0,2 3,2 3,0")
    poly = sample_equal_arclength(path, 33)
    gaps = np.hypot(*np.diff(poly.points, axis=0).T)
    # Chord lengths of equal arc-length steps agree to first order.
    assert gaps.std() / gaps.mean() < 1e-3


def test_sample_multi_subpath_breaks():
    path = make_path("M 0,0 L 1,0 M 5,5 L 6,5")
    poly = sample_equal_arclength(path, 10)
    assert len(poly.breaks) == 1
    p, q = poly.chords()
    # No chord bridges the two subpaths.
    assert (np.hypot(*(q - p).T) < 1).all()


# --- length and area ---------------------------------------------------------

def test_length_345():
    assert path_length(make_path("M 0,0 L 3,4")) == pytest.approx(5.0)


def test_length_square_perimeter():
    assert path_length(SQUARE) == pytest.approx(4.0)


def test_length_circle():
    assert path_length(CIRCLE) == pytest.approx(2 * math.pi, abs=1e-4)


def test_area_square():
    assert path_area(SQUARE) == pytest.approx(1.0)


def test_area_open_is_none():
    assert path_area(LINE) is None


def test_area_circle():
    assert path_area(CIRCLE) == pytest.approx(math.pi, abs=1e-3)


def test_area_unclosed_z_free_loop_is_none():
    # Endpoints coincide -> implicitly closed even without Z.
    loop = make_path("M 0,0 L 0,1 L 1,1 L 1,0 L 0,0")
    assert path_area(loop) == pytest.approx(1.0)


# --- curvature ---------------------------------------------------------------

def test_curvature_straight_lines_zero():
    for d in ("M 0,0 L 2,0", "M 0,0 L 1,1", "M 1,2 L 3,7", "M 0,0 L 3,4 L 6,8"):
        for n in (1, 4, 16, 64):
            prof = curvature_profile(make_path(d), n)
            assert (prof.samples == 0).all()


def test_curvature_hand_case():
    # Direct evaluation of the finite-difference formula at the triple
    # p0=(0,0), p1=(1,1), p2=(2,0): kappa = 4 / 2**1.5 = sqrt(2).
    path = make_path("M 0,0 L 1,1 L 2,0")
    prof = curvature_profile(path, 2)
    # t=0.5 evaluates exactly that stencil (t-dt=0, t=0.5, t+dt=1).
    assert prof.samples[0] == pytest.approx(math.sqrt(2), abs=1e-9)


def test_curvature_mirrored_sign():
    path = make_path("M 0,0 L 1,-1 L 2,0")
    prof = curvature_profile(path, 2)
    assert prof.samples[0] == pytest.approx(-math.sqrt(2), abs=1e-9)


def test_curvature_dt_and_count():
    prof = curvature_profile(CIRCLE, 10)
    assert prof.n_intervals == 10
    assert prof.dt == pytest.approx(0.1)
    assert len(prof.samples) == 10
    assert np.allclose(prof.t_values, np.arange(1, 11) / 10)


def test_curvature_circle_interior_constant():
    # The stencil formula converges to 2/r on a circle of radius r.
    prof = curvature_profile(CIRCLE, 64)
    interior = prof.samples[1:-1]
    assert np.allclose(interior, interior[0], rtol=1e-3)


def test_curvature_convergence_on_bezier():
    # Doubling n changes interior samples by < 5% once n >= 64.
    path = make_path("M 0,0 C 0,2 3,2 3,0")
    p64 = curvature_profile(path, 64).samples
    p128 = curvature_profile(path, 128).samples
    # Compare at shared parameter values t = i/64 (every 2nd sample of p128).
    shared = p128[1::2]
    interior = slice(4, 60)
    rel = np.abs(shared[interior] - p64[interior]) / np.abs(p64[interior])
    assert rel.max() < 0.05


def test_curvature_degenerate_no_nan():
    prof = curvature_profile(POINT, 8)
    assert np.isfinite(prof.samples).all()
    assert (prof.samples == 0).all()


# --- median ------------------------------------------------------------------

def test_median_line_midpoint():
    assert median_point(sample_equal_arclength(LINE, 3)) == (1, 0)


def test_median_robust_to_outlier():
    poly = SampledPolyline(np.array([(0, 0), (0, 0), (10, 10.0)]), 1.0, False)
    assert median_point(poly) == (0, 0)


def test_median_circle_center():
    poly = sample_equal_arclength(CIRCLE, 4096)
    med = median_point(poly)
    assert abs(med[0]) < 1e-3 and abs(med[1]) < 1e-3


# --- pairwise distance -------------------------------------------------------

def test_min_distance_parallel_lines():
    a = sample_equal_arclength(make_path("M 0,0 L 1,0"), 64)
    b = sample_equal_arclength(make_path("M 0,1 L 1,1"), 64)
    assert min_pairwise_distance(a, b) == pytest.approx(1.0)


def test_min_distance_crossing_near_zero():
    a = sample_equal_arclength(make_path("M 0,0 L 1,1"), 64)
    b = sample_equal_arclength(make_path("M 0,1 L 1,0"), 64)
    assert min_pairwise_distance(a, b) <= a.spacing


def test_min_distance_identical_zero():
    a = sample_equal_arclength(LINE, 64)
    assert min_pairwise_distance(a, a) == 0


# --- intersections -----------------------------------------------------------

def sampled(d, n=64):
    return sample_equal_arclength(make_path(d), n)


def test_intersections_single_crossing():
    assert count_intersections(sampled("M 0,0 L 1,1"), sampled("M 0,1 L 1,0")) == 1


def test_intersections_parallel_none():
    assert count_intersections(sampled("M 0,0 L 1,0"), sampled("M 0,1 L 1,1")) == 0


def test_intersections_circle_line():
    circle = sample_equal_arclength(CIRCLE, 64)
    line = sampled("M -2,0 L 2,0")
    assert count_intersections(circle, line) == 2


def test_intersections_symmetric():
    a = sample_equal_arclength(CIRCLE, 64)
    b = sampled("M -2,0.5 L 2,0.5")
    assert count_intersections(a, b) == count_intersections(b, a) == 2


def test_intersection_oracle_agreement():
    # Exact closed-form segment intersection vs the sampled method on
    # random pairs in the unit square.
    rng = np.random.default_rng(42)
    n_pairs = 2000
    agree = 0
    pitch = None
    for _ in range(n_pairs):
        p1, q1, p2, q2 = rng.random((4, 2))
        a = sampled(f"M {p1[0]},{p1[1]} L {q1[0]},{q1[1]}")
        b = sampled(f"M {p2[0]},{p2[1]} L {q2[0]},{q2[1]}")
        got = count_intersections(a, b)
        expect = exact_segment_crossing(p1, q1, p2, q2)
        if got == expect:
            agree += 1
    assert agree / n_pairs >= 0.995


def exact_segment_crossing(p1, q1, p2, q2):
    d1, d2 = q1 - p1, q2 - p2
    det = d1[0] * d2[1] - d1[1] * d2[0]
    if det == 0:
        return 0
    r = p2 - p1
    t = (r[0] * d2[1] - r[1] * d2[0]) / det
    u = (r[0] * d1[1] - r[1] * d1[0]) / det
    return int(0 <= t <= 1 and 0 <= u <= 1)


# --- contiguity and containment ----------------------------------------------

def test_contiguous_shared_endpoint():
    a = make_path("M 0,0 L 1,1")
    b = make_path("M 1,1 L 2,0")
    assert is_contiguous(a, b, 1e-6)


def test_contiguous_gap_within_tol():
    a = make_path("M 0,0 L 1,1")
    b = make_path("M 1.01,1 L 2,0")
    assert is_contiguous(a, b, 0.05)
    assert not is_contiguous(a, b, 1e-6)


def test_contains_inner_segment():
    inner = make_path("M 0.2,0.2 L 0.8,0.8")
    assert contains(SQUARE, inner)


def test_contains_crossing_boundary():
    crossing = make_path("M 0.5,0.5 L 2,0.5")
    assert not contains(SQUARE, crossing)


def test_contains_open_outer_false():
    assert not contains(LINE, make_path("M 0.5,0 L 1,0"))


# --- invariance properties ---------------------------------------------------

def rigid(path, deg, tx, ty):
    t = AffineTransform2D.translation(tx, ty).compose(AffineTransform2D.rotation(deg))
    return apply_affine(path, t)


@pytest.mark.parametrize("d", [
    "M 0,0 L 3,4",
    "M 0,0 C 0,2 3,2 3,0",
    "M 1,0 A 1,1 0 0 1 0,1",
    "M 0,0 L 0,1 L 1,1 L 1,0 Z",
])
def test_rigid_invariance(d):
    path = make_path(d)
    moved = rigid(path, 123.4, 5.6, -7.8)
    assert path_length(moved) == pytest.approx(path_length(path), rel=1e-6)
    area = path_area(path)
    if area is not None:
        assert path_area(moved) == pytest.approx(area, rel=1e-6)
    k1 = np.abs(curvature_profile(path, 16).samples)
    k2 = np.abs(curvature_profile(moved, 16).samples)
    assert np.allclose(k1, k2, rtol=1e-6, atol=1e-9)


def test_rigid_invariance_pairwise():
    a, b = make_path("M 0,0 L 1,1"), make_path("M 0,1 L 1,0")
    am, bm = rigid(a, 77, 1, 2), rigid(b, 77, 1, 2)
    sa, sb = sample_equal_arclength(a, 64), sample_equal_arclength(b, 64)
    sam, sbm = sample_equal_arclength(am, 64), sample_equal_arclength(bm, 64)
    assert min_pairwise_distance(sam, sbm) == pytest.approx(
        min_pairwise_distance(sa, sb), rel=1e-6, abs=1e-9)
    assert count_intersections(sam, sbm) == count_intersections(sa, sb)


@pytest.mark.parametrize("s", [0.25, 3.0])
def test_scale_covariance(s):
    path = make_path("M 0,0 C 0,2 3,2 3,0 L 0,0")
    scaled = apply_affine(path, AffineTransform2D.scaling(s))
    assert path_length(scaled) == pytest.approx(s * path_length(path), rel=1e-6)
    assert path_area(scaled) == pytest.approx(s * s * path_area(path), rel=1e-6)
    k1 = curvature_profile(path, 16).samples
    k2 = curvature_profile(scaled, 16).samples
    assert np.allclose(k2, k1 / s, rtol=1e-6, atol=1e-12)
