import numpy as np
import pytest

from lorentzlab.bounds import (
    BoundEngine,
    TAU_BOUND,
    make_test_field_mean_curvature,
    make_test_field_position,
    make_test_field_projected,
    signed_gradient_trace_density,
)
from lorentzlab.errors import DomainError, UsageError
from lorentzlab.fem import gradient_squared_per_element, mesh_geometry
from lorentzlab.immersions import (
    CounterexampleSphere,
    CylinderSphere,
    HyperbolicArc,
    HyperplaneSphere,
    NullHyperplaneSphere,
    recenter_to_gravity_origin,
    tangential_sq,
)
from lorentzlab.meshes import build_circle_mesh, build_icosphere_mesh, circle_segments_for_level
from lorentzlab.minkowski import (
    boost_direction,
    sample_timelike_directions,
    signature_orthonormalize,
)

AXIS4 = np.array([1.0, 0.0, 0.0, 0.0])


def unit_sphere(n=2):
    m = n + 2
    axis = np.zeros(m)
    axis[0] = 1.0
    return HyperplaneSphere(n, 1.0, np.zeros(m), axis)


@pytest.fixture(scope="module")
def sphere_engine():
    return BoundEngine(build_icosphere_mesh(4), unit_sphere(), seed=0)


@pytest.fixture(scope="module")
def counter_engine():
    return BoundEngine(build_icosphere_mesh(4), CounterexampleSphere(2), seed=0)


@pytest.fixture(scope="module")
def null_engine():
    return BoundEngine(build_icosphere_mesh(4), NullHyperplaneSphere(2, 0.5), seed=0)


def engines_for_cases(level=3):
    mesh = build_icosphere_mesh(level)
    circle = build_circle_mesh(circle_segments_for_level(level), level=level)
    return [
        BoundEngine(mesh, unit_sphere(), seed=0),
        BoundEngine(mesh, CounterexampleSphere(2), seed=0),
        BoundEngine(circle, CounterexampleSphere(1), seed=0),
        BoundEngine(mesh, CylinderSphere(2, HyperbolicArc(2.0)), seed=0),
        BoundEngine(mesh, NullHyperplaneSphere(2, 0.5), seed=0),
    ]


# --- test fields ----------------------------------------------------------------


def test_mean_curvature_field_centering():
    mesh = build_icosphere_mesh(4)
    field = make_test_field_mean_curvature(mesh, CounterexampleSphere(2))
    assert field.centered
    assert np.abs(field.center_residual).max() <= 1e-3

    sphere_field = make_test_field_mean_curvature(mesh, unit_sphere())
    assert sphere_field.centered
    assert np.abs(sphere_field.center_residual).max() <= 1e-12


def test_mean_curvature_field_center_residual_decreases():
    values = []
    for level in (2, 3, 4):
        mesh = build_icosphere_mesh(level)
        field = make_test_field_mean_curvature(mesh, CounterexampleSphere(2))
        values.append(np.abs(field.center_residual).max())
    assert values[0] > values[1] > values[2]


def test_position_field_requires_recentering():
    mesh = build_icosphere_mesh(2)
    imm = CounterexampleSphere(2)
    with pytest.raises(UsageError):
        make_test_field_position(mesh, imm)
    recentered = recenter_to_gravity_origin(imm, mesh)
    field = make_test_field_position(mesh, recentered)
    assert field.centered
    assert np.abs(field.center_residual).max() <= 1e-12


def test_projected_field_kills_direction_component():
    mesh = build_icosphere_mesh(2)
    recentered = recenter_to_gravity_origin(CounterexampleSphere(2), mesh)
    field = make_test_field_projected(mesh, recentered, AXIS4)
    assert np.abs(field.values[:, 0]).max() < 1e-14


# --- signed gradient trace ---------------------------------------------------------


def test_gradient_trace_of_position_is_dimension(counter_engine):
    eng = counter_engine
    density = signed_gradient_trace_density(
        eng.mesh, eng.imm, eng.positions_hat, geometry=eng.geometry
    )
    assert np.abs(density - 2.0).max() < 1e-10


def test_gradient_trace_of_projected_position(counter_engine):
    eng = counter_engine
    a = boost_direction(0.5, np.array([0.6, 0.8, 0.0]))
    field = eng.test_field_projected(a)
    density = signed_gradient_trace_density(eng.mesh, eng.imm, field, geometry=eng.geometry)
    s = eng.f_direction(eng.positions_hat, a)
    grad_sq = gradient_squared_per_element(eng.mesh, eng.imm, s, geometry=eng.geometry)
    assert np.abs(density - (2.0 + grad_sq)).max() < 1e-10


def test_gradient_trace_identity_vs_pointwise_converges():
    imm = CounterexampleSphere(2)
    a = boost_direction(0.4, np.array([0.0, 0.6, 0.8]))
    l1 = []
    for level in (3, 4):
        mesh = build_icosphere_mesh(level)
        recentered = recenter_to_gravity_origin(imm, mesh)
        geom = mesh_geometry(mesh, recentered)
        field = make_test_field_projected(mesh, recentered, a)
        density = signed_gradient_trace_density(mesh, recentered, field, geometry=geom)
        pointwise = tangential_sq(recentered, mesh.vertices, a)
        per_element = pointwise[mesh.simplices].mean(axis=1)
        l1.append(float(geom.volumes @ np.abs(density - (2.0 + per_element))) / geom.total_volume)
    assert l1[0] > l1[1]
    assert l1[1] <= 1e-2


def test_gradient_trace_of_scalar_times_direction(counter_engine):
    # a mean-zero scalar times a timelike direction has trace -|grad f|^2
    eng = counter_engine
    rng = np.random.default_rng(4)
    f = rng.standard_normal(eng.mesh.num_vertices)
    field = np.outer(f, AXIS4)
    density = signed_gradient_trace_density(eng.mesh, eng.imm, field, geometry=eng.geometry)
    grad_sq = gradient_squared_per_element(eng.mesh, eng.imm, f, geometry=eng.geometry)
    assert np.abs(density + grad_sq).max() < 1e-10


def test_gradient_trace_basis_independence(counter_engine):
    eng = counter_engine
    field = eng.test_field_mean_curvature()
    base = signed_gradient_trace_density(eng.mesh, eng.imm, field, geometry=eng.geometry)
    rng = np.random.default_rng(8)
    basis, signs = signature_orthonormalize([rng.standard_normal(4) for _ in range(6)], need=4)
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    recomputed = np.zeros_like(base)
    for b, eps in zip(basis, signs):
        f_b = field.values @ (eta @ b)
        recomputed += eps * gradient_squared_per_element(
            eng.mesh, eng.imm, f_b, geometry=eng.geometry
        )
    scale = np.abs(base).max()
    assert np.abs(recomputed - base).max() <= 1e-9 * max(scale, 1.0)


# --- master inequality ---------------------------------------------------------------


def test_master_inequality_all_cases_and_fields():
    rng_dirs = sample_timelike_directions(4, 3, seed=21, include_axis=True)
    for eng in engines_for_cases(level=3):
        dirs = sample_timelike_directions(eng.imm.m, 3, seed=21, include_axis=True)
        fields = [
            eng.test_field_mean_curvature(),
            eng.test_field_position(),
        ]
        for a in dirs:
            for field in fields + [eng.test_field_projected(a)]:
                report = eng.test_field_bound(field, a)
                assert report.holds, (type(eng.imm).__name__, field.provenance)


def test_master_inequality_holds_at_level5():
    eng = BoundEngine(build_icosphere_mesh(5), CounterexampleSphere(2), seed=0)
    for a in sample_timelike_directions(4, 2, seed=31, include_axis=True):
        for field in (
            eng.test_field_mean_curvature(),
            eng.test_field_position(),
            eng.test_field_projected(a),
        ):
            assert eng.test_field_bound(field, a).holds


def test_master_inequality_equality_case_slack(sphere_engine):
    field = sphere_engine.test_field_mean_curvature()
    report = sphere_engine.test_field_bound(field, AXIS4)
    assert report.holds
    assert report.slack / max(abs(report.lhs), abs(report.rhs)) <= 1e-2


def test_master_inequality_reduces_to_minimum_principle(counter_engine):
    eng = counter_engine
    rng = np.random.default_rng(9)
    f = rng.standard_normal(eng.mesh.num_vertices)
    m_ones = eng.pencil.mass @ np.ones(eng.mesh.num_vertices)
    f -= (m_ones @ f) / eng.volume
    from lorentzlab.bounds import TestField

    field = TestField(np.outer(f, AXIS4), "custom", True, np.zeros(4))
    report = eng.test_field_bound(field, AXIS4)
    m = eng.imm.m
    # both sides carry the factor m - 1 relative to the minimum principle
    assert report.lhs == pytest.approx(
        eng.lambda1 * (m - 1) * eng.m_form(f), rel=1e-12
    )
    assert report.rhs == pytest.approx((m - 1) * eng.k_form(f), rel=1e-12)
    assert report.holds


def test_vanishing_test_field_is_rejected(counter_engine):
    from lorentzlab.bounds import TestField

    zero = TestField(np.zeros((counter_engine.mesh.num_vertices, 4)), "custom", True, np.zeros(4))
    with pytest.raises(DomainError):
        counter_engine.test_field_bound(zero, AXIS4)


# --- named bounds ---------------------------------------------------------------------


def test_reilly_sphere_equality(sphere_engine):
    report = sphere_engine.reilly()
    assert report.holds
    assert report.rhs == pytest.approx(2.0, rel=2e-3)
    assert abs(report.slack) / 2.0 <= 1e-2


def test_reilly_counterexample_violated(counter_engine):
    report = counter_engine.reilly()
    assert not report.holds
    assert report.rhs == pytest.approx(26.0 / 15.0, rel=1e-2)
    # margin comfortably beyond the published bound gap
    assert report.lhs - report.rhs >= 2.0 / 9.0 * 0.5


def test_reilly_cylinder_violated():
    eng = BoundEngine(build_icosphere_mesh(4), CylinderSphere(2, HyperbolicArc(2.0)), seed=0)
    report = eng.reilly()
    assert not report.holds
    assert report.rhs == pytest.approx(2.0 * 29.0 / 30.0, rel=1e-2)


def test_mean_curvature_field_bound(sphere_engine, counter_engine):
    eq = sphere_engine.mean_curvature_field_bound(AXIS4)
    assert eq.holds and abs(eq.slack) / 2.0 <= 1e-2
    strict = counter_engine.mean_curvature_field_bound(AXIS4)
    assert strict.holds and strict.slack > 0


def test_position_field_bounds_hold_exactly():
    for eng in engines_for_cases(level=3):
        for a in sample_timelike_directions(eng.imm.m, 3, seed=5, include_axis=True):
            first, second = eng.position_field_bounds(a)
            assert first.holds and second.holds
            scale = max(abs(first.lhs), abs(first.rhs))
            assert first.slack >= -TAU_BOUND * scale


def test_position_field_bounds_sphere_reduce_to_classical(sphere_engine):
    first, second = sphere_engine.position_field_bounds(AXIS4)
    # orthogonal hyperplane: tangential term vanishes, both collapse
    assert first.meta["tangential"] <= 1e-20
    assert first.lhs == pytest.approx(second.lhs, rel=1e-12)
    assert first.rhs == pytest.approx(second.rhs, rel=1e-12)
    assert first.rhs == pytest.approx(2.0 * sphere_engine.volume, rel=1e-12)


def test_projection_bounds_sphere_equality(sphere_engine):
    sharp = sphere_engine.projected_curvature_bound(AXIS4, sharp=True)
    plain = sphere_engine.projected_curvature_bound(AXIS4)
    for report in (sharp, plain):
        assert report.holds
        assert abs(report.slack) / 2.0 <= 1e-2
    # boosted directions keep the equality (exactly 2 in the continuum)
    boosted = boost_direction(0.8, np.array([0.0, 1.0, 0.0]))
    sharp_b = sphere_engine.projected_curvature_bound(boosted, sharp=True)
    assert abs(sharp_b.rhs - 2.0) <= 2e-2


def test_projection_bounds_counterexample_strict(counter_engine):
    for a in sample_timelike_directions(4, 10, seed=7, include_axis=False):
        sharp = counter_engine.projected_curvature_bound(a, sharp=True)
        plain = counter_engine.projected_curvature_bound(a)
        assert sharp.holds and sharp.slack > 0
        assert plain.holds and plain.slack > 0
        # the tangential correction can only lower the bound
        assert sharp.rhs <= plain.rhs


def test_projection_bound_translation_invariance():
    mesh = build_icosphere_mesh(3)
    imm = CounterexampleSphere(2)
    moved = imm.translated(np.array([0.7, -2.0, 4.0, 1.3]))
    a = boost_direction(0.6, np.array([1.0, 0.0, 0.0]))
    eng = BoundEngine(mesh, imm, seed=0)
    eng_moved = BoundEngine(mesh, moved, seed=0)
    for sharp in (False, True):
        r1 = eng.projected_curvature_bound(a, sharp=sharp)
        r2 = eng_moved.projected_curvature_bound(a, sharp=sharp)
        assert r2.rhs == pytest.approx(r1.rhs, rel=1e-10)
        assert r2.lhs == pytest.approx(r1.lhs, rel=1e-10)


def test_infimum_over_directions(counter_engine, sphere_engine):
    report = counter_engine.infimum_over_directions(50, seed=11)
    assert report.holds and report.rhs > counter_engine.lambda1
    # subset minimum is monotone under the prefix-stable sampler
    small = counter_engine.infimum_over_directions(20, seed=11)
    assert report.rhs <= small.rhs

    # for the round sphere the direction landscape is exactly flat at the
    # eigenvalue, so the sampled minimum sits at the axis value
    sphere_report = sphere_engine.infimum_over_directions(50, seed=11)
    axis_value = sphere_engine.projected_curvature_bound(AXIS4, sharp=True).rhs
    assert sphere_report.rhs == pytest.approx(axis_value, rel=2e-2)
    assert sphere_report.rhs == pytest.approx(2.0, rel=2e-2)


# --- defect form and certificates --------------------------------------------------


def test_rayleigh_defect_matrix_positive_semidefinite(counter_engine):
    q = counter_engine.rayleigh_defect_matrix()
    assert np.allclose(q, q.T, atol=1e-10)
    eigs = np.linalg.eigvalsh(q)
    assert eigs.min() >= -TAU_BOUND * np.abs(q).max()


def test_rayleigh_defect_sphere_examples(sphere_engine):
    assert sphere_engine.rayleigh_defect(AXIS4) == pytest.approx(0.0, abs=1e-20)
    # hyperplane coordinates are eigenfunctions, so their defect is small
    coord = np.array([0.0, 1.0, 0.0, 0.0])
    scale = sphere_engine.lambda1 * sphere_engine.volume
    assert abs(sphere_engine.rayleigh_defect(coord)) <= 1e-2 * scale


def test_certificate_sphere_equality(sphere_engine):
    report = sphere_engine.reilly_causal_certificate(AXIS4)
    assert report.status == "ok"
    assert report.holds
    assert report.meta["equality"]
    assert report.meta["volume_identity_ratio"] == pytest.approx(1.0, rel=1e-2)


def test_certificate_null_normal(null_engine):
    ell = null_engine.imm.null_normal
    report = null_engine.reilly_causal_certificate(ell)
    assert report.status == "ok"
    assert report.holds
    # residual is null-parallel: causal square vanishes, Euclidean does not
    assert report.meta["causal_residual_sq"] <= 1e-3
    assert report.meta["euclid_residual_sq"] > 1e-2
    assert report.meta["equality"]


def test_certificate_counterexample_precondition_fails(counter_engine):
    report = counter_engine.reilly_causal_certificate(AXIS4)
    assert report.status == "precondition-failed"
    search = counter_engine.causal_defect_search(40, seed=3)
    assert not search["found"]


def test_certificate_rejects_spacelike_direction(counter_engine):
    with pytest.raises(DomainError):
        counter_engine.reilly_causal_certificate(np.array([0.0, 1.0, 0.0, 0.0]))


# --- equality diagnostics ------------------------------------------------------------


def test_equality_diagnostic_sphere(sphere_engine):
    diag = sphere_engine.equality_diagnostic(AXIS4)
    assert diag.verdict == "equality-case"
    assert diag.tangential_ratio <= 1e-12
    assert diag.radius_from_curvature == pytest.approx(diag.radius_from_lambda1, rel=1e-2)
    assert abs(diag.a_component_integral) <= 1e-10
    # equality persists at boosted directions
    for a in sample_timelike_directions(4, 5, seed=13, include_axis=False):
        assert sphere_engine.equality_diagnostic(a).verdict == "equality-case"


def test_equality_diagnostic_counterexample_strict(counter_engine):
    for a in sample_timelike_directions(4, 10, seed=7, include_axis=True):
        diag = counter_engine.equality_diagnostic(a)
        assert diag.verdict == "strict"
        assert abs(diag.a_component_integral) <= 1e-10


def test_equality_diagnostic_null_graph_strict(null_engine):
    diag = null_engine.equality_diagnostic(np.concatenate(([1.0], np.zeros(4))))
    assert diag.verdict == "strict"
    # the residual is nearly null, so its causal square is tiny
    assert abs(diag.causal_residual_sq) <= 1e-2


def test_equality_tolerance_tracks_level():
    mesh3 = build_icosphere_mesh(3)
    eng3 = BoundEngine(mesh3, unit_sphere(), seed=0)
    assert eng3.equality_tolerance() == pytest.approx(2 * BoundEngine(
        build_icosphere_mesh(4), unit_sphere(), seed=0
    ).equality_tolerance())
    assert eng3.equality_diagnostic(AXIS4).verdict == "equality-case"
