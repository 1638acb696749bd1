import numpy as np
import pytest
from scipy import ndimage

from conftest import admissible_random_profile, manufactured, polynomial_state
from dcone_lab import (
    BoundaryCondition,
    BoundaryProfile,
    FieldState,
    NoWitness,
    NonIntegerWinding,
    SmoothBump,
    SmoothedCone,
    TestFunction,
    TooCloseToCurve,
    ansatz_state,
    boundary_curve,
    build_grid,
    cone_fields,
    core_grid,
    degree_field,
    degree_pairing,
    exponent_table,
    find_test_function,
    gauss_curvature,
    pullback_identity_check,
    weak_identity_check,
    winding_number,
    winding_numbers,
)

UNIT = BoundaryProfile.preset("unit-circle")


# ---------------------------------------------------------------- winding


def test_unit_circle_winding():
    c = boundary_curve(UNIT)
    assert winding_number(c, np.array([0.0, 0.0])) == 1
    assert winding_number(c, np.array([5.0, 5.0])) == 0
    with pytest.raises(TooCloseToCurve):
        winding_number(c, np.array([1.0, 0.0]))


def test_boundary_curve_is_boundary_gradient(paper_profile, paper_trace):
    c = boundary_curve(paper_profile, 64)
    t = 2 * np.pi * np.arange(64) / 64
    x = np.stack([np.cos(t), np.sin(t)], -1)
    np.testing.assert_allclose(c.points, cone_fields(paper_trace, x).Dv, atol=1e-13)
    with pytest.raises(ValueError):
        boundary_curve(BoundaryProfile((0.0,) * 20 + (1.0,)), 64)


def test_non_integer_winding_detected(monkeypatch):
    import dcone_lab.degree as deg

    c = boundary_curve(UNIT)
    monkeypatch.setattr(deg.kernels, "winding_sums", lambda *a: np.float64(0.5))
    with pytest.raises(NonIntegerWinding) as info:
        winding_number(c, np.array([0.0, 0.0]))
    assert info.value.value == 0.5


def test_random_probe_residuals(paper_profile, rng):
    c = boundary_curve(paper_profile)
    lo, hi = c.bbox()
    z = rng.uniform(lo - 0.5, hi + 0.5, size=(10_000, 2))
    res = winding_numbers(c, z)
    ok = ~res.too_close
    assert np.all(res.residual[ok] < 0.25)
    assert np.all(res.values == np.rint(res.values))
    finer = winding_numbers(boundary_curve(paper_profile, 2 * len(c.points)), z)
    both = ok & ~finer.too_close
    assert np.array_equal(res.values[both], finer.values[both])


# ----------------------------------------------------------- degree field


def test_paper_default_field(paper_profile):
    f = degree_field(boundary_curve(paper_profile), resolution=200)
    assert f.values.shape == (200, 200)
    assert f.values.dtype.kind == "i"
    assert np.any(f.values != 0)
    assert f.nonzero_area() > 0


def test_unit_circle_field():
    c = boundary_curve(UNIT)
    f = degree_field(c, box=((-1.5, -1.5), (1.5, 1.5)), resolution=120)
    r = np.hypot(*np.moveaxis(f.points, -1, 0))
    ok = ~f.mask
    assert np.all(f.values[ok & (r < 1)] == 1)
    assert np.all(f.values[ok & (r > 1)] == 0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_degree_constant_on_components(seed):
    rng = np.random.default_rng(seed)
    prof = admissible_random_profile(rng, K=4)
    f = degree_field(boundary_curve(prof), resolution=150)
    labels, n = f.components()
    for k in range(1, n + 1):
        assert np.unique(f.values[labels == k]).size == 1
    # same for components of the complement of a fattened curve
    fat = ndimage.binary_dilation(f.mask, iterations=1)
    labels, n = ndimage.label(~fat)
    for k in range(1, n + 1):
        assert np.unique(f.values[labels == k]).size == 1


# --------------------------------------------------------- test functions


def test_test_function_closed_forms():
    phi = TestFunction(np.array([0.2, -0.1]), 0.7, 1.5)
    n = 1200
    xs = np.linspace(-0.6, 1.0, n + 1)
    ys = np.linspace(-0.9, 0.7, n + 1)
    xm, ym = 0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1])
    X, Y = np.meshgrid(xm, ym, indexing="ij")
    Z = np.stack([X, Y], -1)
    dA = (xs[1] - xs[0]) * (ys[1] - ys[0])
    assert phi.integral() == pytest.approx(np.sum(phi.value(Z)) * dA, rel=1e-5)
    G = phi.grad(Z)
    H = phi.hessian(Z)
    norm2 = np.sum(phi.value(Z) ** 2 + np.sum(G**2, -1) + np.sum(H**2, (-2, -1))) * dA
    assert phi.w22_norm() == pytest.approx(np.sqrt(norm2), rel=1e-4)
    assert phi.scaled(2.0).integral() == pytest.approx(2 * phi.integral())


@pytest.mark.parametrize("cls", [TestFunction, SmoothBump])
def test_bump_derivatives(cls, rng):
    phi = cls(np.array([0.1, 0.3]), 0.5, 2.0)
    z = phi.center + rng.uniform(-0.45, 0.45, size=(40, 2))
    eps = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        np.testing.assert_allclose(phi.grad(z)[:, j], (phi.value(z + e) - phi.value(z - e)) / (2 * eps), atol=1e-6)
        np.testing.assert_allclose(phi.hessian(z)[:, :, j], (phi.grad(z + e) - phi.grad(z - e)) / (2 * eps), atol=1e-5)
    assert phi.value(phi.center + np.array([0.6, 0.0])) == 0.0
    np.testing.assert_allclose(phi.hessian(phi.center), phi.hessian(phi.center + 1e-9), atol=1e-4)


@pytest.mark.parametrize("resolution", [40, 101])
def test_witness_for_unit_circle(resolution):
    # at 40 cells the unmasked cells touch across the curve
    c = boundary_curve(UNIT)
    w = find_test_function(degree_field(c, resolution=resolution), c)
    assert np.hypot(*w.phi.center) < 0.05
    assert w.integral > 0 and w.degree == 1


def test_witness_for_paper_default(paper_profile):
    c = boundary_curve(paper_profile)
    w = find_test_function(degree_field(c), c)
    assert w.integral > 0
    assert w.integral == pytest.approx(w.degree * w.phi.integral(), rel=1e-3)
    assert float(c.distance(w.phi.center)) > w.phi.radius


def test_no_witness_for_sine():
    c = boundary_curve(BoundaryProfile.preset("sine"))
    for box in (None, ((-2.0, -2.0), (2.0, 2.0))):
        f = degree_field(c, box=box, resolution=64)
        assert not np.any(f.values)
        with pytest.raises(NoWitness):
            find_test_function(f, c)


# -------------------------------------------------------- Gauss curvature


def test_gauss_curvature_examples(paper_trace):
    g = build_grid(24, 48, 1.04)
    s = polynomial_state(g, lambda x, y: (0 * x, 0 * x, 0.5 * (x * x + y * y)))
    np.testing.assert_allclose(gauss_curvature(s), 1.0, atol=1e-8)
    s = polynomial_state(g, lambda x, y: (0 * x, 0 * x, x * y))
    np.testing.assert_allclose(gauss_curvature(s), -1.0, atol=1e-8)

    def cone(x, y):
        c = cone_fields(paper_trace, np.stack([x, y], -1))
        return c.u[..., 0], c.u[..., 1], c.v

    for N in (16, 32):
        g = build_grid(N, 2 * N)
        s = FieldState.from_function(g, BoundaryCondition.from_trace(g, paper_trace), cone)
        assert np.max(np.abs(gauss_curvature(s)[g.radii > 0.2])) < 2 * np.pi / N


# ---------------------------------------------------------- pullback check


@pytest.fixture(scope="module")
def default_witness(paper_profile):
    c = boundary_curve(paper_profile)
    f = degree_field(c)
    return c, f, find_test_function(f, c)


def test_pullback_identity_default(paper_trace, default_witness):
    _, f, w = default_witness
    sc = SmoothedCone(paper_trace, 0.05, 2.5)
    chk = pullback_identity_check(sc, w.phi, core_grid(128, 256, sc.core_radius), f)
    assert chk.rel_err < 0.02
    assert chk.lhs > 0 and chk.rhs > 0
    scaled = pullback_identity_check(sc, w.phi.scaled(3.0), core_grid(128, 256, sc.core_radius), f)
    assert scaled.lhs == pytest.approx(3 * chk.lhs, rel=1e-14)
    assert scaled.rhs == pytest.approx(3 * chk.rhs, rel=1e-14)


def test_degree_pairing_matches_closed_form(paper_trace, default_witness):
    _, _, w = default_witness
    sc = SmoothedCone(paper_trace, 0.1, 2.5)
    g = core_grid(96, 192, sc.core_radius)
    from dcone_lab.degree import pullback_identity_check as pic

    discrete = degree_pairing(ansatz_state(sc, g), w.phi)
    closed = pic(sc, w.phi, g, degree_field(boundary_curve(sc.trace.beta))).rhs
    assert discrete == pytest.approx(closed, rel=0.05)


# ------------------------------------------------------- weak identity


def test_weak_identity_zero_state():
    g = build_grid(16, 32)
    s = polynomial_state(g, lambda x, y: (0 * x, 0 * x, 0 * x))
    chk = weak_identity_check(s, SmoothBump(np.array([0.1, 0.0]), 0.5))
    assert chk.lhs == 0.0 and chk.rhs == 0.0 and chk.discrepancy == 0.0


def test_weak_identity_second_order():
    phi = SmoothBump(np.array([0.1, 0.05]), 0.6)
    d = []
    for N in (64, 128, 256):
        g = build_grid(N, 2 * N)
        d.append(abs(weak_identity_check(polynomial_state(g, manufactured), phi).discrepancy))
    for a, b in zip(d, d[1:]):
        assert 3.0 <= a / b <= 5.0


def test_weak_identity_inequality_on_ansatz(paper_trace, default_witness):
    _, _, w = default_witness
    sc = SmoothedCone(paper_trace, 0.1, 2.5)
    chk = weak_identity_check(ansatz_state(sc, core_grid(96, 192, sc.core_radius)), w.phi)
    assert abs(chk.lhs) <= 1.05 * chk.strain_l2 * w.phi.w22_norm()


# ------------------------------------------------------------- exponents


def test_exponent_table_p25():
    t = exponent_table(2.5)
    assert t.p_prime == pytest.approx(5 / 3, abs=1e-15)
    assert t.alpha == pytest.approx(4 / 7, abs=1e-15)
    assert t.theta == pytest.approx(3 / 7, abs=1e-15)
    assert (6 - 12 / 7) / (3 - 3 / 7) == pytest.approx(5 / 3, abs=1e-14)


def test_exponent_limits():
    assert exponent_table(8 / 3 - 1e-9).alpha == pytest.approx(0.5, abs=1e-8)
    assert exponent_table(2 + 1e-9).alpha == pytest.approx(1.0, abs=1e-8)
    for p in (2.0, 8 / 3, 3.0, 1.5):
        with pytest.raises(ValueError):
            exponent_table(p)


def test_exponent_identity_scan():
    for p in np.linspace(2, 8 / 3, 102)[1:-1]:
        t = exponent_table(p)
        assert abs((6 - 4 * t.theta) / (3 - t.theta) - p / (p - 1)) <= 1e-12
