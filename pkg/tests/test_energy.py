import warnings

import numpy as np
import pytest

from conftest import polynomial_state
from dcone_lab import (
    DegenerateBending,
    SmoothedCone,
    ansatz_energy,
    ansatz_state,
    build_grid,
    core_grid,
    energy,
    energy_and_gradient,
    energy_gradient,
    hessian_op,
    strain,
)
from dcone_lab.energy import EnergyBreakdown


def zero_fn(x, y):
    return 0 * x, 0 * x, 0 * x


def paraboloid(x, y):
    return 0 * x, 0 * x, 0.5 * (x * x + y * y)


def perturbed_ansatz(trace, grid, h, rng, scale=1e-2):
    s = ansatz_state(SmoothedCone(trace, h, 2.5), grid)
    return s.with_dofs(s.dofs() + scale * rng.standard_normal(s.n_dofs))


def test_zero_state():
    g = build_grid(16, 32)
    s = polynomial_state(g, zero_fn)
    br, grad = energy_and_gradient(s, 0.1, 2.5)
    assert br.total == 0.0
    assert np.all(grad == 0)
    assert np.all(strain(s) == 0)


def test_strain_of_paraboloid():
    g = build_grid(16, 32, 1.05)
    s = polynomial_state(g, paraboloid)
    P = g.points()
    expect = 0.5 * P[..., :, None] * P[..., None, :]
    np.testing.assert_allclose(strain(s), expect, atol=1e-12)


def test_paraboloid_energy_closed_form():
    # membrane: int |x|^4 / 4 = pi / 12;  bending: |D^2 v|_F = sqrt(2)
    h, p = 0.1, 2.5
    g = build_grid(128, 256)
    br = energy(polynomial_state(g, paraboloid), h, p)
    assert br.membrane == pytest.approx(np.pi / 12, rel=1e-3)
    raw = 2 ** (p / 2) * np.pi
    assert br.bending_raw == pytest.approx(raw, rel=1e-12)
    assert br.bending == pytest.approx(h * h * raw ** (2 / p), rel=1e-12)
    assert br.bending == pytest.approx(0.049970, abs=1e-5)
    assert br.total == pytest.approx(np.pi / 12 + 0.049970, abs=1e-3)


def test_interpolated_ansatz_matches_quadrature(paper_trace):
    sc = SmoothedCone(paper_trace, 0.05, 2.5)
    ref = ansatz_energy(sc)
    g = core_grid(128, 256, sc.core_radius)
    got = energy(ansatz_state(sc, g), 0.05, 2.5)
    assert abs(got.total / ref.total - 1) < 0.03


def test_breakdown_row():
    br = EnergyBreakdown.from_parts(1.0, 16.0, 0.5, 2.0)
    assert br.bending == pytest.approx(4.0)
    assert br.as_row() == {"E_membrane": 1.0, "E_bending_raw": 16.0, "E_bending": 4.0, "E_total": 5.0}


def test_exponent_domain():
    s = polynomial_state(build_grid(8, 16), paraboloid)
    with pytest.raises(ValueError):
        energy(s, 0.1, 1.0)
    with pytest.raises(ValueError):
        energy(s, 0.0, 2.5)
    with pytest.warns(UserWarning):
        energy(s, 0.1, 3.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        energy(s, 0.1, 2.5)


def test_degenerate_bending_strict():
    s = polynomial_state(build_grid(8, 16), lambda x, y: (0.1 * x, 0 * x, 0 * x))
    with pytest.raises(DegenerateBending):
        energy_and_gradient(s, 0.1, 2.5, strict=True)
    br, grad = energy_and_gradient(s, 0.1, 2.5)
    assert br.bending == 0.0 and np.all(np.isfinite(grad))


def _directional_check(state, h, p, rng, n_dirs=1):
    br, grad = energy_and_gradient(state, h, p)
    x = state.dofs()
    worst = 0.0
    for _ in range(n_dirs):
        d = rng.standard_normal(x.size)
        eps = 1e-6 * np.linalg.norm(x) / np.linalg.norm(d)
        fp = energy(state.with_dofs(x + eps * d), h, p).total
        fm = energy(state.with_dofs(x - eps * d), h, p).total
        fd = (fp - fm) / (2 * eps)
        an = grad @ d
        worst = max(worst, abs(an - fd) / abs(an))
    return worst


@pytest.mark.parametrize("h", [0.1, 0.01])
def test_gradient_matches_finite_differences(paper_trace, rng, h):
    for Nr, n in ((12, 24), (20, 40)):
        g = build_grid(Nr, n, 1.06)
        for _ in range(5):
            s = perturbed_ansatz(paper_trace, g, h, rng)
            assert _directional_check(s, h, 2.5, rng) < 1e-6


def test_gradient_zero_on_boundary_ring(paper_trace, rng):
    g = build_grid(12, 24, 1.06)
    G = energy_gradient(perturbed_ansatz(paper_trace, g, 0.1, rng), 0.1, 2.5)
    assert np.all(G[-1] == 0.0)
    assert np.any(G[:-1] != 0.0)


def test_energy_nonnegative_and_membrane_zero_iff_strain_zero(paper_trace, rng):
    g = build_grid(12, 24, 1.06)
    for _ in range(10):
        s = perturbed_ansatz(paper_trace, g, 0.05, rng, scale=rng.uniform(0, 1))
        br = energy(s, 0.05, 2.5)
        assert br.membrane >= 0 and br.bending >= 0 and br.total >= 0
    flat = polynomial_state(g, lambda x, y: (0.2 * y, -0.2 * x, 0 * x))  # rotation: sym Du = 0
    assert np.max(np.abs(strain(flat))) < 1e-14
    assert energy(flat, 0.05, 2.5).membrane < 1e-14


def test_p_equal_two_collapses(paper_trace, rng):
    g = build_grid(16, 32, 1.05)
    s = perturbed_ansatz(paper_trace, g, 0.1, rng)
    with pytest.warns(UserWarning):
        br = energy(s, 0.1, 2.0)
    H = hessian_op(s)
    direct = 0.01 * float(np.sum(g.ring_weights[:, None] * np.sum(H * H, axis=(-2, -1))))
    assert br.bending == pytest.approx(direct, rel=1e-12)
