"""Spectral module: transforms, projection, operators, probes."""

import math

import numpy as np
import pytest
from scipy import integrate

from avg_sfpde.spectral import (
    PdeOperator,
    SpectralField,
    SpectralOverflowError,
    SpectralSpace,
    apply_operator,
    coercivity_probe,
    project,
)


def simpson_coefficient_oracle(f, i, L=1.0, m=4096):
    """Composite Simpson of int_0^L f(x) e_i(x) dx on a dense grid."""
    x = np.linspace(0.0, L, m + 1)
    e = math.sqrt(2.0 / L) * np.sin(i * math.pi * x / L)
    return integrate.simpson(f(x) * e, x=x)


# ---------------------------------------------------------------------------
# transforms and projection
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("m", [32, 256, 1025, 4096])
def test_transform_round_trip(m):
    k = 8
    space = SpectralSpace(1.0, k, quad_points=m)
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal(k)
    back = space.to_coeffs(space.to_values(coeffs))
    np.testing.assert_allclose(back, coeffs, rtol=1e-10, atol=1e-12)


def test_matrix_and_fft_paths_agree():
    k = 8
    sm = SpectralSpace(2.0, k, quad_points=256)
    rng = np.random.default_rng(1)
    coeffs = rng.standard_normal(k)
    vals_mat = sm.to_values(coeffs)
    # force the fft path by zeroing the cached matrices
    sm2 = SpectralSpace(2.0, k, quad_points=256)
    sm2._to_values_mat = None
    sm2._to_coeffs_mat = None
    vals_fft = sm2.to_values(coeffs)
    np.testing.assert_allclose(vals_mat, vals_fft, atol=1e-12)
    np.testing.assert_allclose(sm.to_coeffs(vals_mat), sm2.to_coeffs(vals_fft), atol=1e-12)


def test_parseval_identity_against_grid_quadrature():
    space = SpectralSpace(1.0, 12, quad_points=64)
    rng = np.random.default_rng(2)
    coeffs = rng.standard_normal(12)
    values = space.to_values(coeffs)
    l2_grid = math.sqrt(space.quad(values**2))
    assert l2_grid == pytest.approx(np.linalg.norm(coeffs), rel=1e-8)


def test_project_basis_vector_inside_span_unchanged():
    space = SpectralSpace(1.0, 8)
    e1 = SpectralField(space, space.basis_vector(1))
    out = project(e1, 8)
    np.testing.assert_allclose(out.coeffs, e1.coeffs, atol=0)


def test_project_basis_vector_outside_span_zero():
    space = SpectralSpace(1.0, 9)
    e9 = SpectralField(space, space.basis_vector(9))
    out = project(e9, 8)
    assert np.all(out.coeffs[:8] == 0.0)
    assert out.coeffs[8] == 0.0


def test_project_zero_modes_rejected():
    space = SpectralSpace(1.0, 4)
    with pytest.raises(ValueError):
        project(SpectralField(space, np.zeros(4)), 0)


def test_project_parabola_matches_simpson_oracle():
    # x(1-x) on L=1: oracle by dense composite Simpson quadrature
    space = SpectralSpace(1.0, 4, quad_points=4096)
    out = project(lambda x: x * (1.0 - x), 4, space=space)
    for i in range(1, 5):
        oracle = simpson_coefficient_oracle(lambda x: x * (1.0 - x), i)
        assert out.coeffs[i - 1] == pytest.approx(oracle, abs=1e-10)
        # cross-check of the oracle itself: closed form 4*sqrt(2)/(i pi)^3, odd i
        closed = 4.0 * math.sqrt(2.0) / (i * math.pi) ** 3 if i % 2 == 1 else 0.0
        assert oracle == pytest.approx(closed, abs=1e-12)


def test_projection_contracts_and_is_idempotent():
    space = SpectralSpace(1.0, 16, quad_points=128)
    rng = np.random.default_rng(3)
    f = SpectralField(space, rng.standard_normal(16))
    p = project(f, 5)
    assert p.norm() <= f.norm() + 1e-14
    np.testing.assert_allclose(project(p, 5).coeffs, p.coeffs, atol=0)
    # self-adjoint: <Pf, g> = <f, Pg>
    g = SpectralField(space, rng.standard_normal(16))
    lhs = float(np.dot(project(f, 5).coeffs, g.coeffs))
    rhs = float(np.dot(f.coeffs, project(g, 5).coeffs))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_anti_aliasing_floor_enforced():
    with pytest.raises(ValueError):
        SpectralSpace(1.0, 16, quad_points=31)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def test_pure_laplacian_eigenfunction_fidelity():
    space = SpectralSpace(1.0, 8)
    op = PdeOperator("pure_laplacian")
    for i in (1, 3, 8):
        c = 0.7
        u = SpectralField(space, c * space.basis_vector(i))
        out = apply_operator(op, u)
        expected = -space.eigenvalues[i - 1] * c * space.basis_vector(i)
        np.testing.assert_allclose(out.coeffs, expected, atol=1e-12)


def test_reaction_diffusion_fixes_zero():
    space = SpectralSpace(1.0, 8)
    op = PdeOperator("reaction_diffusion", q=3.0)
    out = apply_operator(op, SpectralField(space, np.zeros(8)))
    np.testing.assert_allclose(out.coeffs, 0.0, atol=0)


def test_porous_media_against_dense_grid_oracle():
    # coarse evaluations vs m=4096 oracle on 0.5*e_1; the squared mode has a
    # slowly decaying sine expansion, so m=64 sits at ~8e-6 and m=128 reaches 1e-6
    op = PdeOperator("porous_media", q=3.0)
    fine = SpectralSpace(1.0, 8, quad_points=4096)
    coeffs = 0.5 * fine.basis_vector(1)
    out_fine = op.apply(fine, coeffs)
    for m, tol in ((64, 2e-5), (128, 1e-6), (256, 1e-7)):
        coarse = SpectralSpace(1.0, 8, quad_points=m)
        out_coarse = op.apply(coarse, coeffs)
        err = np.linalg.norm(out_coarse - out_fine) / np.linalg.norm(out_fine)
        assert err < tol


def test_operator_rejects_q_not_above_two():
    with pytest.raises(ValueError):
        PdeOperator("porous_media", q=2.0)


def test_operator_overflow_error():
    space = SpectralSpace(1.0, 4)
    op = PdeOperator("reaction_diffusion", q=3.0)
    bad = np.array([np.inf, 0.0, 0.0, 0.0])
    with pytest.raises(SpectralOverflowError):
        op.nonlinear_from_values(space, space.to_values(bad))


def test_aliasing_guard_doubling_m():
    op = PdeOperator("porous_media", q=3.0)
    s1 = SpectralSpace(1.0, 8, quad_points=64)
    s2 = SpectralSpace(1.0, 8, quad_points=128)
    rng = np.random.default_rng(4)
    coeffs = 0.3 * rng.standard_normal(8) / (1.0 + np.arange(8)) ** 2
    a1 = op.apply(s1, coeffs)
    a2 = op.apply(s2, coeffs)
    assert np.linalg.norm(a1 - a2) / np.linalg.norm(a2) < 1e-6


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

def test_coercivity_probe_zero_field():
    space = SpectralSpace(1.0, 6)
    op = PdeOperator("porous_media", q=3.0)
    pairing, bnorm = coercivity_probe(op, SpectralField(space, np.zeros(6)))
    assert pairing == 0.0
    assert bnorm == 0.0


def test_coercivity_probe_laplacian_eigenfunction():
    space = SpectralSpace(1.0, 6, quad_points=256)
    op = PdeOperator("pure_laplacian")
    pairing, _ = coercivity_probe(op, SpectralField(space, space.basis_vector(1)))
    assert pairing == pytest.approx(-space.eigenvalues[0], rel=1e-12)


def test_porous_media_coercivity_inequality():
    # <A(u), u> = -||u||_q^q - ||u||_2^2 <= -1*||u||_q^q + 0*||u||^2 + 0
    space = SpectralSpace(1.0, 8, quad_points=128)
    op = PdeOperator("porous_media", q=3.0)
    u = SpectralField(space, 2.0 * space.basis_vector(1))
    pairing, bnorm_p = coercivity_probe(op, u)
    assert pairing <= -1.0 * bnorm_p + 0.0 * u.norm() ** 2 + 1e-10
    # oracle: quadrature of -(|u|^{q-2}u + u) u on a dense grid
    fine = SpectralSpace(1.0, 8, quad_points=4096)
    v = fine.to_values(u.coeffs)
    oracle = -fine.simpson((np.abs(v) * v + v) * v)
    assert pairing == pytest.approx(oracle, rel=1e-6)


@pytest.mark.parametrize("kind,q", [("porous_media", 3.0), ("reaction_diffusion", 3.0)])
def test_monotonicity_probe_nonpositive_on_random_pairs(kind, q):
    space = SpectralSpace(1.0, 8, quad_points=64)
    op = PdeOperator(kind, q=q)
    rng = np.random.default_rng(5)
    for _ in range(1000):
        u = rng.standard_normal(8)
        v = rng.standard_normal(8)
        gap = op.monotonicity_gap(space, u, v)
        tol = 1e-8 * (np.linalg.norm(u) + np.linalg.norm(v)) ** 2
        assert gap <= tol


def test_scalar_linear_operator():
    op = PdeOperator("scalar_linear", a=2.0)
    out = op.apply(None, np.array([3.0]))
    assert out[0] == pytest.approx(-6.0)
    assert op.stiff_diagonal(None)[0] == 2.0
