import numpy as np
import pytest

from pqspectra import (
    DiscreteFunction,
    apply_L,
    build_problem,
    build_rectangle_mesh,
    c_star_quotient,
    coercivity_constants,
    constraint_G1,
    constraint_G2,
    estimate_c_star,
    lambda_cap,
    lebesgue_modular,
    luxemburg_norm,
    make_exponent,
    make_weight,
    monotonicity_gap,
    norm_m1,
    phi,
    phi_grad,
    rayleigh_q,
    sobolev_beta_modular,
    sobolev_beta_norm,
)


@pytest.fixture(scope="module")
def grad_cfg():
    mesh = build_rectangle_mesh(1.0, 1.0, 16, 16)
    return build_problem(mesh, p="2 + 0.3*x", q="3 - 0.2*y", r="2.5 + 0.1*x",
                         alpha="1 + 0.5*y", beta1="1", lam=0.7)


def test_phi_zero_is_zero(grad_cfg):
    assert phi(DiscreteFunction.zero(grad_cfg.mesh), grad_cfg) == 0.0


def test_phi_constant_robin(unit_mesh_8):
    cfg = build_problem(unit_mesh_8, p="2", q="2", r="2", alpha="1", beta1="1", lam=1.0)
    one = DiscreteFunction.constant(unit_mesh_8, 1.0)
    assert phi(one, cfg) == pytest.approx(3.5, rel=1e-13)


def test_phi_constant_neumann(unit_mesh_8):
    cfg = build_problem(unit_mesh_8, p="2", q="3", r="2", alpha="1", beta1="0", lam=1.0)
    one = DiscreteFunction.constant(unit_mesh_8, 1.0)
    assert phi(one, cfg) == pytest.approx(-0.5, rel=1e-13)


def test_phi_even(grad_cfg, rng):
    for _ in range(10):
        u = DiscreteFunction(grad_cfg.mesh, rng.standard_normal(grad_cfg.mesh.n_nodes))
        assert phi(u, grad_cfg) == phi(u.scaled(-1.0), grad_cfg)


def test_phi_grad_zero_at_origin(unit_mesh_8):
    cfg = build_problem(unit_mesh_8, p="2.5", q="3", r="2.5", alpha="1", beta1="0", lam=1.0)
    ga = phi_grad(DiscreteFunction.zero(unit_mesh_8), cfg)
    assert np.all(ga.nodal_covector == 0.0)
    assert ga.residual_norm == 0.0


def test_gradient_consistency_central_difference(grad_cfg, rng):
    # directional derivatives of the implemented energy match the assembly
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        u = DiscreteFunction(grad_cfg.mesh, rng.standard_normal(grad_cfg.mesh.n_nodes))
        v = rng.standard_normal(grad_cfg.mesh.n_nodes)
        ga = phi_grad(u, grad_cfg)
        up = DiscreteFunction(grad_cfg.mesh, u.values + h * v)
        um = DiscreteFunction(grad_cfg.mesh, u.values - h * v)
        fd = (phi(up, grad_cfg) - phi(um, grad_cfg)) / (2.0 * h)
        rel = abs(fd - ga.pair(v)) / max(abs(ga.pair(v)), 1e-12)
        worst = max(worst, rel)
    assert worst < 1e-6


def test_gradient_shares_regularization(unit_mesh_8, rng):
    # a sub-2 exponent activates the regularized magnitude on both sides
    cfg = build_problem(unit_mesh_8, p="1.5", q="1.8", r="2", alpha="1", beta1="1",
                        lam=0.5, epsilon_reg=1e-3)
    u = DiscreteFunction(unit_mesh_8, 0.01 * rng.standard_normal(unit_mesh_8.n_nodes))
    v = rng.standard_normal(unit_mesh_8.n_nodes)
    h = 1e-6
    fd = (phi(DiscreteFunction(unit_mesh_8, u.values + h * v), cfg)
          - phi(DiscreteFunction(unit_mesh_8, u.values - h * v), cfg)) / (2.0 * h)
    assert fd == pytest.approx(phi_grad(u, cfg).pair(v), rel=1e-6)


def test_apply_L_identity_at_two(unit_mesh_8, rng):
    p = make_exponent(unit_mesh_8, 2.0)
    beta = make_weight(unit_mesh_8, 1.0, "boundary")
    u = DiscreteFunction(unit_mesh_8, rng.standard_normal(unit_mesh_8.n_nodes))
    assert apply_L(u, u, p, beta) == pytest.approx(sobolev_beta_modular(u, p, beta), rel=1e-12)
    one = DiscreteFunction.constant(unit_mesh_8, 1.0)
    assert apply_L(one, one, p, beta) == pytest.approx(4.0, rel=1e-13)


def test_apply_L_symmetry_at_two(unit_mesh_8, rng):
    p = make_exponent(unit_mesh_8, 2.0)
    beta = make_weight(unit_mesh_8, 1.0, "boundary")
    for _ in range(5):
        u = DiscreteFunction(unit_mesh_8, rng.standard_normal(unit_mesh_8.n_nodes))
        v = DiscreteFunction(unit_mesh_8, rng.standard_normal(unit_mesh_8.n_nodes))
        assert apply_L(u, v, p, beta) == pytest.approx(apply_L(v, u, p, beta), abs=1e-12)


def test_monotonicity_gap_values():
    assert monotonicity_gap([1.0, 0.0], [1.0, 0.0], 3.0) == 0.0
    assert monotonicity_gap([1.0, 0.0], [-1.0, 0.0], 2.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        monotonicity_gap([1.0, 0.0], [0.0, 1.0], 1.0)


def test_monotonicity_gap_nonnegative_bulk(rng):
    n = 100_000
    a = rng.uniform(-2.0, 2.0, size=(n, 2))
    b = rng.uniform(-2.0, 2.0, size=(n, 2))
    sigma = rng.uniform(1.0, 5.0, size=n)
    sigma = np.maximum(sigma, np.nextafter(1.0, 2.0))
    gaps = monotonicity_gap(a, b, sigma)
    assert gaps.shape == (n,)
    assert gaps.min() >= -1e-14


def test_constraint_G2_values(unit_mesh_8):
    alpha = make_weight(unit_mesh_8, 1.0, "volume")
    one = DiscreteFunction.constant(unit_mesh_8, 1.0)
    assert constraint_G2(one, alpha, 4.0) == pytest.approx(1.0, rel=1e-13)
    assert constraint_G2(one.scaled(-1.0), alpha, 4.0) == pytest.approx(-1.0, rel=1e-13)
    odd = DiscreteFunction(unit_mesh_8, unit_mesh_8.nodes[:, 0] - 0.5)
    assert abs(constraint_G2(odd, alpha, 4.0)) < 1e-14


def test_constraint_G1_constants(unit_mesh_8):
    cfg = build_problem(unit_mesh_8, p="2.5", q="4", r="4", alpha="1", beta1="0", lam=2.0)
    c = DiscreteFunction.constant(unit_mesh_8, 1.3)
    assert constraint_G1(c, cfg) == pytest.approx(-2.0 * 1.3**4, rel=1e-12)
    assert constraint_G1(DiscreteFunction.zero(unit_mesh_8), cfg) == 0.0


def test_homogeneous_pairing_identity(unit_mesh_8, rng):
    # pairing the derivative with u reproduces the constraint value at tiny eps
    cfg = build_problem(unit_mesh_8, p="2.5", q="4", r="4", alpha="1", beta1="0",
                        lam=2.0, epsilon_reg=1e-12)
    for _ in range(10):
        u = DiscreteFunction(unit_mesh_8, rng.standard_normal(unit_mesh_8.n_nodes))
        pairing = phi_grad(u, cfg).pair(u.values)
        assert pairing == pytest.approx(constraint_G1(u, cfg), rel=1e-8, abs=1e-10)


def test_rayleigh_scale_invariance(unit_mesh_16, rng):
    alpha = make_weight(unit_mesh_16, 1.0, "volume")
    u = DiscreteFunction(unit_mesh_16, rng.standard_normal(unit_mesh_16.n_nodes))
    r1 = rayleigh_q(u, alpha, 3.0)
    r2 = rayleigh_q(u.scaled(-4.2), alpha, 3.0)
    assert r1 == pytest.approx(r2, rel=1e-12)
    assert rayleigh_q(DiscreteFunction.constant(unit_mesh_16, 1.0), alpha, 3.0) == 0.0
    with pytest.raises(ValueError, match="vanishes"):
        rayleigh_q(DiscreteFunction.zero(unit_mesh_16), alpha, 3.0)


def test_rayleigh_neumann_eigenfunction_oracle():
    # cos(pi x) is the first nonzero Neumann mode with value pi^2
    m = build_rectangle_mesh(1.0, 1.0, 64, 64)
    alpha = make_weight(m, 1.0, "volume")
    u = DiscreteFunction(m, np.cos(np.pi * m.nodes[:, 0]))
    assert rayleigh_q(u, alpha, 2.0) == pytest.approx(np.pi**2, rel=0.01)


def test_estimate_c_star_monotone_in_probes(sublinear_cfg):
    lo = estimate_c_star(sublinear_cfg, probes=8, seed=3)
    hi = estimate_c_star(sublinear_cfg, probes=16, seed=3)
    assert hi.c_star_lower >= lo.c_star_lower
    assert lo.c_star_lower > 0.0
    assert 0.0 < lo.rho < min(1.0 / lo.c_star_lower, 1.0)


def test_estimate_c_star_constant_probe_cross_check(sublinear_cfg):
    mesh = sublinear_cfg.mesh
    one = DiscreteFunction.constant(mesh, 1.0)
    direct = (luxemburg_norm(one, sublinear_cfg.r)
              / sobolev_beta_norm(one, sublinear_cfg.m, sublinear_cfg.ones_boundary))
    assert c_star_quotient(one, sublinear_cfg) == pytest.approx(direct, rel=1e-12)
    report = estimate_c_star(sublinear_cfg, probes=4, seed=0)
    assert report.c_star_lower >= direct - 1e-12


def test_c_star_quotient_scale_invariant(sublinear_cfg, rng):
    u = DiscreteFunction(sublinear_cfg.mesh, rng.standard_normal(sublinear_cfg.mesh.n_nodes))
    assert c_star_quotient(u, sublinear_cfg) == pytest.approx(
        c_star_quotient(u.scaled(37.0), sublinear_cfg), rel=1e-9)


def test_lambda_cap_formula(unit_mesh_8):
    # direct evaluation: 1 * 1.5 * 0.5^(2*(2-1.5)) / (2 * 1 * 1) = 0.375
    cfg = build_problem(unit_mesh_8, p="2", q="2", r="1.5", alpha="1", beta1="1", lam=1.0)
    assert lambda_cap(cfg, rho=0.5, c_star=1.0) == pytest.approx(0.375, rel=1e-13)
    with pytest.raises(ValueError):
        lambda_cap(cfg, rho=1.5, c_star=1.0)


def test_lambda_cap_monotone(unit_mesh_8):
    base = build_problem(unit_mesh_8, p="2", q="2", r="1.5", alpha="1", beta1="1", lam=1.0)
    bigger_alpha = build_problem(unit_mesh_8, p="2", q="2", r="1.5", alpha="2", beta1="1", lam=1.0)
    assert lambda_cap(bigger_alpha, 0.4, 1.0) < lambda_cap(base, 0.4, 1.0)
    assert lambda_cap(base, 0.4, 1.2) < lambda_cap(base, 0.4, 1.0)


def test_coercivity_floor_random(sublinear_cfg, rng):
    c2, eps, c1 = coercivity_constants(sublinear_cfg)
    assert c2 == pytest.approx(min(1.0, 1.0, 1.0) / 3.0)
    mesh = sublinear_cfg.mesh
    lam, a_sup, r_inf = sublinear_cfg.lam, sublinear_cfg.alpha.sup_val, sublinear_cfg.r.inf_val
    offset = lam * a_sup * c1 * mesh.area / r_inf
    m_cell = np.maximum(sublinear_cfg.p.at_cells(), sublinear_cfg.q.at_cells())
    m_bnd = sublinear_cfg.m.at_boundary()
    for scale in (0.5, 2.0, 8.0, 32.0):
        for _ in range(25):
            u = DiscreteFunction(mesh, scale * rng.standard_normal(mesh.n_nodes))
            g = u.gradient_at_cells()
            mag = np.sqrt((g * g).sum(axis=1))
            grad_m = float(mesh.volume_weights @ mag**m_cell)
            bnd_m = float(mesh.boundary_weights @ np.abs(mesh.boundary_values(u.values)) ** m_bnd)
            floor = 0.5 * c2 * (grad_m + bnd_m) - offset
            assert phi(u, sublinear_cfg) >= floor - 1e-10 * (1.0 + abs(floor))
