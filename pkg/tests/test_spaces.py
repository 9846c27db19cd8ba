import numpy as np
import pytest
from scipy.integrate import quad

from pqspectra import (
    DiscreteFunction,
    build_rectangle_mesh,
    holder_pair_bound,
    lebesgue_modular,
    luxemburg_norm,
    make_exponent,
    make_weight,
    sobolev_beta_modular,
    sobolev_beta_norm,
)


def test_lebesgue_modular_constants(unit_mesh_8):
    p = make_exponent(unit_mesh_8, 2.0)
    u = DiscreteFunction.constant(unit_mesh_8, 3.0)
    assert lebesgue_modular(u, p) == pytest.approx(9.0, rel=1e-13)
    assert lebesgue_modular(DiscreteFunction.zero(unit_mesh_8), p) == 0.0


def test_lebesgue_modular_variable_exponent_oracle():
    # int over the unit square of 2^(2+x) equals 4/log 2; quadrature oracle
    exact = quad(lambda x: 2.0 ** (2.0 + x), 0.0, 1.0)[0]
    assert exact == pytest.approx(4.0 / np.log(2.0), rel=1e-12)
    m = build_rectangle_mesh(1.0, 1.0, 512, 4)
    p = make_exponent(m, 2.0 + m.nodes[:, 0])
    u = DiscreteFunction.constant(m, 2.0)
    assert lebesgue_modular(u, p) == pytest.approx(exact, abs=1e-6)


def test_luxemburg_norm_constants(unit_mesh_8):
    p = make_exponent(unit_mesh_8, 2.0)
    assert luxemburg_norm(DiscreteFunction.constant(unit_mesh_8, 3.0), p) == pytest.approx(3.0, rel=1e-11)
    # unit-area domain: the constant 1 has norm 1 for any exponent
    pv = make_exponent(unit_mesh_8, 2.0 + unit_mesh_8.nodes[:, 0])
    assert luxemburg_norm(DiscreteFunction.constant(unit_mesh_8, 1.0), pv) == pytest.approx(1.0, rel=1e-11)
    assert luxemburg_norm(DiscreteFunction.zero(unit_mesh_8), p) == 0.0


def test_luxemburg_norm_constant_closed_form():
    m = build_rectangle_mesh(2.0, 1.5, 6, 6)  # area 3
    p0 = 2.5
    p = make_exponent(m, p0)
    c = 0.7
    expected = c * 3.0 ** (1.0 / p0)
    assert luxemburg_norm(DiscreteFunction.constant(m, c), p) == pytest.approx(expected, rel=1e-11)


def test_luxemburg_homogeneity(unit_mesh_16, rng):
    p = make_exponent(unit_mesh_16, 1.5 + 2.0 * rng.random(unit_mesh_16.n_nodes))
    for _ in range(20):
        u = DiscreteFunction(unit_mesh_16, rng.standard_normal(unit_mesh_16.n_nodes))
        c = rng.uniform(-5.0, 5.0)
        if c == 0.0:
            continue
        lhs = luxemburg_norm(u.scaled(c), p)
        rhs = abs(c) * luxemburg_norm(u, p)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_luxemburg_triangle_inequality(unit_mesh_16, rng):
    p = make_exponent(unit_mesh_16, 1.5 + 2.5 * rng.random(unit_mesh_16.n_nodes))
    for _ in range(20):
        u = rng.standard_normal(unit_mesh_16.n_nodes)
        v = rng.standard_normal(unit_mesh_16.n_nodes)
        nu = luxemburg_norm(DiscreteFunction(unit_mesh_16, u), p)
        nv = luxemburg_norm(DiscreteFunction(unit_mesh_16, v), p)
        nuv = luxemburg_norm(DiscreteFunction(unit_mesh_16, u + v), p)
        assert nuv <= nu + nv + 1e-10 * (nu + nv)


def test_sobolev_modular_values(unit_mesh_8):
    p = make_exponent(unit_mesh_8, 2.0)
    beta = make_weight(unit_mesh_8, 1.0, "boundary")
    one = DiscreteFunction.constant(unit_mesh_8, 1.0)
    assert sobolev_beta_modular(one, p, beta) == pytest.approx(4.0, rel=1e-13)
    assert sobolev_beta_modular(DiscreteFunction.zero(unit_mesh_8), p, beta) == 0.0


def test_sobolev_modular_linear_oracle():
    # u = x on the unit square: gradient power 1, boundary integral of x^2 is 5/3
    m = build_rectangle_mesh(1.0, 1.0, 1024, 4)
    p = make_exponent(m, 2.0)
    beta = make_weight(m, 1.0, "boundary")
    u = DiscreteFunction(m, m.nodes[:, 0].copy())
    assert sobolev_beta_modular(u, p, beta) == pytest.approx(8.0 / 3.0, abs=1e-6)


def test_sobolev_modular_rejects_zero_beta(unit_mesh_8):
    p = make_exponent(unit_mesh_8, 2.0)
    beta0 = make_weight(unit_mesh_8, 0.0, "boundary")
    u = DiscreteFunction.constant(unit_mesh_8, 1.0)
    with pytest.raises(ValueError, match="zero"):
        sobolev_beta_modular(u, p, beta0)
    with pytest.raises(ValueError, match="zero"):
        sobolev_beta_norm(u, p, beta0)


def test_sobolev_norm_constant(unit_mesh_8):
    p = make_exponent(unit_mesh_8, 2.0)
    beta = make_weight(unit_mesh_8, 1.0, "boundary")
    one = DiscreteFunction.constant(unit_mesh_8, 1.0)
    # modular of 1/tau is 4/tau^2, root at tau=2
    assert sobolev_beta_norm(one, p, beta) == pytest.approx(2.0, rel=1e-11)
    assert sobolev_beta_norm(DiscreteFunction.zero(unit_mesh_8), p, beta) == 0.0
    assert sobolev_beta_norm(one.scaled(2.0), p, beta) == pytest.approx(4.0, rel=1e-10)


def _random_exponent(mesh, rng, lo=1.5, hi=4.0):
    vals = lo + (hi - lo) * rng.random(mesh.n_nodes)
    return make_exponent(mesh, vals)


def test_norm_modular_sign_agreement(unit_mesh_16, rng):
    beta = make_weight(unit_mesh_16, 1.0, "boundary")
    for _ in range(50):
        p = _random_exponent(unit_mesh_16, rng)
        u = DiscreteFunction(unit_mesh_16, rng.standard_normal(unit_mesh_16.n_nodes))
        target = rng.uniform(0.2, 2.0)
        u = u.scaled(target / sobolev_beta_norm(u, p, beta))
        n = sobolev_beta_norm(u, p, beta)
        rho = sobolev_beta_modular(u, p, beta)
        if n < 1.0 - 1e-9:
            assert rho < 1.0
        elif n > 1.0 + 1e-9:
            assert rho > 1.0
        else:
            assert rho == pytest.approx(1.0, abs=1e-8)


def test_norm_modular_power_bounds(unit_mesh_16, rng):
    beta = make_weight(unit_mesh_16, 1.0, "boundary")
    for _ in range(50):
        p = _random_exponent(unit_mesh_16, rng)
        u = DiscreteFunction(unit_mesh_16, rng.standard_normal(unit_mesh_16.n_nodes))
        inside = rng.random() < 0.5
        target = rng.uniform(0.05, 1.0) if inside else rng.uniform(1.0, 5.0)
        u = u.scaled(target / sobolev_beta_norm(u, p, beta))
        n = sobolev_beta_norm(u, p, beta)
        rho = sobolev_beta_modular(u, p, beta)
        slack = 1e-9 * max(1.0, rho)
        if n <= 1.0:
            assert n**p.sup_val <= rho + slack
            assert rho <= n**p.inf_val + slack
        else:
            assert n**p.inf_val <= rho + slack
            assert rho <= n**p.sup_val + slack


def test_holder_pair_bound_basics(unit_mesh_8):
    p = make_exponent(unit_mesh_8, 2.0)
    one = DiscreteFunction.constant(unit_mesh_8, 1.0)
    lhs, rhs = holder_pair_bound(one, one, p)
    assert lhs == pytest.approx(1.0, rel=1e-12)
    assert rhs == pytest.approx(2.0, rel=1e-10)
    lhs0, rhs0 = holder_pair_bound(DiscreteFunction.zero(unit_mesh_8), one, p)
    assert lhs0 == 0.0 and rhs0 == 0.0


def test_holder_inequality_random(unit_mesh_16, rng):
    for _ in range(200):
        p = _random_exponent(unit_mesh_16, rng, lo=1.3, hi=4.0)
        u = DiscreteFunction(unit_mesh_16, rng.standard_normal(unit_mesh_16.n_nodes))
        v = DiscreteFunction(unit_mesh_16, rng.standard_normal(unit_mesh_16.n_nodes))
        lhs, rhs = holder_pair_bound(u, v, p)
        assert lhs <= rhs * (1.0 + 1e-12)
