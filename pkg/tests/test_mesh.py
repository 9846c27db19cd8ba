import numpy as np
import pytest

from pqspectra import build_rectangle_mesh, integrate_boundary, integrate_volume, load_field, save_field


def test_unit_square_geometry():
    m = build_rectangle_mesh(1.0, 1.0, 2, 2)
    assert m.volume_weights.sum() == pytest.approx(1.0, rel=1e-12)
    assert m.boundary_weights.sum() == pytest.approx(4.0, rel=1e-12)


def test_rectangle_geometry():
    m = build_rectangle_mesh(2.0, 1.0, 4, 2)
    assert m.volume_weights.sum() == pytest.approx(2.0, rel=1e-12)
    assert m.boundary_weights.sum() == pytest.approx(6.0, rel=1e-12)


def test_volume_weights_partition_of_unity():
    m = build_rectangle_mesh(1.0, 1.0, 32, 32)
    assert abs(m.volume_weights.sum() - 1.0) < 1e-12
    assert abs(m.node_weights.sum() - 1.0) < 1e-12


def test_all_quadrature_weights_positive():
    m = build_rectangle_mesh(1.5, 0.7, 5, 9)
    assert (m.volume_weights > 0).all()
    assert (m.node_weights > 0).all()
    assert (m.boundary_weights > 0).all()


def test_boundary_facets_belong_to_one_cell():
    m = build_rectangle_mesh(1.0, 1.0, 4, 4)
    cell_edges = {}
    for cell in m.cells:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            cell_edges.setdefault(frozenset((cell[a], cell[b])), 0)
            cell_edges[frozenset((cell[a], cell[b]))] += 1
    for fa, fb in m.boundary_facets:
        assert cell_edges[frozenset((fa, fb))] == 1


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        build_rectangle_mesh(1.0, 1.0, 1, 4)
    with pytest.raises(ValueError):
        build_rectangle_mesh(1.0, 1.0, 4, 1)
    with pytest.raises(ValueError):
        build_rectangle_mesh(-1.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        build_rectangle_mesh(1.0, 0.0, 4, 4)


def test_integrate_volume_constants():
    m = build_rectangle_mesh(1.0, 1.0, 8, 8)
    assert integrate_volume(m, np.ones(m.n_cells)) == pytest.approx(1.0, rel=1e-14)
    assert integrate_volume(m, np.full(m.n_cells, 3.7)) == pytest.approx(3.7, rel=1e-14)


def test_integrate_volume_linear_integrand():
    # int of x over the unit square is 1/2; the centroid rule is exact for linears
    m = build_rectangle_mesh(1.0, 1.0, 32, 32)
    f = m.volume_points[:, 0]
    assert integrate_volume(m, f) == pytest.approx(0.5, abs=1e-10)


def test_integrate_volume_linearity(rng):
    m = build_rectangle_mesh(1.0, 1.0, 8, 8)
    f = rng.standard_normal(m.n_cells)
    g = rng.standard_normal(m.n_cells)
    lhs = integrate_volume(m, 2.5 * f + 0.3 * g)
    rhs = 2.5 * integrate_volume(m, f) + 0.3 * integrate_volume(m, g)
    assert lhs == pytest.approx(rhs, abs=1e-14)


def test_integrate_volume_rejects_nonfinite():
    m = build_rectangle_mesh(1.0, 1.0, 4, 4)
    f = np.ones(m.n_cells)
    f[7] = np.nan
    with pytest.raises(ValueError, match="index 7"):
        integrate_volume(m, f)


def test_integrate_boundary_values():
    m = build_rectangle_mesh(1.0, 1.0, 8, 8)
    b = m.boundary_weights.shape[0]
    assert integrate_boundary(m, np.ones(b)) == pytest.approx(4.0, rel=1e-14)
    assert integrate_boundary(m, np.zeros(b)) == 0.0
    assert integrate_boundary(m, np.full(b, 0.25)) == pytest.approx(1.0, rel=1e-14)


def test_refinement_convergence_smooth_integrand():
    exact = (1 - np.cos(1.0)) * (np.e - 1.0)  # int sin(x) e^y over the unit square
    errs = []
    for n in (8, 16, 32, 64):
        m = build_rectangle_mesh(1.0, 1.0, n, n)
        f = np.sin(m.volume_points[:, 0]) * np.exp(m.volume_points[:, 1])
        errs.append(abs(integrate_volume(m, f) - exact))
    assert errs[0] > errs[1] > errs[2] > errs[3]


def test_gradient_of_linear_function_is_exact():
    m = build_rectangle_mesh(2.0, 1.0, 6, 4)
    vals = 3.0 * m.nodes[:, 0] - 1.5 * m.nodes[:, 1] + 0.25
    g = m.gradient_at_cells(vals)
    assert np.allclose(g[:, 0], 3.0, atol=1e-13)
    assert np.allclose(g[:, 1], -1.5, atol=1e-13)


def test_field_dump_round_trip(tmp_path, rng):
    m = build_rectangle_mesh(1.0, 2.0, 5, 3)
    vals = rng.standard_normal(m.n_nodes)
    path = tmp_path / "u.field"
    save_field(path, m, vals, config_hash="abc123")
    loaded, (nx, ny, lx, ly) = load_field(path)
    assert (nx, ny) == (5, 3)
    assert (lx, ly) == (1.0, 2.0)
    assert np.array_equal(loaded, vals)
    header = path.read_text().splitlines()[0]
    assert header == "pq-field v1 5 3 1.0 2.0"
