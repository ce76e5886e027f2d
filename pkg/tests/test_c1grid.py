"""Defines tests for the bicubic Hermite spaces, jets and quadrature"""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from homlab.exceptions import (
    NonFiniteDensity,
    PeriodicOnMacroDomain,
    PeriodicSpace,
    PointInVoid,
)
from homlab.mesh import (
    C1Field,
    apply_dirichlet_id,
    build_domain,
    build_space,
    build_unit_cell,
    eval_jet,
    integrate,
)
from homlab.mesh.c1grid import basis_tables


P = np.polynomial.polynomial


def polynomial_jet(C):
    """Exact jet of the vector polynomial sum C[c, a, b] x1^a x2^b"""
    def func(points):
        x1, x2 = points[:, 0], points[:, 1]
        def ev(D):
            return P.polyval2d(x1, x2, D)
        def der(D, axis):
            return P.polyder(D, axis=axis)
        value = np.stack([ev(C[c]) for c in range(2)], axis=-1)
        grad = np.stack([np.stack([ev(der(C[c], j)) for j in range(2)],
                                  axis=-1) for c in range(2)], axis=1)
        hess = np.stack([np.stack([np.stack(
            [ev(der(der(C[c], j), k)) for k in range(2)], axis=-1)
            for j in range(2)], axis=1) for c in range(2)], axis=1)
        return value, grad, hess
    return func


@pytest.fixture(scope='module')
def square():
    return build_domain(build_unit_cell(None, 4), '1/2', ['left'])


@pytest.fixture(scope='module')
def square_space(square):
    return build_space(square)


@pytest.fixture(scope='module')
def space(domain):
    return build_space(domain)




def test_dof_count_of_perforated_cell(cell):
    space = build_space(cell)
    # 81 grid nodes minus the 9 strictly inside the hole
    assert space.n_nodes == 72
    assert space.dof_count == 4 * 2 * 72


def test_periodic_torus_nodes():
    space = build_space(build_unit_cell(None, 2), periodic=True)
    assert space.n_nodes == 4
    assert space.dof_count == 32


def test_periodic_identifies_faces(cell):
    space = build_space(cell, periodic=True)
    assert (space.node_id[0] == space.node_id[-1]).all()
    assert (space.node_id[:, 0] == space.node_id[:, -1]).all()


def test_quad_order_too_low(cell):
    with pytest.raises(ValueError):
        build_space(cell, quad_order=2)


def test_periodic_on_macro_domain(domain):
    with pytest.raises(PeriodicOnMacroDomain):
        build_space(domain, periodic=True)


def test_numbering_is_deterministic(domain):
    first = build_space(domain)
    second = build_space(domain)
    assert (first.elem_dofs == second.elem_dofs).all()




def test_identity_jet(space):
    u = space.identity()
    points = space.qpoints.reshape(-1, 2)[::5]
    jet = eval_jet(u, points)
    assert np.allclose(jet.value, points, atol=1e-12)
    assert np.allclose(jet.grad, np.eye(2), atol=1e-12)
    assert np.allclose(jet.hess, 0, atol=1e-10)


def test_constant_field(space):
    c = np.array([0.3, -1.2])
    u = space.interpolate(lambda x: (np.broadcast_to(c, x.shape),
                                     np.zeros((len(x), 2, 2)),
                                     np.zeros((len(x), 2, 2, 2))))
    jet = eval_jet(u, space.qpoints.reshape(-1, 2))
    assert np.allclose(jet.value, c, atol=1e-12)
    assert np.allclose(jet.grad, 0, atol=1e-12)
    assert np.allclose(jet.hess, 0, atol=1e-10)


def test_cubic_second_derivative(space):
    C = np.zeros((2, 4, 4))
    C[0, 3, 0] = 1
    C[1, 0, 3] = 1
    u = space.interpolate(polynomial_jet(C))
    points = space.qpoints.reshape(-1, 2)
    jet = eval_jet(u, points)
    assert np.allclose(jet.hess[:, 0, 0, 0], 6 * points[:, 0], atol=1e-12)
    assert np.allclose(jet.hess[:, 1, 1, 1], 6 * points[:, 1], atol=1e-12)


@given(arrays(np.float64, (2, 4, 4),
              elements=st.floats(-1, 1, allow_nan=False)))
def test_patch_test(square_space, C):
    u = square_space.interpolate(polynomial_jet(C))
    rng = np.random.default_rng(0)
    points = rng.uniform(0, 1, (20, 2))
    jet = eval_jet(u, points)
    value, grad, hess = polynomial_jet(C)(points)
    assert np.allclose(jet.value, value, atol=1e-11)
    assert np.allclose(jet.grad, grad, atol=1e-11)
    assert np.allclose(jet.hess, hess, atol=1e-10)


def test_hessian_is_symmetric(space):
    rng = np.random.default_rng(1)
    u = C1Field(space, rng.standard_normal(space.dof_count))
    hess = space.jets(u).hess
    assert np.allclose(hess, hess.transpose(0, 1, 2, 4, 3), atol=1e-12)


def test_c1_continuity_across_edges(square_space):
    space = square_space
    rng = np.random.default_rng(2)
    u = C1Field(space, rng.standard_normal(space.dof_count))
    t = rng.uniform(0, 1, 10)

    def edge_jet(elem, s):
        B0, B1, _ = basis_tables(np.full(10, s), t, space.h)
        U = u.components[:, space.elem_dofs[elem]]
        return U @ B0.T, np.einsum('ca,nda->ncd', U, B1)

    val_l, grad_l = edge_jet(space.elem_index[0, 0], 1.)
    val_r, grad_r = edge_jet(space.elem_index[1, 0], 0.)
    assert np.allclose(val_l, val_r, atol=1e-11)
    assert np.allclose(grad_l, grad_r, atol=1e-11)


def test_point_in_void(space):
    u = space.identity()
    with pytest.raises(PointInVoid):
        eval_jet(u, [[0.25, 0.25]])


def test_point_on_hole_edge_is_solid(space):
    jet = eval_jet(space.identity(), [[0.125, 0.25]])
    assert np.allclose(jet.value, [[0.125, 0.25]])




def test_integrate_measure(space):
    assert integrate(space, lambda x, y, jet: 1.) == pytest.approx(0.75,
                                                                   abs=1e-14)


def test_integrate_gradient_of_identity(space):
    def density(x, y, jet):
        return np.einsum('eqcd,eqcd->eq', jet.grad, jet.grad)
    assert integrate(space, density, field=space.identity()) \
           == pytest.approx(1.5, abs=1e-13)


def test_integrate_polynomial(square_space):
    val = integrate(square_space,
                    lambda x, y, jet: x[..., 0] ** 2 * x[..., 1] ** 2)
    assert val == pytest.approx(1 / 9, abs=1e-14)


def test_integrate_is_linear(space):
    def f(x, y, jet):
        return np.sin(x[..., 0]) * y[..., 1]
    def g(x, y, jet):
        return x[..., 1] ** 3
    combined = integrate(space, lambda x, y, jet: 2 * f(x, y, jet)
                         + g(x, y, jet))
    assert combined == pytest.approx(2 * integrate(space, f)
                                     + integrate(space, g), rel=1e-13)


def test_parallel_integration_matches(space):
    def density(x, y, jet):
        return np.exp(x[..., 0]) * np.cos(x[..., 1])
    serial = integrate(space, density)
    threaded = integrate(space, density, deterministic=False, workers=3)
    assert threaded == pytest.approx(serial, rel=1e-12)


def test_non_finite_density(space):
    def density(x, y, jet):
        return np.where(x[..., 0] > 0.9, np.inf, 1.)
    with pytest.raises(NonFiniteDensity) as err:
        integrate(space, density)
    assert err.value.point[0] > 0.9




def test_mass_rows_integrate_components(space):
    rows = space.mass_rows()
    u = space.identity()
    # Holes are centred in their cells, so the mean of x over Omega_eps is
    # the centre of Omega
    assert rows @ u.coeffs == pytest.approx([0.375, 0.375], abs=1e-13)


def test_gram_of_constant_field(space):
    u = space.interpolate(lambda x: (np.tile([1., 0.], (len(x), 1)),
                                     np.zeros((len(x), 2, 2)),
                                     np.zeros((len(x), 2, 2, 2))))
    for order in (0, 1, 2):
        G = space.gram(order)
        assert u.coeffs @ (G @ u.coeffs) == pytest.approx(0.75, abs=1e-13)




def test_dirichlet_value_on_face(space):
    u = space.zeros()
    apply_dirichlet_id(space, u)
    points = np.array([[0., 0.1], [0., 0.5], [0., 0.93]])
    jet = eval_jet(u, points)
    assert np.allclose(jet.value, points, atol=1e-12)
    assert np.allclose(jet.grad[:, :, 1], [0., 1.], atol=1e-12)


def test_dirichlet_set_is_deterministic(domain):
    first = build_space(domain)
    second = build_space(domain)
    u, v = first.zeros(), second.zeros()
    assert (apply_dirichlet_id(first, u) == apply_dirichlet_id(second, v)).all()
    assert (apply_dirichlet_id(first, u) == apply_dirichlet_id(first, u)).all()


def test_dirichlet_leaves_normal_derivative_free(space):
    fixed, _ = space.dirichlet_data()
    node = space.node_id[0, 3]
    for c in range(2):
        base = c * space.nsd + 4 * node
        assert base in fixed
        assert base + 2 in fixed
        assert base + 1 not in fixed
        assert base + 3 not in fixed


def test_dirichlet_on_periodic_space(cell):
    space = build_space(cell, periodic=True)
    with pytest.raises(PeriodicSpace):
        apply_dirichlet_id(space, space.zeros())




def test_field_validation(space):
    with pytest.raises(ValueError):
        C1Field(space, np.zeros(3))
    coeffs = np.zeros(space.dof_count)
    coeffs[0] = np.nan
    with pytest.raises(ValueError):
        C1Field(space, coeffs)


def test_field_rows(space):
    rows = list(space.identity().to_rows())
    assert len(rows) == space.dof_count
    assert rows[0][:2] == (0, 0)
