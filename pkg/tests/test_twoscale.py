"""Defines tests for unfolding, local averages and two-scale distances"""
import numpy as np
import pytest

from homlab.analysis.twoscale import (
    ZeroCorrector,
    local_average,
    micro_sampling,
    two_scale_distance,
    unfold,
    unfold_boundary,
)
from homlab.exceptions import FieldNotGlobal, MissingCorrector
from homlab.mechanics.homog import CorrectorBasis, cell_correctors, unit_tensor
from homlab.mechanics.materials import StrainGradientLaw
from homlab.mesh import C1Field, build_domain, build_space, eval_jet, integrate


def smooth(points):
    x1, x2 = points[:, 0], points[:, 1]
    return np.stack([np.sin(x1) * np.cos(x2), x1 * x2 ** 2], axis=-1)


def smooth_grad(points):
    x1, x2 = points[:, 0], points[:, 1]
    return np.stack([
        np.stack([np.cos(x1) * np.cos(x2), -np.sin(x1) * np.sin(x2)], -1),
        np.stack([x2 ** 2, 2 * x1 * x2], -1),
    ], axis=1)


@pytest.fixture(scope='module')
def space(domain):
    return build_space(domain)


@pytest.fixture(scope='module')
def filled_space(domain):
    return build_space(domain.filled())


def random_field(space, seed):
    rng = np.random.default_rng(seed)
    return C1Field(space, rng.standard_normal(space.dof_count))




def test_unfold_constant(domain):
    samples = unfold(domain, lambda x: np.tile([0.3, -1.], (len(x), 1)))
    assert np.allclose(samples.values, [0.3, -1.])
    assert samples.values.shape[:2] == (4, len(samples.micro_points))


def test_unfold_coordinate(domain):
    eps = float(domain.eps)
    samples = unfold(domain, lambda x: x[:, 0])
    expected = eps * (samples.cells[:, None, 0]
                      + samples.micro_points[None, :, 0])
    assert np.allclose(samples.values, expected, atol=1e-15)


@pytest.mark.parametrize('eps', ['1/2', '1/4'])
def test_unfolding_isometry(cell, eps):
    domain = build_domain(cell, eps, ['left'])
    space = build_space(domain)
    for seed in range(5):
        u = random_field(space, seed)
        norm = np.sqrt(integrate(
            space, lambda x, y, jet: np.einsum('eqc,eqc->eq', jet.value,
                                               jet.value), field=u))
        assert unfold(domain, u).norm() == pytest.approx(norm, rel=1e-12)


@pytest.mark.parametrize('region', ['solid', 'full'])
def test_explicit_sampling_weights(domain, region):
    one = lambda x: np.ones(len(x))
    y = np.array([[0.1, 0.5], [0.6, 0.9], [0.85, 0.15]])
    default = unfold(domain, one, region=region)
    explicit = unfold(domain, one, sampling=y, region=region)
    solid = float(domain.cell.solid_area) if region == 'solid' else 1.
    expected = float(domain.area) * solid
    assert default.weights.sum() == pytest.approx(expected, rel=1e-12)
    assert explicit.weights.sum() == pytest.approx(expected, rel=1e-12)
    assert np.allclose(explicit.weights, explicit.weights[0, 0])


def test_unfold_is_linear(domain, space):
    u, v = random_field(space, 1), random_field(space, 2)
    combined = C1Field(space, 2 * u.coeffs - v.coeffs)
    assert np.allclose(unfold(domain, combined, order='grad').values,
                       2 * unfold(domain, u, order='grad').values
                       - unfold(domain, v, order='grad').values, atol=1e-12)


def test_gradient_scaling(domain):
    eps = float(domain.eps)
    h = 1e-4
    y = np.array([[0.1, 0.5], [0.6, 0.9], [0.85, 0.15]])
    grad = unfold(domain, smooth_grad, sampling=y).values
    for d in range(2):
        step = np.zeros(2)
        step[d] = h
        plus = unfold(domain, smooth, sampling=y + step).values
        minus = unfold(domain, smooth, sampling=y - step).values
        assert np.allclose((plus - minus) / (2 * h), eps * grad[..., d],
                           atol=1e-7)


def test_bad_order_and_region(domain, space):
    with pytest.raises(ValueError):
        unfold(domain, space.identity(), order='curl')
    with pytest.raises(ValueError):
        micro_sampling(domain.cell, region='void')


def test_sample_rows(domain):
    samples = unfold(domain, smooth)
    rows = list(samples.to_rows())
    assert len(rows) == samples.values.shape[0] * samples.values.shape[1]
    assert len(rows[0]) == 5 + 2




@pytest.mark.parametrize('eps', ['1/2', '1/4'])
def test_boundary_unfolding_scaling(cell, eps):
    domain = build_domain(cell, eps, ['left'])
    samples = unfold_boundary(domain, lambda x: np.ones(len(x)))
    # eps^(1/2) times the L2 norm of 1 on Gamma_eps, whose length is 2/eps
    expected = float(domain.eps) ** 0.5 * np.sqrt(2 / float(domain.eps))
    assert samples.norm() == pytest.approx(expected, rel=1e-13)




def test_local_average_constant(domain):
    avg = local_average(domain, lambda x: np.tile([2., 5.], (len(x), 1)))
    assert avg.shape == (2, 2, 2)
    assert np.allclose(avg, [2., 5.])


def test_local_average_affine(domain):
    eps = float(domain.eps)
    avg = local_average(domain, lambda x: x[:, 0])
    cells = np.array(domain.cells).reshape(avg.shape + (2,))
    assert np.allclose(avg, eps * (cells[..., 0] + 0.5), atol=1e-14)


def test_local_average_preserves_mean(domain, filled_space):
    u = random_field(filled_space, 3)
    avg = local_average(domain, u)
    mean = filled_space.mass_rows() @ u.coeffs
    assert np.allclose(avg.reshape(-1, 2).mean(axis=0), mean, atol=1e-12)


def test_local_average_needs_global_field(domain, space):
    with pytest.raises(FieldNotGlobal):
        local_average(domain, space.identity())




def test_distance_of_equal_fields(domain, space):
    u = space.identity()
    assert two_scale_distance(domain, u, lambda x: x) < 1e-10
    assert two_scale_distance(domain, u, lambda x: np.broadcast_to(
        np.eye(2), (len(x), 2, 2)), order='grad') < 1e-12


def test_distance_against_interpolant(domain, space, filled_space):
    u = random_field(filled_space, 4)
    def jet(x):
        j = eval_jet(u, x)
        return j.value, j.grad, j.hess
    micro = space.interpolate(jet)
    for order in ('value', 'grad'):
        assert two_scale_distance(domain, micro, u, order=order) < 1e-10


def test_hess_distance_needs_corrector(domain, space):
    with pytest.raises(MissingCorrector):
        two_scale_distance(domain, space.identity(), lambda x: x,
                           order='hess')


def test_hess_distance_with_zero_corrector(domain, space):
    zero = lambda x: np.zeros((len(x), 2, 2, 2))
    assert two_scale_distance(domain, space.identity(), zero, order='hess',
                              corrector=ZeroCorrector()) < 1e-8


def test_corrector_basis(coarse_cell):
    sols = cell_correctors(coarse_cell, StrainGradientLaw(p=2))
    basis = CorrectorBasis(sols)
    y = np.array([[0.1, 0.1], [0.9, 0.4]])
    G = np.broadcast_to(unit_tensor(1), (3, 2, 2, 2, 2))
    hess = basis.corrector_hess(G, y)
    assert hess.shape == (3, 2, 2, 2, 2)
    assert np.allclose(hess[0], eval_jet(sols[1].u2, y).hess, atol=1e-12)
    assert np.allclose(ZeroCorrector().corrector_hess(G, y), 0)
