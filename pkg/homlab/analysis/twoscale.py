"""Periodic unfolding, local averages and two-scale distances

The unfolding of a field u on Omega_eps is T(u)(x, y) = u(eps [x/eps] +
eps y). It is constant in x on every cell, so samples are stored once per
cell: macro points are the cell centres and micro points are Gauss points
of the solid part of the unit cell.
"""
import logging
from collections import namedtuple

import numpy as np

from ..exceptions import FieldNotGlobal, MissingCorrector
from ..mesh.c1grid import C1Field, build_space, eval_jet
from ..mesh.geometry import FacetTag




logger = logging.getLogger(__name__)

ORDERS = ('value', 'grad', 'hess')




class TwoScaleSamples(namedtuple('TwoScaleSamples', ['cells', 'macro_points',
                                                     'micro_points', 'values',
                                                     'weights'])):
    """Samples of an unfolded quantity on macro cells x micro points

    Attributes:
        cells (numpy.ndarray): (K, 2) cell indices k
        macro_points (numpy.ndarray): (K, 2) cell centres eps (k + 1/2)
        micro_points (numpy.ndarray): (J, 2) points of the cell
        values (numpy.ndarray): (K, J, ...) samples
        weights (numpy.ndarray): (K, J) quadrature weights of Omega x Y_s
    """
    __slots__ = ()

    def norm(self):
        """Discrete L2(Omega x Y_s) norm of the samples"""
        sq = self.values.reshape(self.values.shape[:2] + (-1,)) ** 2
        return float(np.sqrt(np.sum(sq.sum(axis=-1) * self.weights)))


    def to_rows(self):
        """Yields (k1, k2, j, y1, y2, *values) rows for CSV output"""
        flat = self.values.reshape(self.values.shape[:2] + (-1,))
        for i, (k1, k2) in enumerate(self.cells):
            for j, (y1, y2) in enumerate(self.micro_points):
                yield [int(k1), int(k2), j, y1, y2] + list(flat[i, j])




class ZeroCorrector(object):
    """Explicit zero corrector for second-gradient distances"""

    def corrector_hess(self, G, y):
        return np.zeros(np.shape(G))




def micro_sampling(cell, quad_order=4, region='solid'):
    """Gauss points and weights of Y_s (or all of Y for region='full')"""
    if region not in ('solid', 'full'):
        raise ValueError('region must be solid or full')
    base = cell if region == 'solid' else cell.filled()
    space = build_space(base, quad_order=quad_order)
    points = space.qcell.reshape(-1, 2)
    weights = np.tile(space.qweights, space.n_elements)
    return points, weights


def _cells(domain):
    cells = np.array(domain.cells, dtype=int).reshape(-1, 2)
    eps = float(domain.eps)
    return cells, eps * (cells + 0.5), eps


def _physical(cells, eps, micro):
    return eps * (cells[:, None, :] + micro[None, :, :])


def _evaluate(field, points, order):
    """Jet component of a C1Field, or a callable's values, at points"""
    if order not in ORDERS:
        raise ValueError('order must be one of {}'.format(ORDERS))
    shape = points.shape[:-1]
    flat = points.reshape(-1, 2)
    if isinstance(field, C1Field):
        vals = getattr(eval_jet(field, flat), order)
    else:
        vals = np.asarray(field(flat), dtype=float)
    return vals.reshape(shape + vals.shape[1:])


def unfold(domain, field, sampling=None, order='value', quad_order=4,
           region='solid'):
    """Samples T_eps of a field or of one of its derivatives

    Args:
        domain (PerforatedDomain): the perforated domain
        field (mixed): a C1Field, or a callable mapping points (n, 2) to
            values (n, ...)
        sampling (numpy.ndarray): explicit micro points (J, 2) sharing the
            measure of the sampled region equally; defaults to Gauss points
            of Y_s with their own weights. Either way the weights sum to
            |Omega| times the measure of the region.
        order (str): 'value', 'grad' or 'hess' for C1Fields
        region (str): 'solid' samples Y_s, 'full' samples all of Y

    Returns:
        TwoScaleSamples
    """
    cells, centres, eps = _cells(domain)
    if sampling is None:
        micro, wy = micro_sampling(domain.cell, quad_order, region)
    else:
        micro = np.atleast_2d(np.asarray(sampling, dtype=float))
        area = micro_sampling(domain.cell, quad_order, region)[1].sum()
        wy = np.full(len(micro), area / len(micro))
    points = _physical(cells, eps, micro)
    values = _evaluate(field, points, order)
    weights = np.broadcast_to(eps ** 2 * wy, (len(cells), len(micro))).copy()
    return TwoScaleSamples(cells, centres, micro, values, weights)


def unfold_boundary(domain, func, quad_order=4):
    """Samples the boundary unfolding of a function on the hole boundaries

    Weights are eps^2 times the surface weights of Gamma, so the returned
    L2(Omega x Gamma) norm equals eps^(1/2) times the L2(Gamma_eps) norm.

    Args:
        domain (PerforatedDomain): the perforated domain
        func (callable): maps physical points (n, 2) to values (n, ...)

    Returns:
        TwoScaleSamples
    """
    cells, centres, eps = _cells(domain)
    quad = build_space(domain.cell, quad_order=quad_order).facet_quadrature(
        FacetTag.GAMMA_EPS, order=quad_order)
    micro = quad.points.reshape(-1, 2)
    ws = quad.weights.ravel()
    values = _evaluate(func, _physical(cells, eps, micro), 'value')
    weights = np.broadcast_to(eps ** 2 * ws, (len(cells), len(micro))).copy()
    return TwoScaleSamples(cells, centres, micro, values, weights)


def local_average(domain, field, quad_order=4):
    """Mean of the unfolded field over Y in every cell

    Args:
        domain (PerforatedDomain): the perforated domain
        field (mixed): C1Field on the unperforated domain, or a callable

    Returns:
        Array indexed by the cell position within Omega, shape
        cells_shape + value shape
    """
    if isinstance(field, C1Field) and not np.all(
            field.space.domain.element_mask):
        raise FieldNotGlobal('local_average needs a field defined on all of'
                             ' Omega; extend it first')
    samples = unfold(domain, field, quad_order=quad_order, region='full')
    wy = samples.weights[0] / float(domain.eps) ** 2
    means = np.einsum('kj...,j->k...', samples.values, wy) / wy.sum()
    return means.reshape(tuple(domain.cells_shape) + means.shape[1:])


def two_scale_distance(domain, micro_field, macro_field, corrector=None,
                       order='value', quad_order=4):
    """L2(Omega x Y_s) distance between T_eps(D u_eps) and its two-scale limit

    The limit D u_0 is evaluated at the physical point eps [x/eps] + eps y
    of each sample. For order='hess' the corrector second gradient
    hess_y u_2 is added.

    Args:
        domain (PerforatedDomain): the perforated domain
        micro_field (C1Field): u_eps on Omega_eps
        macro_field (mixed): u_0 as a C1Field on Omega or a callable
        corrector (mixed): object with a corrector_hess(G, y) method, such
            as CellSolution, CorrectorBasis or ZeroCorrector
        order (str): 'value', 'grad' or 'hess'

    Returns:
        float
    """
    if order == 'hess' and corrector is None:
        raise MissingCorrector('The second-gradient distance needs a'
                               ' corrector (use ZeroCorrector for none)')
    micro = unfold(domain, micro_field, order=order, quad_order=quad_order)
    points = _physical(micro.cells, float(domain.eps), micro.micro_points)
    limit = _evaluate(macro_field, points, order)
    if order == 'hess':
        limit = limit + corrector.corrector_hess(limit, micro.micro_points)
    diff = micro.values - limit
    return TwoScaleSamples(micro.cells, micro.macro_points,
                           micro.micro_points, diff, micro.weights).norm()
