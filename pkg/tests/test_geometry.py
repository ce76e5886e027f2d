"""Defines tests for unit cells, perforated domains and facet tags"""
from fractions import Fraction

import pytest

from homlab.exceptions import (
    DisconnectedSolid,
    HoleTouchesBoundary,
    MisalignedHole,
    NonIntegerInverseEps,
    UnknownTag,
)
from homlab.mesh import FacetTag, boundary_measure, build_domain, build_unit_cell




@pytest.mark.parametrize(
    'hole, m, area, gamma',
    [
        (('1/4', '1/4', '3/4', '3/4'), 8, Fraction(3, 4), Fraction(2)),
        (('1/8', '1/8', '7/8', '7/8'), 8, Fraction(7, 16), Fraction(3)),
        (None, 4, Fraction(1), Fraction(0)),
    ]
)
def test_unit_cell_measures(hole, m, area, gamma):
    cell = build_unit_cell(hole, m)
    assert cell.solid_area == area
    assert cell.gamma_length == gamma
    assert int(cell.solid_mask.sum()) == area * m ** 2
    assert cell.polygon.area == pytest.approx(float(area))


def test_unit_cell_gamma_matches_tagged_edges(cell):
    assert boundary_measure(cell, FacetTag.GAMMA_EPS) == 2.0
    assert cell.polygon.interiors[0].length == pytest.approx(2.0)


@pytest.mark.parametrize(
    'hole',
    [
        ('0', '1/4', '3/4', '3/4'),
        ('1/4', '1/4', '1', '3/4'),
        ('1/4', '0', '3/4', '1'),
    ]
)
def test_hole_touching_boundary(hole):
    with pytest.raises(HoleTouchesBoundary):
        build_unit_cell(hole, 8)


def test_misaligned_hole():
    with pytest.raises(MisalignedHole):
        build_unit_cell(('1/3', '1/4', '3/4', '3/4'), 8)


def test_perforated_cell_needs_four_elements():
    with pytest.raises(ValueError):
        build_unit_cell(('1/4', '1/4', '3/4', '3/4'), 2)


def test_cell_outer_edges_are_interior(cell):
    tags = set(cell.facet_tags.values())
    assert tags == {FacetTag.INTERIOR, FacetTag.GAMMA_EPS}


def test_domain_cells(domain):
    assert len(domain.cells) == 4
    assert domain.cells_shape == (2, 2)
    assert domain.h == Fraction(1, 16)


@pytest.mark.parametrize('eps, expected', [('1/2', 4.0), ('1/4', 8.0),
                                           ('1/8', 16.0)])
def test_gamma_eps_length(cell, eps, expected):
    domain = build_domain(cell, eps, ['left'])
    assert boundary_measure(domain, 'GammaEps') == expected


def test_halving_eps_doubles_gamma(cell):
    coarse = build_domain(cell, '1/2', ['left'])
    fine = build_domain(cell, '1/4', ['left'])
    assert boundary_measure(fine, FacetTag.GAMMA_EPS) \
           == 2 * boundary_measure(coarse, FacetTag.GAMMA_EPS)


@pytest.mark.parametrize('eps', ['1/2', '1/4', '1/8'])
def test_solid_area_independent_of_eps(cell, eps):
    domain = build_domain(cell, eps, ['left'])
    assert domain.solid_area == domain.area * cell.solid_area


def test_dirichlet_and_neumann_cover_boundary(cell):
    domain = build_domain(cell, '1/4', ['left'])
    assert boundary_measure(domain, FacetTag.GAMMA_D) == 1.0
    assert boundary_measure(domain, FacetTag.GAMMA_N) == 3.0
    both = build_domain(cell, '1/4', ['left', 'bottom'])
    assert boundary_measure(both, FacetTag.GAMMA_D) == 2.0
    assert boundary_measure(both, FacetTag.GAMMA_N) == 2.0


def test_every_edge_tagged_once(domain):
    counts = {tag: len(domain.facets(tag)) for tag in FacetTag}
    assert sum(counts.values()) == len(domain.facet_tags)


def test_larger_extent(cell):
    domain = build_domain(cell, '1/2', ['left'], extent=((0, 0), (2, 1)))
    assert len(domain.cells) == 8
    assert domain.area == 2
    assert boundary_measure(domain, FacetTag.GAMMA_D) == 1.0


@pytest.mark.parametrize('eps', ['1/3.5', '2/3', '0', 0.3])
def test_non_integer_inverse_eps(cell, eps):
    with pytest.raises(NonIntegerInverseEps):
        build_domain(cell, eps, ['left'])


def test_unknown_tag(domain):
    with pytest.raises(UnknownTag):
        boundary_measure(domain, 'GammaX')


def test_cell_coordinates(domain):
    y = domain.to_cell_coords([[0.75, 0.25]])
    assert y.tolist() == [[0.5, 0.5]]
    assert domain.cell_of([[0.75, 0.25]]).tolist() == [[1, 0]]


def test_filled_domain(domain):
    filled = domain.filled()
    assert filled.element_mask.all()
    assert filled.solid_area == 1
    assert set(filled.facet_tags.values()) == {FacetTag.INTERIOR,
                                               FacetTag.GAMMA_D,
                                               FacetTag.GAMMA_N}


def test_disconnected_solid_is_rejected():
    with pytest.raises((DisconnectedSolid, HoleTouchesBoundary)):
        build_unit_cell(('0', '1/4', '1', '3/4'), 8)
