"""Builds the unit cell Y with its perforation and the perforated domain

Everything here is exact: lengths and areas are carried as Fractions and
only converted to floats when reported. Holes are axis-aligned rectangles
whose edges lie on the element grid, so every element of the structured
mesh is either fully solid or fully void.
"""
import logging
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy import ndimage
from shapely.geometry import box

from ..exceptions import (
    DisconnectedSolid,
    GeometryError,
    HoleTouchesBoundary,
    MisalignedHole,
    NonIntegerInverseEps,
    UnknownTag,
)
from ..helpers import parse_rational




logger = logging.getLogger(__name__)

#: Faces of the rectangle Omega in the order (x1 min, x1 max, x2 min, x2 max)
FACES = ('left', 'right', 'bottom', 'top')

#: Element sides in reference coordinates: s=0, s=1, t=0, t=1
SIDE_LEFT, SIDE_RIGHT, SIDE_BOTTOM, SIDE_TOP = range(4)




class FacetTag(Enum):
    """Classification of the edges of solid elements"""
    GAMMA_EPS = 'GammaEps'
    GAMMA_D = 'GammaD'
    GAMMA_N = 'GammaN'
    INTERIOR = 'Interior'


    @classmethod
    def coerce(cls, tag):
        """Returns a FacetTag from a member or its string value"""
        if isinstance(tag, cls):
            return tag
        for member in cls:
            if tag in (member.value, member.name):
                return member
        raise UnknownTag('Unknown boundary tag: {!r}'.format(tag))




class Facets(object):
    """Edges of solid elements carrying one tag

    Attributes:
        elements (numpy.ndarray): (n, 2) grid index of the adjacent solid
            element. Interior edges list the left/lower element.
        sides (numpy.ndarray): side of that element the edge lies on
        normals (numpy.ndarray): (n, 2) outward normal seen from the element
    """

    def __init__(self, elements, sides):
        self.elements = np.asarray(elements, dtype=int).reshape(-1, 2)
        self.sides = np.asarray(sides, dtype=int).reshape(-1)
        normals = np.array([[-1., 0.], [1., 0.], [0., -1.], [0., 1.]])
        self.normals = normals[self.sides] if len(self.sides) \
                       else np.zeros((0, 2))


    def __len__(self):
        return len(self.sides)




def _tag_facets(mask, outer_tags):
    """Tags every edge adjacent to at least one solid element

    Args:
        mask (numpy.ndarray): (nx, ny) boolean solid mask
        outer_tags (dict): maps each face in FACES to the FacetTag given
            to solid edges on that face

    Returns:
        Dict mapping (orientation, i, j) to FacetTag. Vertical edges are
        keyed ('v', i, j) for x1 = i*h, horizontal edges ('h', i, j) for
        x2 = j*h.
    """
    nx, ny = mask.shape
    tags = {}
    for i in range(nx + 1):
        for j in range(ny):
            left = mask[i - 1, j] if i > 0 else None
            right = mask[i, j] if i < nx else None
            tag = _classify(left, right, outer_tags['left'],
                            outer_tags['right'])
            if tag is not None:
                tags[('v', i, j)] = tag
    for i in range(nx):
        for j in range(ny + 1):
            below = mask[i, j - 1] if j > 0 else None
            above = mask[i, j] if j < ny else None
            tag = _classify(below, above, outer_tags['bottom'],
                            outer_tags['top'])
            if tag is not None:
                tags[('h', i, j)] = tag
    return tags


def _classify(lower, upper, lower_face_tag, upper_face_tag):
    """Classifies an edge from the solidity of its two neighbours"""
    if lower is None:
        return upper_face_tag if upper else None
    if upper is None:
        return lower_face_tag if lower else None
    if lower and upper:
        return FacetTag.INTERIOR
    if lower or upper:
        return FacetTag.GAMMA_EPS
    return None


def _facets_from_tags(tags, mask, tag):
    """Converts tagged edge keys to the solid element and side they bound"""
    nx, ny = mask.shape
    elements = []
    sides = []
    for (orient, i, j), val in sorted(tags.items()):
        if val is not tag:
            continue
        if orient == 'v':
            if i > 0 and mask[i - 1, j]:
                elements.append((i - 1, j))
                sides.append(SIDE_RIGHT)
            else:
                elements.append((i, j))
                sides.append(SIDE_LEFT)
        else:
            if j > 0 and mask[i, j - 1]:
                elements.append((i, j - 1))
                sides.append(SIDE_TOP)
            else:
                elements.append((i, j))
                sides.append(SIDE_BOTTOM)
    return Facets(elements, sides)


def _count_components(mask):
    """Counts edge-connected components of the solid elements"""
    _, num = ndimage.label(mask)
    return num




class UnitCell(object):
    """The reference cell Y = (0,1)^2 with solid part Y_s

    Args:
        hole (tuple): (x1 min, x2 min, x1 max, x2 max) as Fractions, or None
            for an unperforated cell
        m (int): elements per cell side
        solid_mask (numpy.ndarray): (m, m) boolean mask indexed [i1, i2]

    Attributes:
        eps (Fraction): always 1; lets a cell stand in for a domain when
            building discrete spaces
        origin (tuple): lower-left corner of the mesh
        h (Fraction): element size
    """
    is_cell = True
    eps = Fraction(1)
    origin = (Fraction(0), Fraction(0))

    def __init__(self, hole, m, solid_mask):
        self.hole = hole
        self.m = m
        self.solid_mask = solid_mask
        self.solid_mask.flags.writeable = False
        self.h = Fraction(1, m)
        self.facet_tags = _tag_facets(
            solid_mask, {face: FacetTag.INTERIOR for face in FACES})


    def __repr__(self):
        return 'UnitCell(hole={}, m={})'.format(self.hole, self.m)


    @property
    def shape(self):
        return self.solid_mask.shape


    @property
    def element_mask(self):
        return self.solid_mask


    @property
    def extent(self):
        return ((0, 0), (1, 1))


    @property
    def solid_area(self):
        """Exact measure of Y_s"""
        if self.hole is None:
            return Fraction(1)
        x1, y1, x2, y2 = self.hole
        return 1 - (x2 - x1) * (y2 - y1)


    @property
    def gamma_length(self):
        """Exact length of Gamma, the hole boundary inside Y"""
        if self.hole is None:
            return Fraction(0)
        x1, y1, x2, y2 = self.hole
        return 2 * ((x2 - x1) + (y2 - y1))


    @property
    def polygon(self):
        """Y_s as a shapely polygon"""
        cell = box(0, 0, 1, 1)
        if self.hole is None:
            return cell
        return cell.difference(box(*[float(c) for c in self.hole]))


    def facets(self, tag):
        """Returns the Facets carrying a tag"""
        return _facets_from_tags(self.facet_tags, self.solid_mask,
                                 FacetTag.coerce(tag))


    def to_cell_coords(self, points):
        """Returns the cell coordinate y of physical points"""
        return np.asarray(points, dtype=float)


    def filled(self):
        """Returns the unperforated cell with the same resolution"""
        return build_unit_cell(None, self.m)




class PerforatedDomain(object):
    """The perforated domain Omega_eps built from eps-scaled copies of Y_s

    Args:
        cell (UnitCell): the periodicity cell
        eps (Fraction): cell size, with 1/eps a positive integer
        extent (tuple): ((a1, a2), (b1, b2)) integer corners of Omega
        dirichlet (frozenset): faces of Omega carrying u = id

    Attributes:
        cells (list): cell indices k in K_eps
        facet_tags (dict): edge key -> FacetTag
        h (Fraction): element size eps/m
    """
    is_cell = False

    def __init__(self, cell, eps, extent, dirichlet):
        self.cell = cell
        self.eps = eps
        self.extent = extent
        self.dirichlet = frozenset(dirichlet)
        (a1, a2), (b1, b2) = extent
        inv = int(1 / eps)
        self.cells = [(k1, k2) for k1 in range(a1 * inv, b1 * inv)
                      for k2 in range(a2 * inv, b2 * inv)]
        self.cells_shape = ((b1 - a1) * inv, (b2 - a2) * inv)
        self.origin = (Fraction(a1), Fraction(a2))
        self.h = eps / cell.m
        mask = np.tile(cell.solid_mask, self.cells_shape)
        mask.flags.writeable = False
        self.element_mask = mask
        outer = {face: FacetTag.GAMMA_D if face in self.dirichlet
                 else FacetTag.GAMMA_N for face in FACES}
        self.facet_tags = _tag_facets(mask, outer)


    def __repr__(self):
        return 'PerforatedDomain(eps={}, extent={}, cell={!r})'.format(
            self.eps, self.extent, self.cell)


    @property
    def shape(self):
        return self.element_mask.shape


    @property
    def m(self):
        return self.cell.m


    @property
    def area(self):
        """Exact measure of Omega"""
        (a1, a2), (b1, b2) = self.extent
        return Fraction((b1 - a1) * (b2 - a2))


    @property
    def solid_area(self):
        """Exact measure of Omega_eps, counted element by element"""
        return int(self.element_mask.sum()) * self.h ** 2


    def facets(self, tag):
        """Returns the Facets carrying a tag"""
        return _facets_from_tags(self.facet_tags, self.element_mask,
                                 FacetTag.coerce(tag))


    def to_cell_coords(self, points):
        """Returns y = x/eps - [x/eps] for physical points"""
        scaled = np.asarray(points, dtype=float) / float(self.eps)
        return scaled - np.floor(scaled)


    def cell_of(self, points):
        """Returns the integer cell index [x/eps] of physical points"""
        scaled = np.asarray(points, dtype=float) / float(self.eps)
        return np.floor(scaled).astype(int)


    def filled(self):
        """Returns Omega meshed like this domain but without holes"""
        return PerforatedDomain(self.cell.filled(), self.eps, self.extent,
                                self.dirichlet)




def build_unit_cell(hole, m):
    """Builds the unit cell with an axis-aligned rectangular hole

    Args:
        hole (tuple): (x1 min, x2 min, x1 max, x2 max) as rationals (strings
            like "1/4" are accepted), or None for a cell without hole
        m (int): number of elements per cell side

    Returns:
        UnitCell
    """
    m = int(m)
    if hole is None:
        if m < 1:
            raise ValueError('m must be positive')
        return UnitCell(None, m, np.ones((m, m), dtype=bool))
    if m < 4:
        raise ValueError('A perforated cell needs m >= 4, got {}'.format(m))
    hole = tuple(parse_rational(c) for c in hole)
    x1, y1, x2, y2 = hole
    if not (x1 < x2 and y1 < y2):
        raise GeometryError('Degenerate hole: {}'.format(hole))
    if x1 <= 0 or y1 <= 0 or x2 >= 1 or y2 >= 1:
        raise HoleTouchesBoundary('Hole {} touches the boundary of Y'.format(
            tuple(str(c) for c in hole)))
    if not box(0, 0, 1, 1).contains_properly(box(*[float(c) for c in hole])):
        raise HoleTouchesBoundary('Hole {} is not strictly inside Y'.format(
            tuple(str(c) for c in hole)))
    if any((c * m).denominator != 1 for c in hole):
        raise MisalignedHole('Hole corners {} are not on the {}-grid'.format(
            tuple(str(c) for c in hole), m))
    mask = np.ones((m, m), dtype=bool)
    mask[int(x1 * m):int(x2 * m), int(y1 * m):int(y2 * m)] = False
    if _count_components(mask) != 1:
        raise DisconnectedSolid('Solid part of the cell is not connected')
    cell = UnitCell(hole, m, mask)
    logger.debug('Built unit cell with |Y_s| = {}'.format(cell.solid_area))
    return cell


def build_domain(cell, eps, faces=('left',), extent=((0, 0), (1, 1))):
    """Builds the perforated domain Omega_eps and classifies its boundary

    Args:
        cell (UnitCell): the periodicity cell
        eps (mixed): rational cell size with integer inverse
        faces (iterable): faces of Omega (see FACES) with u = id
        extent (tuple): ((a1, a2), (b1, b2)) integer corners of Omega

    Returns:
        PerforatedDomain
    """
    try:
        eps = parse_rational(eps)
    except (ValueError, ZeroDivisionError) as e:
        raise NonIntegerInverseEps('eps={!r} is not rational'.format(eps)) from e
    if eps <= 0 or (1 / eps).denominator != 1:
        raise NonIntegerInverseEps(
            'eps={} does not have an integer inverse'.format(eps))
    dirichlet = frozenset(faces)
    if not dirichlet:
        raise ValueError('faces must name at least one face')
    unknown = dirichlet - set(FACES)
    if unknown:
        raise ValueError('Unknown faces: {}'.format(sorted(unknown)))
    (a1, a2), (b1, b2) = extent
    extent = ((int(a1), int(a2)), (int(b1), int(b2)))
    if not (extent[0][0] < extent[1][0] and extent[0][1] < extent[1][1]):
        raise GeometryError('Empty extent: {}'.format(extent))
    domain = PerforatedDomain(cell, eps, extent, dirichlet)
    if _count_components(domain.element_mask) != 1:
        raise DisconnectedSolid('Omega_eps is not connected')
    logger.info('Built domain with eps={} ({} cells, {} solid elements)'.format(
        eps, len(domain.cells), int(domain.element_mask.sum())))
    return domain


def boundary_measure(domain, tag):
    """Returns the total length of the edges carrying a tag

    Args:
        domain (PerforatedDomain): the domain (a UnitCell also works)
        tag (mixed): a FacetTag or its string value

    Returns:
        Length as a float, computed exactly before conversion
    """
    tag = FacetTag.coerce(tag)
    count = sum(1 for val in domain.facet_tags.values() if val is tag)
    return float(count * domain.h)
