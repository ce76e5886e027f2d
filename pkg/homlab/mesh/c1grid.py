"""C1-conforming bicubic Hermite fields on structured perforated grids

Every node carries the value, both first derivatives and the mixed second
derivative of each of the two vector components. The tensor-product cubic
Hermite basis reproduces every bicubic polynomial and is C1 across element
edges, so second gradients are square integrable and the discrete fields
stand in for W^{2,p}.

Coefficient layout of a C1Field is component-major: the scalar DOF
``4 * node + kind`` of component ``c`` is stored at ``c * nsd + 4 * node +
kind`` where kind is 0 (value), 1 (d/dx1), 2 (d/dx2) or 3 (d2/dx1dx2).
"""
import logging
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np
from scipy import sparse

from .geometry import (
    FacetTag,
    SIDE_BOTTOM,
    SIDE_LEFT,
    SIDE_RIGHT,
    SIDE_TOP,
)
from ..exceptions import (
    NonFiniteDensity,
    PeriodicOnMacroDomain,
    PeriodicSpace,
    PointInVoid,
)




logger = logging.getLogger(__name__)

Jet2 = namedtuple('Jet2', ['value', 'grad', 'hess'])
Jet2.__doc__ = """Value, gradient and second gradient of a vector field

Arrays carry any number of leading batch axes followed by (2,), (2, 2) and
(2, 2, 2). hess[..., i, j, k] is d_jk u_i and is symmetric in j, k.
"""

FacetQuadrature = namedtuple('FacetQuadrature', ['elements', 'points',
                                                 'weights', 'basis',
                                                 'normals'])

#: Index of the 16 local scalar basis functions: node (p1, p2) and kind
#: (d1, d2) with a = 4 * (p1 + 2 * p2) + (d1 + 2 * d2)
_LOCAL = [(p1, p2, d1, d2) for p2 in (0, 1) for p1 in (0, 1)
          for d2 in (0, 1) for d1 in (0, 1)]
_F1 = np.array([2 * p1 + d1 for p1, p2, d1, d2 in _LOCAL])
_F2 = np.array([2 * p2 + d2 for p1, p2, d1, d2 in _LOCAL])
NODE_OFFSETS = [(p1, p2) for p2 in (0, 1) for p1 in (0, 1)]




def hermite_1d(s, h):
    """Evaluates the four cubic Hermite functions on an element of size h

    Args:
        s (numpy.ndarray): reference coordinates in [0, 1]
        h (float): element size

    Returns:
        Array (3, 4, n) of derivatives of order 0, 1, 2 with respect to the
        physical coordinate, for functions ordered (value at 0, slope at 0,
        value at 1, slope at 1)
    """
    s = np.asarray(s, dtype=float)
    s2 = s * s
    s3 = s2 * s
    vals = np.stack([1 - 3 * s2 + 2 * s3,
                     h * (s - 2 * s2 + s3),
                     3 * s2 - 2 * s3,
                     h * (s3 - s2)])
    d1 = np.stack([6 * s2 - 6 * s,
                   h * (1 - 4 * s + 3 * s2),
                   6 * s - 6 * s2,
                   h * (3 * s2 - 2 * s)]) / h
    d2 = np.stack([12 * s - 6,
                   h * (6 * s - 4),
                   6 - 12 * s,
                   h * (6 * s - 2)]) / h ** 2
    return np.stack([vals, d1, d2])


def basis_tables(s, t, h):
    """Evaluates the 16 local basis functions and their derivatives

    Args:
        s (numpy.ndarray): reference x1-coordinates of n points
        t (numpy.ndarray): reference x2-coordinates of n points
        h (float): element size

    Returns:
        Tuple (B0, B1, B2) with shapes (n, 16), (n, 2, 16), (n, 2, 2, 16)
    """
    X = hermite_1d(s, h)[:, _F1, :]
    Y = hermite_1d(t, h)[:, _F2, :]
    B0 = (X[0] * Y[0]).T
    B1 = np.stack([(X[1] * Y[0]).T, (X[0] * Y[1]).T], axis=1)
    mixed = (X[1] * Y[1]).T
    B2 = np.stack([np.stack([(X[2] * Y[0]).T, mixed], axis=1),
                   np.stack([mixed, (X[0] * Y[2]).T], axis=1)], axis=1)
    return B0, B1, B2


def gauss_points(order):
    """Returns Gauss-Legendre points and weights on [0, 1]"""
    g, w = np.polynomial.legendre.leggauss(order)
    return (g + 1) / 2, w / 2




class C1Space(object):
    """Bicubic Hermite space on the solid elements of a structured mesh

    Args:
        domain (mixed): a PerforatedDomain or a UnitCell
        periodic (bool): identify opposite faces of a unit cell
        quad_order (int): Gauss points per direction per element

    Attributes:
        node_id (numpy.ndarray): (nx + 1, ny + 1) grid of node numbers,
            -1 where no solid element touches the node
        node_coords (numpy.ndarray): (n_nodes, 2) physical node positions
        elements (numpy.ndarray): (n_el, 2) grid indices of solid elements
        elem_dofs (numpy.ndarray): (n_el, 16) scalar DOFs of each element
        qpoints (numpy.ndarray): (n_el, nq, 2) physical quadrature points
        qcell (numpy.ndarray): (n_el, nq, 2) cell coordinates y of qpoints
        qweights (numpy.ndarray): (nq,) quadrature weights including h^2
    """

    def __init__(self, domain, periodic=False, quad_order=4):
        if quad_order < 3:
            raise ValueError('quad_order must be at least 3 for cubic'
                             ' elements, got {}'.format(quad_order))
        if periodic and not domain.is_cell:
            raise PeriodicOnMacroDomain(
                'Periodic spaces can only be built on a unit cell')
        self.domain = domain
        self.periodic = periodic
        self.quad_order = quad_order
        self.h = float(domain.h)
        self.origin = np.array([float(c) for c in domain.origin])
        mask = np.asarray(domain.element_mask, dtype=bool)
        self.shape = mask.shape
        nx, ny = mask.shape
        self._number_nodes(mask)
        self.elements = np.argwhere(mask)
        self.elem_index = -np.ones(mask.shape, dtype=int)
        self.elem_index[self.elements[:, 0], self.elements[:, 1]] = \
            np.arange(len(self.elements))
        cols = []
        for p1, p2, d1, d2 in _LOCAL:
            nodes = self.node_id[self.elements[:, 0] + p1,
                                 self.elements[:, 1] + p2]
            cols.append(4 * nodes + d1 + 2 * d2)
        self.elem_dofs = np.stack(cols, axis=1)
        self.vector_dofs = np.concatenate([self.elem_dofs,
                                           self.elem_dofs + self.nsd], axis=1)
        # Reference quadrature is shared by every element
        s, w = gauss_points(quad_order)
        S, T = [a.ravel() for a in np.meshgrid(s, s, indexing='ij')]
        self.qref = np.stack([S, T], axis=1)
        self.qweights = np.outer(w, w).ravel() * self.h ** 2
        self.B0, self.B1, self.B2 = basis_tables(S, T, self.h)
        self.qpoints = self.origin + (self.elements[:, None, :]
                                      + self.qref[None, :, :]) * self.h
        self.qcell = domain.to_cell_coords(self.qpoints)
        self._dirichlet = None
        logger.debug('Built C1 space: {} nodes, {} elements, periodic={}'.format(
            self.n_nodes, len(self.elements), periodic))


    def _number_nodes(self, mask):
        """Numbers the nodes touching solid elements in C order"""
        nx, ny = mask.shape
        if self.periodic:
            active = np.zeros((nx, ny), dtype=bool)
            for p1, p2 in NODE_OFFSETS:
                active |= np.roll(mask, (p1, p2), axis=(0, 1))
            ids = -np.ones((nx, ny), dtype=int)
            ids[active] = np.arange(active.sum())
            self.node_id = ids[np.ix_(np.arange(nx + 1) % nx,
                                      np.arange(ny + 1) % ny)]
        else:
            active = np.zeros((nx + 1, ny + 1), dtype=bool)
            for p1, p2 in NODE_OFFSETS:
                active[p1:nx + p1, p2:ny + p2] |= mask
            ids = -np.ones((nx + 1, ny + 1), dtype=int)
            ids[active] = np.arange(active.sum())
            self.node_id = ids
        grid = np.argwhere(active)
        self.node_grid = grid
        self.node_coords = self.origin + grid * self.h
        self.n_nodes = len(grid)
        self.nsd = 4 * self.n_nodes
        self.dof_count = 2 * self.nsd


    def __repr__(self):
        return 'C1Space({} nodes, {} dofs, periodic={})'.format(
            self.n_nodes, self.dof_count, self.periodic)


    @property
    def n_elements(self):
        return len(self.elements)


    def zeros(self):
        """Returns the zero field"""
        return C1Field(self)


    def interpolate(self, func):
        """Hermite-interpolates a smooth vector field

        Args:
            func (callable): maps points (n, 2) to (value, grad, hess) with
                shapes (n, 2), (n, 2, 2), (n, 2, 2, 2)

        Returns:
            C1Field
        """
        value, grad, hess = func(self.node_coords)
        coeffs = np.zeros((2, self.n_nodes, 4))
        coeffs[:, :, 0] = np.asarray(value).T
        coeffs[:, :, 1] = np.asarray(grad)[:, :, 0].T
        coeffs[:, :, 2] = np.asarray(grad)[:, :, 1].T
        coeffs[:, :, 3] = np.asarray(hess)[:, :, 0, 1].T
        return C1Field(self, coeffs.ravel())


    def identity(self):
        """Returns the field u(x) = x"""
        return self.interpolate(identity_jet)


    def jets(self, field):
        """Returns the Jet2 of a field at every quadrature point

        Returns:
            Jet2 with arrays of shape (n_el, nq, ...)
        """
        return _jet_slice(self, field, slice(None))


    def locate(self, points):
        """Finds the solid element holding each point

        Points on an edge shared by a solid and a void element are assigned
        to the solid one.

        Returns:
            Tuple (element indices, reference coordinates (n, 2))
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (points - self.origin) / self.h
        nx, ny = self.shape
        base = np.floor(rel).astype(int)
        found = -np.ones(len(points), dtype=int)
        cells = np.zeros_like(base)
        for di in (0, -1):
            for dj in (0, -1):
                cand = base + np.array([di, dj])
                cand[:, 0] = np.clip(cand[:, 0], 0, nx - 1)
                cand[:, 1] = np.clip(cand[:, 1], 0, ny - 1)
                local = rel - cand
                inside = np.all((local >= -1e-12) & (local <= 1 + 1e-12), axis=1)
                elem = self.elem_index[cand[:, 0], cand[:, 1]]
                take = (found < 0) & inside & (elem >= 0)
                found[take] = elem[take]
                cells[take] = cand[take]
        if np.any(found < 0):
            raise PointInVoid(points[np.argmax(found < 0)])
        return found, np.clip(rel - cells, 0., 1.)


    def basis_at(self, points):
        """Returns the element index and local basis tables at points"""
        elems, ref = self.locate(points)
        return (elems,) + basis_tables(ref[:, 0], ref[:, 1], self.h)


    def assemble_vector(self, local):
        """Scatters element vectors (n_el, 32) into a global vector"""
        return np.bincount(self.vector_dofs.ravel(),
                           weights=np.asarray(local).ravel(),
                           minlength=self.dof_count)


    def assemble_matrix(self, local):
        """Scatters element matrices into a global CSR matrix

        Args:
            local (numpy.ndarray): (32, 32) shared by all elements or
                (n_el, 32, 32)
        """
        n_el = self.n_elements
        local = np.broadcast_to(local, (n_el, 32, 32))
        rows = np.broadcast_to(self.vector_dofs[:, :, None], (n_el, 32, 32))
        cols = np.broadcast_to(self.vector_dofs[:, None, :], (n_el, 32, 32))
        mat = sparse.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                                shape=(self.dof_count, self.dof_count))
        return mat.tocsr()


    def residual(self, stress=None, hyperstress=None, force=None):
        """Assembles the vector of int P:grad N + Q:hess N - f.N

        Args:
            stress (numpy.ndarray): (n_el, nq, 2, 2) first-order stress P
            hyperstress (numpy.ndarray): (n_el, nq, 2, 2, 2) stress Q
                conjugate to the second gradient
            force (numpy.ndarray): (n_el, nq, 2) body force f

        Returns:
            Global vector of length dof_count
        """
        local = np.zeros((self.n_elements, 2, 16))
        w = self.qweights
        if stress is not None:
            local += np.einsum('eqcd,q,qda->eca', stress, w, self.B1)
        if hyperstress is not None:
            local += np.einsum('eqcdf,q,qdfa->eca', hyperstress, w, self.B2)
        if force is not None:
            local -= np.einsum('eqc,q,qa->eca', force, w, self.B0)
        return self.assemble_vector(local.reshape(self.n_elements, 32))


    def tangent(self, first=None, second=None, chunk=256):
        """Assembles the curvature matrix of a pointwise quadratic form

        Args:
            first (numpy.ndarray): (n_el, nq, 2, 2, 2, 2) tangent coupling
                grad u to grad v
            second (numpy.ndarray): (n_el, nq, 2, 2, 2, 2, 2, 2) tangent
                coupling hess u to hess v
            chunk (int): elements per einsum block, bounds memory

        Returns:
            scipy.sparse.csr_matrix
        """
        n_el = self.n_elements
        w = self.qweights
        B2 = self.B2.reshape(-1, 4, 16)
        local = np.zeros((n_el, 2, 16, 2, 16))
        for start in range(0, n_el, chunk):
            sl = slice(start, start + chunk)
            if first is not None:
                tmp = np.einsum('eqcdCD,q,qda->eqcaCD', first[sl], w, self.B1)
                local[sl] += np.einsum('eqcaCD,qDb->ecaCb', tmp, self.B1)
            if second is not None:
                block = second[sl].reshape(second[sl].shape[:2] + (2, 4, 2, 4))
                tmp = np.einsum('eqcgCG,q,qga->eqcaCG', block, w, B2)
                local[sl] += np.einsum('eqcaCG,qGb->ecaCb', tmp, B2)
        return self.assemble_matrix(local.reshape(n_el, 32, 32))


    def gram(self, order=2):
        """Assembles the Sobolev Gram matrix of order 0, 1 or 2

        The order-k Gram matrix is the sum of L2 products of all derivatives
        up to order k, so order 1 gives the H1 inner product.
        """
        w = self.qweights
        blocks = [np.einsum('q,qa,qb->ab', w, self.B0, self.B0),
                  np.einsum('q,qda,qdb->ab', w, self.B1, self.B1),
                  np.einsum('q,qdfa,qdfb->ab', w, self.B2, self.B2)]
        scalar = sum(blocks[:order + 1])
        return self.assemble_matrix(np.kron(np.eye(2), scalar))


    def mass_rows(self):
        """Returns (2, dof_count) rows integrating each component"""
        local = np.einsum('q,qa->a', self.qweights, self.B0)
        rows = np.zeros((2, self.dof_count))
        for c in range(2):
            np.add.at(rows[c], c * self.nsd + self.elem_dofs,
                      np.broadcast_to(local, self.elem_dofs.shape))
        return rows


    def facet_quadrature(self, tag, order=None):
        """Builds Gauss quadrature on the edges carrying a tag

        Returns:
            FacetQuadrature with points (nf, ng, 2), weights (nf, ng),
            basis values (nf, ng, 16) and outward normals (nf, 2)
        """
        order = self.quad_order if order is None else order
        facets = self.domain.facets(tag)
        g, w = gauss_points(order)
        zeros, ones = np.zeros_like(g), np.ones_like(g)
        sides = {SIDE_LEFT: (zeros, g), SIDE_RIGHT: (ones, g),
                 SIDE_BOTTOM: (g, zeros), SIDE_TOP: (g, ones)}
        tables = {key: basis_tables(s, t, self.h)[0]
                  for key, (s, t) in sides.items()}
        refs = {key: np.stack(st, axis=1) for key, st in sides.items()}
        nf = len(facets)
        if not nf:
            return FacetQuadrature(np.zeros(0, dtype=int),
                                   np.zeros((0, len(g), 2)),
                                   np.zeros((0, len(g))),
                                   np.zeros((0, len(g), 16)),
                                   np.zeros((0, 2)))
        basis = np.stack([tables[side] for side in facets.sides])
        ref = np.stack([refs[side] for side in facets.sides])
        points = self.origin + (facets.elements[:, None, :] + ref) * self.h
        elems = self.elem_index[facets.elements[:, 0], facets.elements[:, 1]]
        weights = np.broadcast_to(w * self.h, (nf, len(g))).copy()
        return FacetQuadrature(elems, points, weights, basis, facets.normals)


    def facet_values(self, field, quad):
        """Evaluates a field at the points of a FacetQuadrature"""
        U = field.components[:, self.elem_dofs[quad.elements]]
        return np.einsum('cfa,fga->fgc', U, quad.basis)


    def dirichlet_data(self):
        """Returns the DOFs fixed by u = id on Gamma^D and their values

        Value DOFs and the DOFs of the derivative tangential to the face are
        fixed; normal and mixed derivatives stay free.

        Returns:
            Tuple (sorted indices, values)
        """
        if self.periodic:
            raise PeriodicSpace('Dirichlet data needs a non-periodic space')
        if self._dirichlet is None:
            fixed = {}
            for (orient, i, j), tag in sorted(self.domain.facet_tags.items()):
                if tag is not FacetTag.GAMMA_D:
                    continue
                if orient == 'v':
                    nodes, kind = [(i, j), (i, j + 1)], 2
                else:
                    nodes, kind = [(i, j), (i + 1, j)], 1
                for a, b in nodes:
                    node = self.node_id[a, b]
                    x = self.origin + np.array([a, b]) * self.h
                    for c in range(2):
                        base = c * self.nsd + 4 * node
                        fixed[base] = x[c]
                        fixed[base + kind] = 1. if c == kind - 1 else 0.
            idx = np.array(sorted(fixed), dtype=int)
            vals = np.array([fixed[k] for k in idx], dtype=float)
            self._dirichlet = (idx, vals)
        return self._dirichlet


    def free_dofs(self):
        """Returns the DOFs not fixed by Dirichlet data"""
        fixed, _ = self.dirichlet_data()
        mask = np.ones(self.dof_count, dtype=bool)
        mask[fixed] = False
        return np.flatnonzero(mask)




class C1Field(object):
    """Coefficients of a vector field in a C1Space

    Args:
        space (C1Space): the discrete space
        coeffs (numpy.ndarray): DOF-ordered coefficients. Copied.
    """

    def __init__(self, space, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.dof_count)
        coeffs = np.array(coeffs, dtype=float).ravel()
        if coeffs.size != space.dof_count:
            raise ValueError('Expected {} coefficients, got {}'.format(
                space.dof_count, coeffs.size))
        if not np.all(np.isfinite(coeffs)):
            raise ValueError('Field coefficients must be finite')
        self.coeffs = coeffs


    def __repr__(self):
        return 'C1Field({!r})'.format(self.space)


    @property
    def components(self):
        """View of the coefficients as (2, nsd)"""
        return self.coeffs.reshape(2, self.space.nsd)


    def copy(self):
        return C1Field(self.space, self.coeffs)


    def with_coeffs(self, coeffs):
        """Returns a field on the same space with new coefficients"""
        return C1Field(self.space, coeffs)


    def to_rows(self):
        """Yields (dof index, component, value) for CSV output"""
        nsd = self.space.nsd
        for c in range(2):
            for i in range(nsd):
                yield i, c, self.coeffs[c * nsd + i]




def identity_jet(points):
    """Jet of u(x) = x at points (n, 2)"""
    points = np.asarray(points, dtype=float)
    n = len(points)
    return (points.copy(), np.broadcast_to(np.eye(2), (n, 2, 2)).copy(),
            np.zeros((n, 2, 2, 2)))


def build_space(domain, periodic=False, quad_order=4):
    """Builds the C1 space on a PerforatedDomain or UnitCell"""
    return C1Space(domain, periodic=periodic, quad_order=quad_order)


def eval_jet(field, points):
    """Evaluates value, gradient and second gradient at physical points

    Args:
        field (C1Field): the field
        points (numpy.ndarray): (n, 2) points inside solid elements

    Returns:
        Jet2 with arrays of shape (n, ...)
    """
    space = field.space
    elems, B0, B1, B2 = space.basis_at(points)
    U = field.components[:, space.elem_dofs[elems]]
    return Jet2(np.einsum('cna,na->nc', U, B0),
                np.einsum('cna,nda->ncd', U, B1),
                np.einsum('cna,ndfa->ncdf', U, B2))


def integrate(space, density, field=None, deterministic=True, workers=4):
    """Integrates a density over the solid elements by Gauss quadrature

    Args:
        space (C1Space): the space whose quadrature is used
        density (callable): maps (x, y, jet) to values at quadrature points,
            where x and y have shape (..., 2) and jet is a Jet2 or None
        field (C1Field): field whose jet is passed to the density
        deterministic (bool): if False, elements are summed in parallel
            blocks in completion order, which is not bitwise reproducible
        workers (int): threads used when deterministic is False

    Returns:
        float
    """
    def _block(sl):
        jet = None if field is None else _jet_slice(space, field, sl)
        x = space.qpoints[sl]
        y = space.qcell[sl]
        vals = np.broadcast_to(np.asarray(density(x, y, jet), dtype=float),
                               x.shape[:-1])
        bad = ~np.isfinite(vals)
        if bad.any():
            e, q = np.argwhere(bad)[0]
            raise NonFiniteDensity(x[e, q])
        return np.sum(vals @ space.qweights)

    if deterministic:
        return float(_block(slice(None)))
    n_el = space.n_elements
    size = max(1, n_el // workers)
    total = 0.
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_block, slice(start, start + size))
                   for start in range(0, n_el, size)]
        for future in as_completed(futures):
            total += future.result()
    return float(total)


def _jet_slice(space, field, sl):
    """Jet at the quadrature points of a block of elements"""
    U = field.components[:, space.elem_dofs[sl]]
    return Jet2(np.einsum('cea,qa->eqc', U, space.B0),
                np.einsum('cea,qda->eqcd', U, space.B1),
                np.einsum('cea,qdfa->eqcdf', U, space.B2))


def apply_dirichlet_id(space, field):
    """Imposes u = id on Gamma^D in place and returns the fixed DOFs"""
    idx, vals = space.dirichlet_data()
    field.coeffs[idx] = vals
    return idx
