"""Discrete extension operator and functional-inequality constants

Korn and Poincare constants are smallest generalized eigenvalues of
assembled Gram matrices over the fields vanishing on Gamma^D, computed by
shift-invert Lanczos. The extension fills every hole with the biharmonic
minimal-energy continuation of the field minus its cell-wise affine part.
"""
import logging
from collections import namedtuple

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ..exceptions import EigenNoConvergence, SingularFill, ZeroDirichletSet
from ..mesh.c1grid import (
    NODE_OFFSETS,
    C1Field,
    basis_tables,
    build_space,
    eval_jet,
    gauss_points,
)
from ..mesh.geometry import FacetTag




logger = logging.getLogger(__name__)

ConstantEstimate = namedtuple('ConstantEstimate', ['value', 'eigen_residual',
                                                   'dof_count', 'eps'])
ConstantEstimate.__doc__ = """Estimated inequality constant

Attributes:
    value (float): the constant
    eigen_residual (float): relative residual of the eigenpair behind it
    dof_count (int): number of unknowns of the constrained space
    eps (Fraction): cell size of the domain
"""




class CoefficientField(object):
    """Matrix-valued coefficient A with a certified determinant bound

    Args:
        func (callable): maps points (n, 2) to matrices (n, 2, 2)
        mu0 (float): claimed lower bound of det A; the sampled minimum if
            None
        name (str): label used in reports
        extent (tuple): ((a1, a2), (b1, b2)) rectangle to certify on
        resolution (int): certification grid points per unit length
        points (numpy.ndarray): explicit certification points

    Attributes:
        certification (dict): grid description and sampled det minimum
    """

    def __init__(self, func, mu0=None, name='A', extent=((0, 0), (1, 1)),
                 resolution=64, points=None):
        self.func = func
        self.name = name
        if points is None:
            (a1, a2), (b1, b2) = extent
            xs = np.linspace(a1, b1, int((b1 - a1) * resolution) + 1)
            ys = np.linspace(a2, b2, int((b2 - a2) * resolution) + 1)
            points = np.stack(np.meshgrid(xs, ys, indexing='ij'),
                              axis=-1).reshape(-1, 2)
            grid = {'extent': [list(map(float, c)) for c in extent],
                    'resolution': resolution}
        else:
            points = np.asarray(points, dtype=float).reshape(-1, 2)
            grid = {'points': len(points)}
        mats = np.asarray(func(points), dtype=float)
        dets = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
        sampled = float(np.min(dets))
        if mu0 is None:
            mu0 = sampled
        if mu0 <= 0 or sampled < mu0 * (1 - 1e-12):
            raise ValueError('Coefficient {} fails certification: min det'
                             ' {:.4g} < mu0 {:.4g}'.format(name, sampled, mu0))
        self.mu0 = float(mu0)
        self.points = points
        self.certification = dict(grid, det_min=sampled)


    def __repr__(self):
        return 'CoefficientField({}, mu0={:.4g})'.format(self.name, self.mu0)


    def __call__(self, points):
        return np.asarray(self.func(points), dtype=float)


    def scaled(self, c):
        """Returns c * A"""
        func = self.func
        return CoefficientField(lambda x: c * func(x), mu0=c * c * self.mu0,
                                name='{}*{}'.format(c, self.name),
                                points=self.points)


    def rotated(self, Q):
        """Returns Q A for a constant rotation Q"""
        func = self.func
        Q = np.asarray(Q, dtype=float)
        return CoefficientField(lambda x: np.einsum('ij,njk->nik', Q,
                                                    func(x)),
                                mu0=self.mu0 * float(np.linalg.det(Q)),
                                name='Q{}'.format(self.name),
                                points=self.points)


    @classmethod
    def from_field(cls, field, points=None, name='grad(u)^T'):
        """A(x) = grad(u)(x)^T for a field u

        Certified at the given points, by default the quadrature points of
        the field's space.
        """
        if points is None:
            points = field.space.qpoints.reshape(-1, 2)
        def func(x):
            return np.swapaxes(eval_jet(field, x).grad, -1, -2)
        return cls(func, name=name, points=points)




def identity_coefficient(extent=((0, 0), (1, 1))):
    """A(x) = I"""
    return CoefficientField(lambda x: np.broadcast_to(
        np.eye(2), (len(x), 2, 2)).copy(), mu0=1., name='identity',
        extent=extent)


def deformation_coefficient(extent=((0, 0), (1, 1)), amplitude=0.1):
    """A = grad(phi) for phi(x) = x + amp (sin 2 pi x2, sin 2 pi x1)"""
    def func(x):
        x = np.asarray(x, dtype=float)
        A = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
        A[:, 0, 1] = 2 * np.pi * amplitude * np.cos(2 * np.pi * x[:, 1])
        A[:, 1, 0] = 2 * np.pi * amplitude * np.cos(2 * np.pi * x[:, 0])
        return A
    return CoefficientField(func, mu0=0.5, name='deformation', extent=extent)


def rotation_coefficient(extent=((0, 0), (1, 1)), rate=np.pi / 4):
    """A(x) = R(rate * x1), a rotation field without oscillation"""
    def func(x):
        theta = rate * np.asarray(x, dtype=float)[:, 0]
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([np.stack([c, -s], axis=-1),
                         np.stack([s, c], axis=-1)], axis=1)
    return CoefficientField(func, mu0=1., name='rotation', extent=extent)


def default_family(extent=((0, 0), (1, 1))):
    """The three coefficient fields checked by default"""
    return [identity_coefficient(extent), deformation_coefficient(extent),
            rotation_coefficient(extent)]




def _constrained(space):
    free = space.free_dofs()
    if len(free) == space.dof_count:
        raise ZeroDirichletSet('No DOFs are fixed on Gamma^D')
    return free


def _smallest_eig(K, M):
    """Smallest generalized eigenpair of sparse SPD pencils"""
    try:
        vals, vecs = eigsh(K.tocsc(), k=1, M=M.tocsc(), sigma=0,
                           which='LM', tol=1e-12)
    except ArpackNoConvergence as e:
        raise EigenNoConvergence('Lanczos iteration did not converge') from e
    except RuntimeError as e:
        raise EigenNoConvergence('Shift-invert solve failed') from e
    lam = float(vals[0])
    if lam <= 0:
        raise EigenNoConvergence('Non-positive eigenvalue {:.3e}'.format(lam))
    x = vecs[:, 0]
    Mx = M @ x
    res = float(np.linalg.norm(K @ x - lam * Mx)
                / (lam * np.linalg.norm(Mx)))
    return lam, res


def korn_matrices(domain, A, space=None):
    """Gram matrices of e_A(v) in L2 and of v in H1 over constrained fields

    Args:
        domain (PerforatedDomain): the domain
        A (CoefficientField): coefficient field
        space (C1Space): reuse an existing space on the domain

    Returns:
        Tuple (K, M, free dofs) with K and M restricted to the free DOFs
    """
    space = build_space(domain) if space is None else space
    free = _constrained(space)
    mats = A(space.qpoints.reshape(-1, 2)).reshape(space.qpoints.shape[:2]
                                                   + (2, 2))
    eye = np.eye(2)
    # e_ij = L_ijkl grad(v)_kl with L_ijkl = (A_ik d_jl + A_jk d_il) / 2
    L = 0.5 * (np.einsum('eqik,jl->eqijkl', mats, eye)
               + np.einsum('eqjk,il->eqijkl', mats, eye))
    first = np.einsum('eqijkl,eqijKL->eqklKL', L, L)
    K = space.tangent(first=first)[free][:, free]
    M = space.gram(1)[free][:, free]
    return K, M, free


def korn_constant(domain, A, space=None):
    """Estimates the best C with ||v||_H1 <= C ||e_A(v)||_L2 on Omega_eps"""
    K, M, free = korn_matrices(domain, A, space)
    lam, res = _smallest_eig(K, M)
    logger.info('Korn constant for {} at eps={}: {:.6g}'.format(
        A.name, domain.eps, lam ** -0.5))
    return ConstantEstimate(lam ** -0.5, res, len(free), domain.eps)


def poincare_matrices(domain, space=None):
    """Stiffness and mass matrices over constrained fields"""
    space = build_space(domain) if space is None else space
    free = _constrained(space)
    eye = np.eye(2)
    first = np.broadcast_to(np.einsum('cC,dD->cdCD', eye, eye),
                            space.qpoints.shape[:2] + (2, 2, 2, 2))
    S = space.tangent(first=first)[free][:, free]
    M = space.gram(0)[free][:, free]
    return S, M, free


def poincare_constant(domain, space=None):
    """Estimates the best C with ||v||_L2 <= C ||grad v||_L2 on Omega_eps"""
    S, M, free = poincare_matrices(domain, space)
    lam, res = _smallest_eig(S, M)
    return ConstantEstimate(lam ** -0.5, res, len(free), domain.eps)


def trace_constant(domain, samples=20, seed=0, space=None):
    """Samples sqrt(eps)||v||_{L2(Gamma_eps)} / (||v|| + eps||grad v||)

    A smoke test of the scaled trace inequality over random fields; the
    largest sampled ratio is returned with a zero eigen residual.
    """
    space = build_space(domain) if space is None else space
    quad = space.facet_quadrature(FacetTag.GAMMA_EPS)
    eps = float(domain.eps)
    rng = np.random.default_rng(seed)
    worst = 0.
    for _ in range(samples):
        v = C1Field(space, rng.standard_normal(space.dof_count))
        trace = space.facet_values(v, quad)
        tnorm = np.sqrt(np.sum(np.einsum('fgc,fgc->fg', trace, trace)
                               * quad.weights))
        jet = space.jets(v)
        l2 = np.sqrt(np.sum(np.einsum('eqc,eqc->eq', jet.value, jet.value)
                            @ space.qweights))
        h1 = np.sqrt(np.sum(np.einsum('eqcd,eqcd->eq', jet.grad, jet.grad)
                            @ space.qweights))
        worst = max(worst, float(np.sqrt(eps) * tnorm / (l2 + eps * h1)))
    return ConstantEstimate(worst, 0., space.dof_count, domain.eps)


def trajectory_korn_constant(domain, trajectory, k=-1):
    """Korn constant with A = grad(u^k)^T along a trajectory

    The coefficient is taken from the extension of the state so it is
    defined on all of Omega.
    """
    u = trajectory.states[k]
    extended = extend_field(domain, u)
    index = k if k >= 0 else len(trajectory.states) + k
    A = CoefficientField.from_field(
        extended, points=u.space.qpoints.reshape(-1, 2),
        name='grad(u^{})^T'.format(index))
    return korn_constant(domain, A, space=u.space)




class HoleFill(object):
    """Biharmonic fill operator of one hole, shared by all cells

    Args:
        cell (UnitCell): the periodicity cell
        h (float): physical element size
    """

    def __init__(self, cell, h, quad_order=4):
        m = cell.m
        hole = ~np.asarray(cell.solid_mask)
        elements = np.argwhere(hole)
        self.empty = not len(elements)
        if self.empty:
            self.interior = np.zeros((0, 2), dtype=int)
            self.ring = np.zeros((0, 2), dtype=int)
            self.operator = np.zeros((0, 0))
            return
        touch_hole = np.zeros((m + 1, m + 1), dtype=bool)
        touch_solid = np.zeros((m + 1, m + 1), dtype=bool)
        for p1, p2 in NODE_OFFSETS:
            touch_hole[p1:m + p1, p2:m + p2] |= hole
            touch_solid[p1:m + p1, p2:m + p2] |= ~hole
        self.interior = np.argwhere(touch_hole & ~touch_solid)
        self.ring = np.argwhere(touch_hole & touch_solid)
        local = -np.ones((m + 1, m + 1), dtype=int)
        nodes = np.concatenate([self.interior, self.ring])
        local[nodes[:, 0], nodes[:, 1]] = np.arange(len(nodes))
        ni = len(self.interior)
        # Scalar second-gradient Gram of one element, identical on all
        s, w = gauss_points(quad_order)
        S, T = [a.ravel() for a in np.meshgrid(s, s, indexing='ij')]
        _, _, B2 = basis_tables(S, T, h)
        wq = np.outer(w, w).ravel() * h * h
        Ke = np.einsum('q,qdfa,qdfb->ab', wq, B2, B2)
        size = 4 * len(nodes)
        K = np.zeros((size, size))
        for i, j in elements:
            dofs = []
            for p1, p2 in NODE_OFFSETS:
                n = local[i + p1, j + p2]
                dofs.extend(4 * n + kind for kind in range(4))
            dofs = np.array(dofs)
            K[np.ix_(dofs, dofs)] += Ke
        Kii = K[:4 * ni, :4 * ni]
        Kib = K[:4 * ni, 4 * ni:]
        if ni:
            try:
                self.operator = -linalg.solve(Kii, Kib, assume_a='pos')
            except (linalg.LinAlgError, ValueError) as e:
                raise SingularFill('Hole fill system is singular') from e
            if not np.all(np.isfinite(self.operator)):
                raise SingularFill('Hole fill operator is not finite')
        else:
            self.operator = np.zeros((0, 4 * len(self.ring)))




def _cell_means(space, u, domain):
    """Solid-part means of u, grad u and x per cell"""
    jet = space.jets(u)
    m = domain.m
    shape = domain.cells_shape
    cell_idx = space.elements // m
    flat = cell_idx[:, 0] * shape[1] + cell_idx[:, 1]
    n = shape[0] * shape[1]
    w = space.qweights
    vol = np.bincount(flat, weights=np.full(len(flat), w.sum()), minlength=n)
    def mean(arr):
        integ = np.einsum('eq...,q->e...', arr, w)
        out = np.zeros((n,) + integ.shape[1:])
        np.add.at(out, flat, integ)
        return out / vol.reshape((-1,) + (1,) * (integ.ndim - 1))
    return mean(jet.grad), mean(jet.value), mean(space.qpoints)


def cell_affine_parts(domain, u):
    """Affine maps m_u(x) = F_k x + b_k of every cell

    F_k is the mean of grad u over the solid part of cell k and b_k makes
    the solid-part means of u and m_u agree.

    Returns:
        Tuple (F, b) of arrays (K, 2, 2) and (K, 2), cells in the order of
        domain.cells
    """
    F, ubar, xbar = _cell_means(u.space, u, domain)
    b = ubar - np.einsum('kij,kj->ki', F, xbar)
    return F, b


def extend_field(domain, u):
    """Extends a field on Omega_eps to Omega

    Solid DOFs are copied unchanged. In every cell the hole DOFs are the
    cell's affine part plus the biharmonic fill of the remainder.

    Returns:
        C1Field on the space of domain.filled()
    """
    space = u.space
    filled = build_space(domain.filled(), quad_order=space.quad_order)
    out = np.zeros(filled.dof_count)
    src = space.node_grid
    dst = filled.node_id[src[:, 0], src[:, 1]]
    for c in range(2):
        vals = u.components[c].reshape(-1, 4)
        target = out[c * filled.nsd:(c + 1) * filled.nsd].reshape(-1, 4)
        target[dst] = vals
    fill = HoleFill(domain.cell, float(space.h), quad_order=space.quad_order)
    if fill.empty or not len(fill.interior):
        return C1Field(filled, out)
    F, b = cell_affine_parts(domain, u)
    m = domain.m
    shape = domain.cells_shape
    h = float(space.h)
    origin = space.origin
    comps = out.reshape(2, filled.nsd // 4, 4)
    for idx in range(shape[0] * shape[1]):
        k1, k2 = divmod(idx, shape[1])
        off = np.array([k1 * m, k2 * m])
        ring = fill.ring + off
        inner = fill.interior + off
        ring_nodes = filled.node_id[ring[:, 0], ring[:, 1]]
        inner_nodes = filled.node_id[inner[:, 0], inner[:, 1]]
        xr = origin + ring * h
        xi = origin + inner * h
        for c in range(2):
            aff_r = np.stack([xr @ F[idx, c] + b[idx, c],
                              np.full(len(xr), F[idx, c, 0]),
                              np.full(len(xr), F[idx, c, 1]),
                              np.zeros(len(xr))], axis=1)
            aff_i = np.stack([xi @ F[idx, c] + b[idx, c],
                              np.full(len(xi), F[idx, c, 0]),
                              np.full(len(xi), F[idx, c, 1]),
                              np.zeros(len(xi))], axis=1)
            rem = (comps[c, ring_nodes] - aff_r).ravel()
            comps[c, inner_nodes] = (fill.operator @ rem).reshape(-1, 4) \
                                    + aff_i
    return C1Field(filled, comps.ravel())


def _norms(space, u):
    jet = space.jets(u)
    w = space.qweights
    out = {}
    for name, arr in (('l2', jet.value), ('grad', jet.grad),
                      ('hess', jet.hess)):
        flat = arr.reshape(arr.shape[:2] + (-1,))
        out[name] = float(np.sqrt(np.sum(np.sum(flat ** 2, axis=-1) @ w)))
    return out


def extension_ratios(domain, u, extended=None):
    """Norm ratios ||D(Eu)||_{L2(Omega)} / ||Du||_{L2(Omega_eps)}

    The l2 ratio is taken against ||u|| + eps ||grad u||, the quantity the
    extension controls in L2 uniformly in eps.

    Returns:
        Dict with keys l2, grad and hess
    """
    extended = extend_field(domain, u) if extended is None else extended
    inner = _norms(u.space, u)
    outer = _norms(extended.space, extended)
    inner['l2'] = inner['l2'] + float(domain.eps) * inner['grad']
    return {key: outer[key] / inner[key] if inner[key] > 0 else
            (0. if outer[key] == 0 else np.inf) for key in inner}
