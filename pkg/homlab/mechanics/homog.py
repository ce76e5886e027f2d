"""Cell problems and the homogenized strain-gradient model

The homogenized second-gradient energy is

    H_hom(G) = inf over periodic v of int_{Y_s} H(y, G + hess_y v) dy

computed on a periodic C1 space of the unit cell with the mean of each
component of v pinned to zero. Two macroscopic modes are provided: a
quadratic mode (p = 2) where H_hom is a precomputed 6x6 matrix on the
symmetric second-gradient basis, and a nested mode that solves cell
problems on the fly with a shared cache.
"""
import logging
import threading
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .materials import Coefficient, DissipationLaw, ElasticLaw, StrainGradientLaw
from .micro import IncrementalProblem, Loads
from ..exceptions import (
    IndefiniteSystem,
    MaxItersExceeded,
    SingularSystem,
)
from ..mesh.c1grid import build_space, eval_jet
from ..mesh.geometry import FacetTag




logger = logging.getLogger(__name__)

#: Symmetric second-gradient basis, components (i, j, k) with j <= k
SYM_BASIS = ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 0, 1), (1, 1, 1))

#: Column labels of the symmetric basis used in CSV headers
SYM_LABELS = tuple('G{}{}{}'.format(*idx) for idx in SYM_BASIS)


def _sym_matrix():
    Q = np.zeros((8, 6))
    for a, (i, j, k) in enumerate(SYM_BASIS):
        Q[4 * i + 2 * j + k, a] = 1
        Q[4 * i + 2 * k + j, a] = 1
    return Q

#: Embedding of symmetric coordinates into flattened (2, 2, 2) tensors
Q_SYM = _sym_matrix()

#: Gram matrix of the unit basis tensors, diag(1, 2, 1, 1, 2, 1)
N_SYM = Q_SYM.T @ Q_SYM


def unit_tensor(a):
    """Returns the a-th symmetric basis tensor as a (2, 2, 2) array"""
    return Q_SYM[:, a].reshape(2, 2, 2)


def sym_coords(G):
    """Coordinates of (..., 2, 2, 2) symmetric tensors in the basis"""
    flat = np.asarray(G, dtype=float).reshape(np.shape(G)[:-3] + (8,))
    return flat @ Q_SYM @ np.linalg.inv(N_SYM)




class CellSolution(namedtuple('CellSolution', ['G', 'u2', 'value', 'hstress',
                                               'residual_norm', 'iterations'])):
    """Minimizer of one cell problem

    Attributes:
        G (numpy.ndarray): macroscopic second gradient (2, 2, 2)
        u2 (C1Field): periodic corrector with zero mean
        value (float): H_hom(G)
        hstress (numpy.ndarray): int_{Y_s} dH(y, G + hess u2) dy
        residual_norm (float): dual norm of the stationarity residual
        iterations (int): Newton iterations
    """
    __slots__ = ()

    def corrector_hess(self, G, y):
        """Second gradient of the corrector at cell points y

        G is not read: the corrector belongs to the single macroscopic
        second gradient self.G, held constant over the cell.
        """
        return eval_jet(self.u2, y).hess



    def corrector_norm(self):
        """L2 norm of the corrector values over Y_s"""
        space = self.u2.space
        vals = space.jets(self.u2).value
        return float(np.sqrt(np.sum(np.einsum('eqc,eqc->eq', vals, vals)
                                    @ space.qweights)))




class CorrectorBasis(object):
    """Correctors of the six unit second gradients of a quadratic law

    The corrector of a symmetric G is the linear combination of the unit
    correctors with the symmetric coordinates of G.
    """

    def __init__(self, solutions):
        self.solutions = tuple(solutions)


    def corrector_hess(self, G, y):
        """Corrector second gradients for G of shape (..., J, 2, 2, 2) at
        the J cell points y"""
        g = sym_coords(G)
        hess = np.stack([eval_jet(sol.u2, y).hess for sol in self.solutions])
        return np.einsum('...ja,ajimn->...jimn', g, hess)




class CellProblem(object):
    """Periodic corrector problem on the unit cell for one law

    Args:
        cell (UnitCell): the periodicity cell
        law (StrainGradientLaw): second-gradient energy H
        quad_order (int): Gauss points per direction
        tol (float): stationarity tolerance
        max_iters (int): Newton iteration cap
    """

    def __init__(self, cell, law, quad_order=4, tol=1e-9, max_iters=50):
        self.cell = cell
        self.law = law
        self.tol = tol
        self.max_iters = max_iters
        self.space = build_space(cell, periodic=True, quad_order=quad_order)
        self.y = self.space.qcell
        self.w = self.space.qweights
        self.pins = sparse.csr_matrix(self.space.mass_rows())
        self._gram_lu = splu(self.space.gram(2).tocsc())


    def __repr__(self):
        return 'CellProblem({!r}, {!r})'.format(self.cell, self.law)


    def _total(self, G, u2):
        hess = self.space.jets(u2).hess
        return np.asarray(G, dtype=float) + hess


    def value(self, G, u2):
        H, _ = self.law.evaluate(self.y, self._total(G, u2))
        return float(np.sum(H @ self.w))


    def gradient(self, G, u2):
        _, dH = self.law.evaluate(self.y, self._total(G, u2))
        return self.space.residual(hyperstress=dH)


    def hstress(self, G, u2):
        _, dH = self.law.evaluate(self.y, self._total(G, u2))
        return np.einsum('eqijk,q->ijk', dH, self.w)


    def dual_norm(self, g):
        return float(np.sqrt(max(g @ self._gram_lu.solve(g), 0.)))


    def bordered(self, K):
        """Factorizes [[K, B^T], [B, 0]] with B the mean-value rows"""
        mat = sparse.bmat([[K, self.pins.T], [self.pins, None]]).tocsc()
        try:
            return splu(mat)
        except RuntimeError as e:
            raise SingularSystem('Cell system is singular') from e


    def tangent(self, G, u2):
        D = self.law.tangent(self.y, self._total(G, u2))
        return self.space.tangent(second=D)


    def solve(self, G, warm_start=None):
        """Minimizes the cell energy for a macroscopic second gradient

        Returns:
            CellSolution
        """
        G = np.asarray(G, dtype=float).reshape(2, 2, 2)
        space = self.space
        if not np.any(G):
            return CellSolution(G, space.zeros(), 0., np.zeros((2, 2, 2)),
                                0., 0)
        if warm_start is None:
            u2 = space.zeros()
        else:
            u2 = self._project_mean(warm_start)
        phi = self.value(G, u2)
        n = space.dof_count
        for it in range(self.max_iters + 1):
            g = self.gradient(G, u2)
            res = self.dual_norm(g)
            logger.debug('Cell Newton {}: residual {:.3e}'.format(it, res))
            if res <= self.tol:
                return CellSolution(G, u2, self.value(G, u2),
                                    self.hstress(G, u2), res, it)
            if it == self.max_iters:
                break
            lu = self.bordered(self.tangent(G, u2))
            rhs = np.concatenate([-g, np.zeros(2)])
            d = lu.solve(rhs)[:n]
            if not np.all(np.isfinite(d)):
                raise SingularSystem('Cell Newton direction is not finite')
            slope = float(g @ d)
            if slope >= 0:
                raise IndefiniteSystem(
                    'Cell tangent is not positive on the pinned space')
            alpha = 1.
            while True:
                trial = u2.with_coeffs(u2.coeffs + alpha * d)
                phi_trial = self.value(G, trial)
                if phi_trial <= phi + 1e-4 * alpha * slope \
                                + 1e-14 * (1 + abs(phi)):
                    break
                alpha /= 2
                if alpha < 1e-10:
                    raise IndefiniteSystem(
                        'Cell line search stalled at residual {:.3e}'.format(
                            res))
            u2, phi = trial, phi_trial
        raise MaxItersExceeded('Cell problem did not converge in {}'
                               ' iterations'.format(self.max_iters))


    def _project_mean(self, u2):
        """Subtracts the Y_s-mean of each component"""
        coeffs = u2.coeffs.copy()
        area = float(np.sum(self.w)) * self.space.n_elements
        nsd = self.space.nsd
        for c in range(2):
            mean = float(self.pins[c] @ coeffs) / area
            coeffs[c * nsd:(c + 1) * nsd][0::4] -= mean
        return u2.with_coeffs(coeffs)


    def sensitivity(self, solution):
        """Derivative of hstress with respect to G at a solution

        Linearizes the stationarity condition: for each unit direction E of
        (2, 2, 2) the corrector derivative solves the tangent system.

        Returns:
            Array (2, 2, 2, 2, 2, 2)
        """
        G, u2 = solution.G, solution.u2
        total = self._total(G, u2)
        D = self.law.tangent(self.y, total)
        K = self.space.tangent(second=D)
        lu = self.bordered(K)
        n = self.space.dof_count
        out = np.zeros((8, 8))
        for e in range(8):
            E = np.zeros(8)
            E[e] = 1.
            stress = np.einsum('eqab,b->eqa',
                               D.reshape(D.shape[:2] + (8, 8)), E)
            rhs = self.space.residual(hyperstress=stress.reshape(
                stress.shape[:2] + (2, 2, 2)))
            dchi = lu.solve(np.concatenate([-rhs, np.zeros(2)]))[:n]
            dhess = self.space.jets(u2.with_coeffs(dchi)).hess
            dtotal = E.reshape(2, 2, 2) + dhess
            dstress = np.einsum('eqab,eqb->eqa',
                                D.reshape(D.shape[:2] + (8, 8)),
                                dtotal.reshape(dtotal.shape[:2] + (8,)))
            out[:, e] = np.einsum('eqa,q->a', dstress, self.w)
        return (0.5 * (out + out.T)).reshape((2,) * 6)




def solve_cell(cell, law, G, warm_start=None, **options):
    """Solves the cell problem for one macroscopic second gradient"""
    return CellProblem(cell, law, **options).solve(G, warm_start=warm_start)


def cell_correctors(cell, law, problem=None, **options):
    """Solves the cell problems of the six unit symmetric tensors"""
    problem = CellProblem(cell, law, **options) if problem is None else problem
    return [problem.solve(unit_tensor(a)) for a in range(len(SYM_BASIS))]


def homogenized_tensor(cell, law, **options):
    """Returns the 6x6 matrix M with H_hom(G) = g^T M g / 2, g = sym_coords(G)

    Args:
        cell (UnitCell): the periodicity cell
        law (StrainGradientLaw): a quadratic law (p = 2)

    Returns:
        numpy.ndarray
    """
    if law.p != 2:
        raise ValueError('homogenized_tensor needs a quadratic law, got'
                         ' p={}'.format(law.p))
    problem = CellProblem(cell, law, **options)
    sols = cell_correctors(cell, law, problem=problem)
    totals = np.stack([unit_tensor(a) + problem.space.jets(sol.u2).hess
                       for a, sol in enumerate(sols)])
    b = law.beta(problem.y)
    M = np.einsum('aeqijk,beqijk,eq,q->ab', totals, totals, b, problem.w)
    asym = float(np.max(np.abs(M - M.T)))
    if asym > 1e-10 * max(1., float(np.max(np.abs(M)))):
        logger.warning('Homogenized tensor asymmetry {:.3e}'.format(asym))
    M = 0.5 * (M + M.T)
    if np.min(np.linalg.eigvalsh(M)) <= 0:
        raise IndefiniteSystem('Homogenized tensor is not positive definite')
    return M




class CellCache(object):
    """Thread-safe store of cell solutions keyed by the exact G

    Warm starts are looked up by G rounded to a quantization grid.
    """

    def __init__(self, quantum=1e-6):
        self.quantum = quantum
        self._solutions = {}
        self._warm = {}
        self._tangents = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0


    def __len__(self):
        return len(self._solutions)


    @staticmethod
    def key(G):
        return np.ascontiguousarray(G, dtype=float).tobytes()


    def warm_key(self, G):
        return tuple(np.round(np.ravel(G) / self.quantum).astype(int))


    def get(self, G):
        with self._lock:
            sol = self._solutions.get(self.key(G))
            if sol is not None:
                self.hits += 1
            return sol


    def warm_start(self, G):
        with self._lock:
            return self._warm.get(self.warm_key(G))


    def put(self, solution):
        with self._lock:
            self.misses += 1
            self._solutions[self.key(solution.G)] = solution
            self._warm[self.warm_key(solution.G)] = solution.u2


    def tangent(self, G):
        with self._lock:
            return self._tangents.get(self.key(G))


    def put_tangent(self, G, tangent):
        with self._lock:
            self._tangents[self.key(G)] = tangent




class HomogenizedLaw(object):
    """Macroscopic laws W-bar, R-bar and H_hom

    Exposes the same callbacks as MaterialBundle. Cell coordinates passed
    to the callbacks are ignored.

    Args:
        elastic (ElasticLaw): W-bar, the Y_s-average of W
        dissipation (DissipationLaw): R-bar, the Y_s-average of R
        gradient (StrainGradientLaw): microscopic H used by cell problems
        cell (UnitCell): the periodicity cell
        mode (str): 'quadratic' or 'nested'
        tensor (numpy.ndarray): 6x6 matrix for quadratic mode
        workers (int): threads for concurrent cache misses in nested mode
    """

    def __init__(self, elastic, dissipation, gradient, cell, mode='quadratic',
                 tensor=None, workers=1, quad_order=4):
        if mode not in ('quadratic', 'nested'):
            raise ValueError('Unknown mode: {}'.format(mode))
        self.elastic_law = elastic
        self.dissipation_law = dissipation
        self.gradient_law = gradient
        self.cell = cell
        self.mode = mode
        self.workers = workers
        self.tensor = tensor
        self.cache = None
        self.problem = None
        if mode == 'quadratic':
            if tensor is None:
                self.tensor = homogenized_tensor(cell, gradient,
                                                 quad_order=quad_order)
            Ninv = np.linalg.inv(N_SYM)
            self._dH = Q_SYM @ Ninv @ self.tensor
            self._d2H = Q_SYM @ Ninv @ self.tensor @ Ninv @ Q_SYM.T
        else:
            self.problem = CellProblem(cell, gradient, quad_order=quad_order)
            self.cache = CellCache()


    def __repr__(self):
        return 'HomogenizedLaw(mode={!r}, cell={!r})'.format(self.mode,
                                                             self.cell)


    @property
    def p(self):
        return self.gradient_law.p


    def hypotheses(self):
        p = self.p
        return {'p_gt_n': p > 2, 'p': p, 'n': 2, 'mode': self.mode}


    def elastic(self, y, F):
        return self.elastic_law.evaluate(np.zeros(np.shape(F)[:-2] + (2,)), F)


    def elastic_tangent(self, y, F):
        return self.elastic_law.tangent(np.zeros(np.shape(F)[:-2] + (2,)), F)


    def dissipation(self, y, F, Fdot):
        return self.dissipation_law.evaluate(
            np.zeros(np.shape(F)[:-2] + (2,)), F, Fdot)


    def dissipation_tangent(self, y, F):
        return self.dissipation_law.tangent(
            np.zeros(np.shape(F)[:-2] + (2,)), F)


    def strain_gradient(self, y, G):
        """Returns (H_hom, dH_hom) at a batch of second gradients"""
        G = np.asarray(G, dtype=float)
        batch = G.shape[:-3]
        if self.mode == 'quadratic':
            g = sym_coords(G)
            H = 0.5 * np.einsum('...a,ab,...b->...', g, self.tensor, g)
            dH = (g @ self._dH.T).reshape(batch + (2, 2, 2))
            return H, dH
        sols = self._solve_batch(G.reshape(-1, 2, 2, 2))
        H = np.array([sol.value for sol in sols]).reshape(batch)
        dH = np.stack([sol.hstress for sol in sols]).reshape(batch + (2, 2, 2))
        return H, dH


    def strain_gradient_tangent(self, y, G):
        G = np.asarray(G, dtype=float)
        batch = G.shape[:-3]
        if self.mode == 'quadratic':
            return np.broadcast_to(self._d2H.reshape((2,) * 6),
                                   batch + (2,) * 6).copy()
        flat = G.reshape(-1, 2, 2, 2)
        sols = self._solve_batch(flat)
        out = []
        for Gi, sol in zip(flat, sols):
            tan = self.cache.tangent(Gi)
            if tan is None:
                tan = self._solution_tangent(sol)
                self.cache.put_tangent(Gi, tan)
            out.append(tan)
        return np.stack(out).reshape(batch + (2,) * 6)


    def _solution_tangent(self, sol):
        if not np.any(sol.G) and self.p != 2:
            return np.zeros((2,) * 6)
        return self.problem.sensitivity(sol)


    def _solve_one(self, G, warm):
        sol = self.problem.solve(G, warm_start=warm)
        self.cache.put(sol)
        return sol


    def _solve_batch(self, Gs):
        """Solves the cell problems of a batch, reusing cached solutions"""
        found = {}
        misses = {}
        for G in Gs:
            key = CellCache.key(G)
            if key in found or key in misses:
                continue
            sol = self.cache.get(G)
            if sol is None:
                misses[key] = (G, self.cache.warm_start(G))
            else:
                found[key] = sol
        if misses:
            logger.debug('Solving {} cell problems'.format(len(misses)))
            if self.workers > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    futures = {key: pool.submit(self._solve_one, G, warm)
                               for key, (G, warm) in misses.items()}
                    for key, future in futures.items():
                        found[key] = future.result()
            else:
                for key, (G, warm) in misses.items():
                    found[key] = self._solve_one(G, warm)
        return [found[CellCache.key(G)] for G in Gs]




def cell_average(cell, func, quad_order=8):
    """Integrates func(y) over Y_s with a high-order Gauss rule"""
    space = build_space(cell, quad_order=quad_order)
    vals = np.asarray(func(space.qcell), dtype=float)
    return float(np.sum(vals @ space.qweights))


def averaged_laws(bundle, cell, mode='quadratic', workers=1, quad_order=4,
                  tensor=None):
    """Builds the homogenized law from a microscopic MaterialBundle

    W-bar and R-bar average the coefficients of the separable laws over Y_s.

    Args:
        bundle (MaterialBundle): microscopic laws
        cell (UnitCell): the periodicity cell
        mode (str): 'quadratic' or 'nested' treatment of H_hom
        workers (int): threads for nested cell solves
        quad_order (int): Gauss order of the cell problems

    Returns:
        HomogenizedLaw
    """
    el = bundle.elastic_law
    alpha = cell_average(cell, el.alpha)
    delta = cell_average(cell, bundle.dissipation_law.delta)
    elastic = ElasticLaw(Coefficient(alpha, 0.), q=el.q,
                         stress_free_id=el.stress_free_id, fd_step=el.fd_step)
    dissipation = DissipationLaw(Coefficient(delta, 0.))
    if mode == 'quadratic' and bundle.p != 2:
        raise ValueError('Quadratic mode needs p = 2, got p={}'.format(
            bundle.p))
    logger.info('Averaged laws: alpha={:.6g}, delta={:.6g}, mode={}'.format(
        alpha, delta, mode))
    return HomogenizedLaw(elastic, dissipation, bundle.gradient_law, cell,
                          mode=mode, tensor=tensor, workers=workers,
                          quad_order=quad_order)




class AveragedLoad(object):
    """Macroscopic body force int_{Y_s} f0 dy + int_Gamma g0 dsigma"""

    def __init__(self, loads, cell, quad_order=8):
        self.loads = loads
        space = build_space(cell, quad_order=quad_order)
        self.y = space.qcell.reshape(-1, 2)
        self.w = np.tile(space.qweights, space.n_elements)
        quad = space.facet_quadrature(FacetTag.GAMMA_EPS, order=quad_order)
        self.ys = quad.points.reshape(-1, 2)
        self.ws = quad.weights.ravel()


    def __call__(self, t, x, y=None):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape)
        if self.loads.body is not None:
            total += self._average(self.loads.body, t, x, self.y, self.w)
        if self.loads.traction is not None and len(self.ws):
            total += self._average(self.loads.traction, t, x, self.ys,
                                   self.ws)
        return total


    @staticmethod
    def _average(func, t, x, ys, ws):
        lead = x.shape[:-1]
        xs = np.broadcast_to(x[..., None, :], lead + ys.shape)
        vals = np.broadcast_to(func(t, xs, ys), lead + ys.shape)
        return np.einsum('...yc,y->...c', vals, ws)


    def __repr__(self):
        return 'AveragedLoad({!r})'.format(self.loads)




def averaged_loads(loads, cell, quad_order=8):
    """Returns the macroscopic Loads carrying f0-bar + g0-bar as body force"""
    if loads.is_zero:
        return Loads.zero()
    return Loads(body=AveragedLoad(loads, cell, quad_order=quad_order))


def run_macro(macro_domain, law, loads, grid, u_init=None, quad_order=4,
              **options):
    """Runs the incremental scheme for the homogenized model on Omega

    Args:
        macro_domain (PerforatedDomain): unperforated domain
        law (HomogenizedLaw): macroscopic laws
        loads (Loads): averaged loads, see averaged_loads
        grid (TimeGrid): time grid
        u_init (C1Field): initial state, id by default

    Returns:
        Trajectory
    """
    if not bool(np.all(macro_domain.element_mask)):
        raise ValueError('The macroscopic domain must not be perforated')
    space = build_space(macro_domain, quad_order=quad_order) \
            if u_init is None else u_init.space
    if u_init is None:
        u_init = space.identity()
    problem = IncrementalProblem(space, law, **options)
    logger.info('Running macro problem in {} mode'.format(law.mode))
    return problem.run(loads, grid, u_init)
