"""Incremental minimization of the second-grade viscoelastic problem

Each time step minimizes

    M(v) + 1/tau R(grad u_prev, grad v - grad u_prev) - <l_k, v>

over fields satisfying u = id on Gamma^D, where M is the mechanical energy
and l_k the time-averaged load. The same machinery drives the homogenized
macroscopic problem: the solver only needs a law exposing the elastic,
strain-gradient and dissipation callbacks of MaterialBundle.
"""
import logging
from collections import namedtuple
from fractions import Fraction

import numpy as np
from scipy.sparse.linalg import splu

from .materials import check_det, det2
from ..exceptions import (
    HomLabException,
    LineSearchFailed,
    MaxItersExceeded,
    SingularSystem,
)
from ..helpers import parse_rational
from ..mesh.c1grid import C1Field, build_space
from ..mesh.geometry import FacetTag




logger = logging.getLogger(__name__)

#: Armijo sufficient-decrease parameter
ARMIJO = 1e-4

#: Smallest accepted line-search step
MIN_STEP = 1e-10




class TimeGrid(object):
    """Uniform time grid with exact rational step

    Args:
        T (mixed): final time
        tau (mixed): time step, with T/tau a positive integer
    """

    def __init__(self, T, tau):
        T = parse_rational(T)
        tau = parse_rational(tau)
        if tau <= 0 or T <= 0:
            raise ValueError('T and tau must be positive')
        steps = T / tau
        if steps.denominator != 1:
            raise ValueError('T/tau = {} is not an integer'.format(steps))
        self.T = T
        self.tau = tau
        self.N_tau = int(steps)


    def __repr__(self):
        return 'TimeGrid(T={}, tau={})'.format(self.T, self.tau)


    def __len__(self):
        return self.N_tau


    def time(self, k):
        """Returns t_k = k tau as a Fraction"""
        return k * self.tau


    def midpoint(self, k):
        """Returns the midpoint of the interval ((k-1) tau, k tau)"""
        return (k - Fraction(1, 2)) * self.tau


    def refined(self, factor=2):
        return TimeGrid(self.T, self.tau / factor)




class RampLoad(object):
    """Load density growing linearly in time, optionally oscillating in y

    value(t, x, y) = t * vector * (1 + oscillation * sin(2 pi y1))
    """

    def __init__(self, vector, oscillation=0.):
        self.vector = np.asarray(vector, dtype=float)
        self.oscillation = float(oscillation)


    def __repr__(self):
        return 'RampLoad({}, oscillation={})'.format(list(self.vector),
                                                    self.oscillation)


    def __call__(self, t, x, y):
        y = np.asarray(y, dtype=float)
        shape = (1 + self.oscillation * np.sin(2 * np.pi * y[..., 0]))
        return float(t) * shape[..., None] * self.vector




class Loads(object):
    """Body force and hole traction of the microscopic problem

    The body force is f(t, x) = body(t, x, x/eps). The traction acts on the
    hole boundaries Gamma_eps only and is scaled as eps * traction(t, x,
    x/eps), so its L2(Gamma_eps) norm is of order sqrt(eps).

    Args:
        body (callable): maps (t, x, y) to (..., 2) or None
        traction (callable): maps (t, x, y) to (..., 2) or None
    """

    def __init__(self, body=None, traction=None):
        self.body = body
        self.traction = traction


    def __repr__(self):
        return 'Loads(body={!r}, traction={!r})'.format(self.body,
                                                        self.traction)


    @classmethod
    def zero(cls):
        return cls()


    @classmethod
    def from_config(cls, section):
        """Builds ramp loads from the loads section of a configuration"""
        body = section.get('body')
        traction = section.get('traction')
        osc = section.get('oscillation', 0.)
        return cls(RampLoad(body, osc) if body is not None else None,
                   RampLoad(traction, osc) if traction is not None else None)


    @property
    def is_zero(self):
        return self.body is None and self.traction is None


    def assemble(self, space, t):
        """Returns the vector b with <l(t), v> = b . coeffs(v)"""
        t = float(t)
        b = np.zeros(space.dof_count)
        if self.body is not None:
            f = np.broadcast_to(self.body(t, space.qpoints, space.qcell),
                                space.qpoints.shape)
            b -= space.residual(force=f)
        if self.traction is not None:
            quad = space.facet_quadrature(FacetTag.GAMMA_EPS)
            if len(quad.elements):
                eps = float(space.domain.eps)
                y = space.domain.to_cell_coords(quad.points)
                g = eps * np.broadcast_to(self.traction(t, quad.points, y),
                                          quad.points.shape)
                local = np.einsum('fgc,fg,fga->fca', g, quad.weights,
                                  quad.basis)
                dofs = space.vector_dofs[quad.elements]
                b += np.bincount(dofs.ravel(), weights=local.ravel(),
                                 minlength=space.dof_count)
        return b




class StepReport(namedtuple('StepReport', ['k', 'energy', 'dissipation',
                                           'det_min', 'newton_iters',
                                           'residual_norm', 'objective_drop',
                                           'energy_prev'])):
    """Diagnostics of one accepted time step

    Attributes:
        k (int): step index, starting at 1
        energy (float): mechanical energy of the new state
        dissipation (float): 1/tau R(u_prev, u - u_prev)
        det_min (float): minimum of det(grad u) over quadrature points
        newton_iters (int): Newton iterations taken
        residual_norm (float): dual norm of the Euler-Lagrange residual
        objective_drop (float): objective at u_prev minus objective at u
        energy_prev (float): mechanical energy of the previous state
    """
    __slots__ = ()

    def satisfies_energy_inequality(self, tol=1e-8):
        """Tests the minimization inequality against v = u_prev"""
        return self.objective_drop >= -tol * (1 + abs(self.energy_prev))


    def to_row(self):
        return list(self)




class Trajectory(object):
    """States and step reports of an incremental run

    Attributes:
        grid (TimeGrid): the time grid
        states (tuple): C1Fields u^0, ..., u^N
        reports (tuple): StepReports for steps 1, ..., N
        rate_norms (tuple): ||grad u^k - grad u^{k-1}||^2 / tau per step
    """

    def __init__(self, grid, states, reports, rate_norms):
        self.grid = grid
        self.states = tuple(states)
        self.reports = tuple(reports)
        self.rate_norms = tuple(rate_norms)


    def __repr__(self):
        return 'Trajectory({!r}, {} states)'.format(self.grid,
                                                    len(self.states))


    @property
    def final(self):
        return self.states[-1]


    @property
    def energies(self):
        return [rep.energy for rep in self.reports]


    @property
    def max_energy(self):
        """Running maximum of the mechanical energy, initial state included"""
        energies = self.energies
        if self.reports:
            energies = [self.reports[0].energy_prev] + energies
        return max(energies) if energies else None


    @property
    def cumulative_dissipation(self):
        """Sum over steps of tau ||delta_tau grad u^k||^2"""
        return float(sum(self.rate_norms))


    @property
    def det_min(self):
        return min(rep.det_min for rep in self.reports) if self.reports \
               else None


    def energy_inequality_holds(self, tol=1e-8):
        return all(rep.satisfies_energy_inequality(tol)
                   for rep in self.reports)




class IncrementalProblem(object):
    """One-step objective, its derivatives and the Newton solver

    Args:
        space (C1Space): non-periodic space carrying the unknown
        law (mixed): MaterialBundle or HomogenizedLaw
        det_floor (float): lower bound enforced on det(grad u)
        tol_newton (float): tolerance on the residual dual norm
        max_iters (int): Newton iteration cap
    """

    def __init__(self, space, law, det_floor=1e-3, tol_newton=1e-9,
                 max_iters=50):
        self.space = space
        self.law = law
        self.det_floor = det_floor
        self.tol_newton = tol_newton
        self.max_iters = max_iters
        self.fixed, self.fixed_values = space.dirichlet_data()
        self.free = space.free_dofs()
        self.y = space.qcell
        self.x = space.qpoints
        self.w = space.qweights
        gram = space.gram(2)
        self.gram_free = gram[self.free][:, self.free].tocsc()
        self._gram_lu = None


    def _quad(self, values):
        return float(np.sum(values @ self.w))


    def jets(self, u):
        jet = self.space.jets(u)
        return jet.grad, jet.hess


    def det_min(self, u):
        F, _ = self.jets(u)
        return float(np.min(det2(F)))


    def energy(self, u):
        """Mechanical energy M(u) by quadrature"""
        F, G = self.jets(u)
        check_det(F, self.x)
        W, _ = self.law.elastic(self.y, F)
        H, _ = self.law.strain_gradient(self.y, G)
        return self._quad(W + H)


    def dissipation(self, u, u_prev, tau):
        """Returns 1/tau R(grad u_prev, grad u - grad u_prev)"""
        F_prev, _ = self.jets(u_prev)
        F, _ = self.jets(u)
        R, _ = self.law.dissipation(self.y, F_prev, F - F_prev)
        return self._quad(R) / tau


    def objective(self, u, F_prev, tau, load):
        F, G = self.jets(u)
        check_det(F, self.x)
        W, _ = self.law.elastic(self.y, F)
        H, _ = self.law.strain_gradient(self.y, G)
        R, _ = self.law.dissipation(self.y, F_prev, F - F_prev)
        return self._quad(W + H + R / tau) - float(load @ u.coeffs)


    def gradient(self, u, F_prev, tau, load):
        """Derivative of the objective with respect to all coefficients"""
        F, G = self.jets(u)
        check_det(F, self.x)
        _, dW = self.law.elastic(self.y, F)
        _, dH = self.law.strain_gradient(self.y, G)
        _, dR = self.law.dissipation(self.y, F_prev, F - F_prev)
        return self.space.residual(stress=dW + dR / tau,
                                   hyperstress=dH) - load


    def hessian(self, u, F_prev, tau):
        """Curvature matrix restricted to the free DOFs"""
        F, G = self.jets(u)
        first = (self.law.elastic_tangent(self.y, F)
                 + self.law.dissipation_tangent(self.y, F_prev) / tau)
        second = self.law.strain_gradient_tangent(self.y, G)
        K = self.space.tangent(first, second)
        return K[self.free][:, self.free].tocsc()


    def dual_norm(self, g):
        """Dual norm of a residual vector w.r.t. the H2 Gram of test fields"""
        if self._gram_lu is None:
            self._gram_lu = splu(self.gram_free)
        gf = g[self.free]
        return float(np.sqrt(max(gf @ self._gram_lu.solve(gf), 0.)))


    def residual_norm(self, u, u_prev, tau, load):
        F_prev, _ = self.jets(u_prev)
        return self.dual_norm(self.gradient(u, F_prev, float(tau), load))


    def check_dirichlet(self, u):
        if not np.allclose(u.coeffs[self.fixed], self.fixed_values,
                           rtol=0, atol=1e-12):
            raise ValueError('Initial field violates the Dirichlet data')


    def _direction(self, K, gf):
        """Newton direction, shifted toward the Gram metric if not descent"""
        shift = 0.
        for _ in range(12):
            mat = K if not shift else (K + shift * self.gram_free).tocsc()
            try:
                d = -splu(mat).solve(gf)
            except RuntimeError as e:
                raise SingularSystem('Newton matrix is singular') from e
            if not np.all(np.isfinite(d)):
                raise SingularSystem('Newton direction is not finite')
            if gf @ d < 0:
                return d, gf @ d
            shift = 1e-8 if not shift else 10 * shift
            logger.debug('Non-descent direction, shifting by {:g}'.format(
                shift))
        raise SingularSystem('Could not find a descent direction')


    def solve(self, u_prev, tau, load):
        """Minimizes the one-step objective starting from u_prev

        Returns:
            Tuple (C1Field, newton iterations, residual dual norm)
        """
        tau = float(tau)
        if tau <= 0:
            raise ValueError('tau must be positive')
        self.check_dirichlet(u_prev)
        F_prev, _ = self.jets(u_prev)
        u = u_prev.copy()
        phi = self.objective(u, F_prev, tau, load)
        for it in range(self.max_iters + 1):
            g = self.gradient(u, F_prev, tau, load)
            res = self.dual_norm(g)
            logger.debug('Newton iteration {}: residual {:.3e}'.format(it,
                                                                         res))
            if res <= self.tol_newton:
                return u, it, res
            if it == self.max_iters:
                break
            gf = g[self.free]
            d, slope = self._direction(self.hessian(u, F_prev, tau), gf)
            alpha = 1.
            slack = 1e-14 * (1 + abs(phi))
            while True:
                trial = u.copy()
                trial.coeffs[self.free] += alpha * d
                if self.det_min(trial) >= self.det_floor:
                    phi_trial = self.objective(trial, F_prev, tau, load)
                    if phi_trial <= phi + ARMIJO * alpha * slope + slack:
                        break
                    logger.debug('Rejected step {:g}: no sufficient'
                                 ' decrease'.format(alpha))
                else:
                    logger.debug('Rejected step {:g}: det floor'.format(alpha))
                alpha /= 2
                if alpha < MIN_STEP:
                    raise LineSearchFailed(
                        'Line search failed at residual {:.3e}'.format(res))
            u, phi = trial, phi_trial
        raise MaxItersExceeded('Newton did not converge in {} iterations'
                               ' (residual {:.3e})'.format(self.max_iters, res))


    def step(self, u_prev, tau, load, k=1):
        """Performs one incremental step and returns (u, StepReport)"""
        u, iters, res = self.solve(u_prev, tau, load)
        F_prev, _ = self.jets(u_prev)
        energy_prev = self.energy(u_prev)
        tau = float(tau)
        drop = (self.objective(u_prev, F_prev, tau, load)
                - self.objective(u, F_prev, tau, load))
        report = StepReport(k=k, energy=self.energy(u),
                            dissipation=self.dissipation(u, u_prev, tau),
                            det_min=self.det_min(u), newton_iters=iters,
                            residual_norm=res, objective_drop=drop,
                            energy_prev=energy_prev)
        return u, report


    def rate_norm(self, u, u_prev, tau):
        """Returns ||grad u - grad u_prev||^2 / tau"""
        diff = C1Field(self.space, u.coeffs - u_prev.coeffs)
        dF, _ = self.jets(diff)
        return self._quad(np.einsum('eqij,eqij->eq', dF, dF)) / float(tau)


    def run(self, loads, grid, u_init):
        """Runs the incremental scheme over a time grid"""
        states = [u_init]
        reports = []
        rates = []
        u = u_init
        for k in range(1, grid.N_tau + 1):
            load = loads.assemble(self.space, grid.midpoint(k))
            try:
                u_next, report = self.step(u, grid.tau, load, k=k)
            except HomLabException as e:
                e.step = k
                logger.error('Step {} failed: {}'.format(k, e))
                raise
            logger.info('Step {}: energy={:.6g} det_min={:.4g}'
                        ' newton={}'.format(k, report.energy, report.det_min,
                                            report.newton_iters))
            if not report.satisfies_energy_inequality():
                logger.warning('Step {} violates the minimization'
                               ' inequality (drop {:.3e})'.format(
                                   k, report.objective_drop))
            rates.append(self.rate_norm(u_next, u, grid.tau))
            states.append(u_next)
            reports.append(report)
            u = u_next
        return Trajectory(grid, states, reports, rates)




def _problem(space, bundle, options):
    return IncrementalProblem(space, bundle, **options)


def _space_of(domain, u):
    return u.space if u is not None else build_space(domain)


def mechanical_energy(domain, bundle, u):
    """Returns M(u) = int W(x/eps, grad u) + H(x/eps, hess u) over Omega_eps"""
    space = u.space
    jet = space.jets(u)
    check_det(jet.grad, space.qpoints)
    W, _ = bundle.elastic(space.qcell, jet.grad)
    H, _ = bundle.strain_gradient(space.qcell, jet.hess)
    return float(np.sum((W + H) @ space.qweights))


def det_min(domain, u):
    """Returns the minimum of det(grad u) over all quadrature points"""
    return float(np.min(det2(u.space.jets(u).grad)))


def incremental_step(domain, bundle, u_prev, tau, load_k=None, **options):
    """Minimizes the one-step objective from u_prev

    Args:
        domain (PerforatedDomain): the domain carrying u_prev
        bundle (MaterialBundle): the material laws
        u_prev (C1Field): previous state, satisfying u = id on Gamma^D
        tau (mixed): time step
        load_k (numpy.ndarray): assembled load vector, None for no load
        options: keyword arguments of IncrementalProblem

    Returns:
        Tuple (C1Field, StepReport)
    """
    space = u_prev.space
    load = np.zeros(space.dof_count) if load_k is None else load_k
    return _problem(space, bundle, options).step(u_prev, tau, load)


def run_trajectory(domain, bundle, loads, grid, u_init=None, **options):
    """Runs the incremental scheme from u_init (default id) over a TimeGrid"""
    space = _space_of(domain, u_init)
    if u_init is None:
        u_init = space.identity()
    problem = _problem(space, bundle, options)
    if problem.det_min(u_init) <= 0:
        raise ValueError('Initial state must have det(grad u) > 0')
    logger.info('Running {} steps on {!r}'.format(grid.N_tau, space))
    return problem.run(loads, grid, u_init)


def weak_residual(domain, bundle, u_k, u_prev, tau, load_k=None):
    """Dual norm of the discrete Euler-Lagrange residual of a step"""
    space = u_k.space
    load = np.zeros(space.dof_count) if load_k is None else load_k
    problem = IncrementalProblem(space, bundle)
    F_prev, _ = problem.jets(u_prev)
    return problem.dual_norm(problem.gradient(u_k, F_prev, float(tau), load))
