"""Runs the subcommands of the homlab command line tool

Every run writes its numeric tables as CSV files into a run directory and
finishes with a JSON manifest that echoes the configuration, references
every table and records the invariant checks read back by report().
"""
import json
import logging
import os
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from .. import __version__
from ..analysis.funineq import (
    cell_affine_parts,
    deformation_coefficient,
    extend_field,
    extension_ratios,
    identity_coefficient,
    korn_constant,
    poincare_constant,
    rotation_coefficient,
    trace_constant,
    trajectory_korn_constant,
)
from ..analysis.twoscale import (
    ORDERS,
    ZeroCorrector,
    local_average,
    two_scale_distance,
    unfold,
    unfold_boundary,
)
from ..exceptions import HomLabException
from ..helpers import format_rational, localize_datetime, write_csv
from ..mechanics.homog import (
    SYM_LABELS,
    CellProblem,
    CorrectorBasis,
    averaged_laws,
    averaged_loads,
    cell_average,
    cell_correctors,
    homogenized_tensor,
    run_macro,
    sym_coords,
)
from ..mechanics.micro import StepReport, run_trajectory
from ..mesh.c1grid import C1Field, build_space, eval_jet, integrate
from ..mesh.geometry import FacetTag




logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'

LOGFILE = 'homlab.log'

COEFFICIENT_FIELDS = {
    'identity': identity_coefficient,
    'deformation': deformation_coefficient,
    'rotation': rotation_coefficient,
}

#: Largest max/min ratio of a constant over an eps sweep
UNIFORMITY = 1.5

#: Largest max/min ratio of the determinant minimum over an eps sweep
DET_SPREAD = 2.

#: Largest max/min ratio of the cumulative dissipation over an eps sweep
DISSIPATION_SPREAD = 2.

#: Largest ratio of consecutive grad distances as eps is halved
GRAD_REDUCTION = 0.9




def _plain(val):
    """Converts numpy scalars, arrays and Fractions to JSON types"""
    if isinstance(val, dict):
        return {str(key): _plain(v) for key, v in val.items()}
    if isinstance(val, (list, tuple)):
        return [_plain(v) for v in val]
    if isinstance(val, np.ndarray):
        return _plain(val.tolist())
    if isinstance(val, (bool, np.bool_)):
        return bool(val)
    if isinstance(val, np.integer):
        return int(val)
    if isinstance(val, (float, np.floating)):
        val = float(val)
        return val if np.isfinite(val) else repr(val)
    if isinstance(val, Fraction):
        return format_rational(val)
    return val


def _failure(exc):
    return {'error': exc.__class__.__name__, 'message': str(exc),
            'step': getattr(exc, 'step', None)}


def eps_label(eps):
    """Subdirectory name of a sweep member, e.g. eps_1-4"""
    return 'eps_{}'.format(format_rational(eps).replace('/', '-'))


@contextmanager
def log_to(directory, level=logging.INFO):
    """Copies homlab log records into the run directory"""
    os.makedirs(directory, exist_ok=True)
    handler = logging.FileHandler(os.path.join(directory, LOGFILE), mode='w',
                                  encoding='utf-8')
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(
        '%(asctime)s %(levelname)s %(name)s: %(message)s'))
    root = logging.getLogger('homlab')
    previous = root.level
    if root.level == logging.NOTSET or root.level > level:
        root.setLevel(level)
    root.addHandler(handler)
    try:
        yield handler
    finally:
        root.removeHandler(handler)
        root.setLevel(previous)
        handler.close()




class RunRecorder(object):
    """Collects the tables, summaries and checks of one run

    Args:
        config (ExperimentConfig): the validated configuration
        subcommand (str): name of the subcommand being run
        directory (str): the run directory, created if needed

    Attributes:
        tables (list): dicts with the relative path and a description of
            every CSV written
        checks (list): dicts with name, status (PASS or FAIL), value, limit
        summaries (dict): per-run results
        notes (list): hypothesis violations and conventions worth reading
        runs (list): sweep members merged into this run
    """

    def __init__(self, config, subcommand, directory):
        self.config = config
        self.subcommand = subcommand
        self.directory = directory
        self.tables = []
        self.checks = []
        self.summaries = {}
        self.notes = []
        self.runs = []
        self.failure = None
        self.hypotheses = config.bundle().hypotheses()
        if not self.hypotheses['p_gt_n']:
            self.notes.append('p = {} <= n = {}: outside the growth range of'
                              ' the existence theory'.format(
                                  self.hypotheses['p'], self.hypotheses['n']))
        os.makedirs(directory, exist_ok=True)


    def __repr__(self):
        return 'RunRecorder({!r}, {!r})'.format(self.subcommand,
                                               self.directory)


    def path(self, name):
        return os.path.join(self.directory, *name.split('/'))


    def table(self, name, header, rows, description=''):
        """Writes a CSV table and registers it with the manifest"""
        fp = self.path(name)
        write_csv(fp, header, rows)
        self.tables.append({'path': name, 'description': description})
        logger.debug('Wrote {}'.format(fp))
        return fp


    def check(self, name, passed, value=None, limit=None):
        """Records an invariant check"""
        passed = bool(passed)
        self.checks.append({'name': name,
                            'status': 'PASS' if passed else 'FAIL',
                            'value': _plain(value),
                            'limit': _plain(limit)})
        if passed:
            logger.info('Check {}: PASS'.format(name))
        else:
            logger.warning('Check {}: FAIL (value={}, limit={})'.format(
                name, value, limit))
        return passed


    def summary(self, key, value):
        self.summaries[key] = _plain(value)


    def child(self, name, subcommand):
        """Opens a recorder for a sweep member in a subdirectory"""
        return RunRecorder(self.config, subcommand,
                           os.path.join(self.directory, name))


    def adopt(self, name, child, eps):
        """Merges a finished sweep member into this run"""
        self.runs.append({'eps': format_rational(eps),
                          'manifest': '{}/{}'.format(name, MANIFEST)})
        for table in child.tables:
            self.tables.append({'path': '{}/{}'.format(name, table['path']),
                                'description': table['description']})
        for check in child.checks:
            check = dict(check)
            check['name'] = '{}/{}'.format(name, check['name'])
            self.checks.append(check)


    def manifest(self):
        return {
            'tool': 'homlab',
            'version': __version__,
            'created': localize_datetime(),
            'subcommand': self.subcommand,
            'config': self.config.echo(),
            'hypotheses': _plain(self.hypotheses),
            'notes': self.notes,
            'conventions': {
                'two_scale_macro_point': 'eps * [x / eps] + eps * y',
                'time_load': 'loads evaluated at the midpoint of each step',
                'float_format': 'repr',
            },
            'summaries': self.summaries,
            'checks': self.checks,
            'tables': self.tables,
            'runs': self.runs,
            'failure': self.failure,
        }


    def write_manifest(self):
        fp = self.path(MANIFEST)
        with open(fp, 'w', encoding='utf-8') as f:
            json.dump(self.manifest(), f, indent=2, sort_keys=True)
        logger.info('Wrote manifest {}'.format(fp))
        return fp




def _space(config, domain):
    return build_space(domain, quad_order=config('solver.quad_order'))


def _homogenized(config, bundle, cell):
    return averaged_laws(bundle, cell, mode=config('modes.homogenized'),
                         workers=config('modes.workers'),
                         quad_order=config('solver.quad_order'))


def _random_fields(config, space, count):
    rng = np.random.default_rng(config.seed)
    for _ in range(count):
        yield C1Field(space, rng.standard_normal(space.dof_count))


def record_trajectory(config, recorder, traj, label, prefix=''):
    """Writes step reports and states, and checks the step invariants"""
    recorder.table(prefix + 'steps.csv', list(StepReport._fields),
                   [rep.to_row() for rep in traj.reports],
                   '{} step reports'.format(label))
    for k, state in enumerate(traj.states):
        recorder.table('{}states/u_{:04d}.csv'.format(prefix, k),
                       ['dof', 'component', 'value'], state.to_rows(),
                       '{} coefficients at step {}'.format(label, k))
    floor = config('solver.det_floor')
    tol = config('solver.tol_newton')
    drops = [rep.objective_drop for rep in traj.reports]
    residuals = [rep.residual_norm for rep in traj.reports]
    recorder.check('{}.energy_inequality'.format(label),
                   traj.energy_inequality_holds(),
                   value=min(drops) if drops else None, limit=0.)
    recorder.check('{}.det_floor'.format(label),
                   traj.det_min is None or traj.det_min >= floor,
                   value=traj.det_min, limit=floor)
    recorder.check('{}.euler_lagrange'.format(label),
                   not residuals or max(residuals) <= tol,
                   value=max(residuals) if residuals else None, limit=tol)
    return {
        'steps': len(traj.reports),
        'energies': traj.energies,
        'max_energy': traj.max_energy,
        'cumulative_dissipation': traj.cumulative_dissipation,
        'det_min': traj.det_min,
    }




def run_micro(config, recorder, eps=None):
    """Incremental scheme on the perforated domain"""
    eps = config.eps if eps is None else eps
    domain = config.domain(eps)
    space = _space(config, domain)
    traj = run_trajectory(domain, config.bundle(), config.loads(),
                          config.grid(), u_init=space.identity(),
                          **config.solver_options())
    summary = record_trajectory(config, recorder, traj, 'micro')
    korn = trajectory_korn_constant(domain, traj)
    summary.update({'eps': eps, 'dof_count': space.dof_count,
                    'final_korn_constant': korn.value})
    recorder.summary('micro', summary)
    return summary


def run_macro_problem(config, recorder, eps=None):
    """Homogenized problem on the unperforated domain"""
    cell = config.cell()
    bundle = config.bundle()
    law = _homogenized(config, bundle, cell)
    loads = averaged_loads(config.loads(), cell,
                           quad_order=config('solver.quad_order'))
    traj = run_macro(config.macro_domain(), law, loads, config.grid(),
                     quad_order=config('solver.quad_order'),
                     **config.solver_options())
    if law.mode == 'quadratic':
        _tensor_table(recorder, law.tensor)
    summary = record_trajectory(config, recorder, traj, 'macro')
    summary.update({'mode': law.mode,
                    'alpha_bar': law.elastic_law.alpha.scale,
                    'delta_bar': law.dissipation_law.delta.scale})
    if law.cache is not None:
        summary.update({'cache_hits': law.cache.hits,
                        'cache_misses': law.cache.misses})
    recorder.summary('macro', summary)
    return traj, law


def _tensor_table(recorder, tensor):
    recorder.table('tensor.csv', ['row'] + list(SYM_LABELS),
                   [[label] + list(row)
                    for label, row in zip(SYM_LABELS, tensor)],
                   'homogenized 6x6 tensor on the symmetric basis')


def run_cell(config, recorder, eps=None):
    """One cell problem, and the homogenized tensor in quadratic mode"""
    cell = config.cell()
    law = config.bundle().gradient_law
    order = config('solver.quad_order')
    G = np.asarray(config.data.get_path('cell.G'), dtype=float).reshape(
        2, 2, 2)
    G = 0.5 * (G + G.transpose(0, 2, 1))
    problem = CellProblem(cell, law, quad_order=order,
                          tol=config('solver.tol_newton'),
                          max_iters=config('solver.max_iters'))
    sol = problem.solve(G)
    hbar = cell_average(cell, lambda y: law.evaluate(
        y, np.broadcast_to(G, y.shape[:-1] + (2, 2, 2)))[0], quad_order=order)
    norm = sol.corrector_norm()
    recorder.table('cell.csv', list(SYM_LABELS) + [
        'value', 'hbar', 'corrector_norm', 'residual_norm', 'iterations'],
        [list(sym_coords(G)) + [sol.value, hbar, norm, sol.residual_norm,
                                sol.iterations]],
        'cell problem at the configured G')
    recorder.table('corrector.csv', ['dof', 'component', 'value'],
                   sol.u2.to_rows(), 'periodic corrector coefficients')
    recorder.check('cell.stationarity', sol.residual_norm <= problem.tol,
                   value=sol.residual_norm, limit=problem.tol)
    if cell.hole is None and law.beta.is_constant:
        scale = max(1., abs(hbar))
        recorder.check('cell.trivial_corrector', norm <= 1e-6, value=norm,
                       limit=1e-6)
        recorder.check('cell.trivial_value',
                       abs(sol.value - hbar) <= 1e-10 * scale,
                       value=abs(sol.value - hbar), limit=1e-10 * scale)
    summary = {'value': sol.value, 'hbar': hbar, 'corrector_norm': norm,
               'iterations': sol.iterations}
    if law.quadratic:
        tensor = homogenized_tensor(cell, law, quad_order=order)
        _tensor_table(recorder, tensor)
        g = sym_coords(G)
        quad = 0.5 * g @ tensor @ g
        scale = max(1., abs(quad))
        eig = float(np.min(np.linalg.eigvalsh(tensor)))
        recorder.check('cell.tensor_spd', eig > 0, value=eig, limit=0.)
        recorder.check('cell.quadratic_form',
                       abs(quad - sol.value) <= 1e-8 * scale,
                       value=abs(quad - sol.value), limit=1e-8 * scale)
        summary['tensor_min_eigenvalue'] = eig
    recorder.summary('cell', summary)
    return summary


def run_korn(config, recorder, eps=None):
    """Korn, Poincare and trace constants on the perforated domain"""
    eps = config.eps if eps is None else eps
    domain = config.domain(eps)
    space = _space(config, domain)
    extent = config.extent()
    estimates = []
    for name in config.data.get_path('funineq.coefficients'):
        A = COEFFICIENT_FIELDS[name](extent)
        estimates.append(('korn_' + name, korn_constant(domain, A, space)))
    estimates.append(('poincare', poincare_constant(domain, space)))
    if domain.cell.hole is not None:
        estimates.append(('trace', trace_constant(
            domain, samples=config.data.get_path('funineq.samples', 5),
            seed=config.seed, space=space)))
    recorder.table('constants.csv', ['constant', 'eps', 'dof_count', 'value',
                                     'eigen_residual'],
                   [[name, float(est.eps), est.dof_count, est.value,
                     est.eigen_residual] for name, est in estimates],
                   'functional-inequality constants')
    for name, est in estimates:
        limit = 1e-8
        recorder.check('korn.{}.eigen_residual'.format(name),
                       est.eigen_residual <= limit,
                       value=est.eigen_residual, limit=limit)
    summary = {name: est.value for name, est in estimates}
    recorder.summary('constants', summary)
    return summary


def run_extend(config, recorder, eps=None):
    """Extension norm ratios over a random field corpus"""
    eps = config.eps if eps is None else eps
    domain = config.domain(eps)
    space = _space(config, domain)
    samples = config.data.get_path('funineq.samples', 5)
    fields = list(_random_fields(config, space, samples))
    rows = []
    for s, u in enumerate(fields):
        ratios = extension_ratios(domain, u)
        rows.append([s, ratios['l2'], ratios['grad'], ratios['hess']])
    recorder.table('extension.csv', ['sample', 'l2', 'grad', 'hess'], rows,
                   'norm ratios of extended to perforated random fields')
    ratios = np.array([row[1:] for row in rows], dtype=float)
    recorder.check('extend.finite', np.all(np.isfinite(ratios)),
                   value=float(np.max(ratios)) if ratios.size else None)
    if fields:
        F, b = cell_affine_parts(domain, fields[0])
        cells = np.array(domain.cells, dtype=int).reshape(-1, 2)
        recorder.table('affine.csv', ['k1', 'k2', 'F11', 'F12', 'F21', 'F22',
                                      'b1', 'b2'],
                       [list(k) + list(f.ravel()) + list(c)
                        for k, f, c in zip(cells.tolist(), F, b)],
                       'cell-wise affine parts of the first sample')
    summary = {'eps': eps, 'samples': samples}
    if ratios.size:
        summary.update({key: float(np.max(ratios[:, i]))
                        for i, key in enumerate(('l2', 'grad', 'hess'))})
    recorder.summary('extension', summary)
    return summary


def run_unfold(config, recorder, eps=None):
    """Isometry of the unfolding operator over a random field corpus"""
    eps = config.eps if eps is None else eps
    domain = config.domain(eps)
    order = config('solver.quad_order')
    space = _space(config, domain)
    deterministic = config('modes.deterministic')
    workers = config('modes.workers')
    samples = config.data.get_path('funineq.samples', 5)

    def square(x, y, jet):
        return np.einsum('eqc,eqc->eq', jet.value, jet.value)

    rows = []
    for s, u in enumerate(_random_fields(config, space, samples)):
        unfolded = unfold(domain, u, quad_order=order).norm() ** 2
        direct = integrate(space, square, field=u,
                           deterministic=deterministic, workers=workers)
        rows.append([s, unfolded, direct, abs(unfolded - direct)])
    recorder.table('unfold.csv', ['sample', 'unfolded', 'direct',
                                  'difference'], rows,
                   'squared L2 norms of unfolded and original fields')
    worst = max(row[3] for row in rows) if rows else 0.
    scale = max([1.] + [row[2] for row in rows])
    recorder.check('unfold.isometry', worst <= 1e-12 * scale, value=worst,
                   limit=1e-12 * scale)
    summary = {'eps': eps, 'samples': samples, 'max_difference': worst}
    if domain.cell.hole is not None:
        def load(x):
            x = np.asarray(x, dtype=float)
            return np.stack([np.sin(2 * np.pi * x[..., 0]),
                             np.cos(2 * np.pi * x[..., 1])], axis=-1)
        lhs = unfold_boundary(domain, load, quad_order=order).norm()
        quad = space.facet_quadrature(FacetTag.GAMMA_EPS, order=order)
        vals = load(quad.points)
        rhs = float(np.sqrt(float(eps)) * np.sqrt(np.sum(
            np.einsum('fgc,fgc->fg', vals, vals) * quad.weights)))
        recorder.table('boundary.csv', ['eps', 'unfolded', 'scaled_trace'],
                       [[float(eps), lhs, rhs]],
                       'boundary unfolding against sqrt(eps) times the'
                       ' trace norm')
        limit = 1e-10 * max(1., rhs)
        recorder.check('unfold.boundary_scaling', abs(lhs - rhs) <= limit,
                       value=abs(lhs - rhs), limit=limit)
        summary['boundary'] = lhs
    recorder.summary('unfold', summary)
    return summary


def run_compare(config, recorder, eps=None):
    """Micro runs for every eps against one macro run"""
    cell = config.cell()
    bundle = config.bundle()
    order = config('solver.quad_order')
    traj, law = run_macro_problem(config, recorder)
    u0 = traj.final
    if law.mode == 'quadratic':
        corrector = CorrectorBasis(cell_correctors(cell, bundle.gradient_law,
                                                   quad_order=order))
    else:
        corrector = ZeroCorrector()
        recorder.notes.append('nested mode: hess distances use a zero'
                              ' corrector')
    eps_list = [eps] if eps is not None else sorted(config.eps_list,
                                                    reverse=True)
    rows = []
    det_mins = []
    for eps in eps_list:
        name = eps_label(eps)
        domain = config.domain(eps, cell=cell)
        space = _space(config, domain)
        micro = run_trajectory(domain, bundle, config.loads(), config.grid(),
                               u_init=space.identity(),
                               **config.solver_options())
        record_trajectory(config, recorder, micro, 'micro_' + name,
                          prefix=name + '/')
        ext = extend_field(domain, micro.final)
        dist = [two_scale_distance(domain, ext, u0, corrector=corrector,
                                   order=o, quad_order=order) for o in ORDERS]
        rows.append([float(eps)] + dist + [micro.det_min,
                                           micro.energies[-1]
                                           if micro.energies else None])
        det_mins.append(micro.det_min)
        avg = local_average(domain, ext, quad_order=order)
        cells = np.array(domain.cells, dtype=int).reshape(-1, 2)
        centres = float(eps) * (cells + 0.5)
        macro_vals = eval_jet(u0, centres).value
        recorder.table(name + '/local_average.csv',
                       ['k1', 'k2', 'x1', 'x2', 'mean1', 'mean2', 'macro1',
                        'macro2'],
                       [list(k) + list(x) + list(a) + list(v)
                        for k, x, a, v in zip(cells.tolist(), centres,
                                              avg.reshape(-1, 2),
                                              macro_vals)],
                       'cell means of the extended micro solution')
    recorder.table('distance.csv', ['eps'] + list(ORDERS) + ['det_min',
                                                             'energy'],
                   rows, 'two-scale distances to the macro solution')
    grads = [row[2] for row in rows]
    if len(grads) > 1:
        ratios = [b / a if a > 0 else np.inf
                  for a, b in zip(grads, grads[1:])]
        recorder.check('compare.grad_decreasing',
                       max(ratios) <= GRAD_REDUCTION, value=ratios,
                       limit=GRAD_REDUCTION)
    dets = [d for d in det_mins if d is not None]
    if len(dets) > 1:
        spread = max(dets) / min(dets)
        recorder.check('compare.det_min_spread', spread <= DET_SPREAD,
                       value=spread, limit=DET_SPREAD)
    recorder.summary('distances', {format_rational(e): dict(zip(ORDERS,
                                                                row[1:4]))
                                   for e, row in zip(eps_list, rows)})
    return rows




SUBCOMMANDS = {
    'micro': run_micro,
    'macro': run_macro_problem,
    'cell': run_cell,
    'korn': run_korn,
    'extend': run_extend,
    'unfold': run_unfold,
    'compare': run_compare,
}


def run_sweep(config, recorder, target):
    """Chains a subcommand over the eps list, one subdirectory per eps

    Members run sequentially; each writes its own manifest, and the sweep
    manifest merges their tables and checks afterwards.
    """
    if target not in SUBCOMMANDS:
        raise ValueError('Cannot sweep {!r}'.format(target))
    results = []
    rows = []
    for eps in config.eps_list:
        name = eps_label(eps)
        child = recorder.child(name, target)
        logger.info('Sweep member {} ({})'.format(name, target))
        try:
            results.append(SUBCOMMANDS[target](config, child, eps))
        except HomLabException as e:
            child.failure = _failure(e)
            raise
        finally:
            child.write_manifest()
            recorder.adopt(name, child, eps)
        statuses = [check['status'] for check in child.checks]
        rows.append([float(eps), statuses.count('PASS'),
                     statuses.count('FAIL')])
    recorder.table('sweep.csv', ['eps', 'passed', 'failed'], rows,
                   'check counts per sweep member')
    if target == 'korn':
        for key in results[0]:
            vals = [res[key] for res in results]
            if key == 'trace' or min(vals) <= 0:
                continue
            ratio = max(vals) / min(vals)
            recorder.check('sweep.{}.uniform'.format(key),
                           ratio <= UNIFORMITY, value=ratio,
                           limit=UNIFORMITY)
    elif target == 'micro':
        dets = [res['det_min'] for res in results
                if res.get('det_min') is not None]
        if len(dets) > 1:
            spread = max(dets) / min(dets)
            recorder.check('sweep.det_min_spread', spread <= DET_SPREAD,
                           value=spread, limit=DET_SPREAD)
        sums = [res['cumulative_dissipation'] for res in results]
        if len(sums) > 1 and min(sums) > 0:
            spread = max(sums) / min(sums)
            recorder.check('sweep.dissipation_spread',
                           spread <= DISSIPATION_SPREAD, value=spread,
                           limit=DISSIPATION_SPREAD)
    elif target == 'extend':
        constants = {}
        for key in ('l2', 'grad', 'hess'):
            vals = [res[key] for res in results if key in res]
            if len(vals) < 2 or min(vals) <= 0:
                continue
            constants[key] = max(vals)
            ratio = max(vals) / min(vals)
            recorder.check('sweep.extend_{}.uniform'.format(key),
                           ratio <= UNIFORMITY, value=ratio,
                           limit=UNIFORMITY)
        recorder.summary('extension_constants', constants)
    recorder.summary('sweep', {format_rational(e): res
                               for e, res in zip(config.eps_list, results)
                               if isinstance(res, dict)})
    return results


def run(subcommand, config, target=None, directory=None):
    """Runs a subcommand and writes its manifest

    Args:
        subcommand (str): a key of SUBCOMMANDS or 'sweep'
        config (ExperimentConfig): the validated configuration
        target (str): the subcommand chained by 'sweep'
        directory (str): run directory, config.output_dir if None

    Returns:
        RunRecorder
    """
    directory = config.output_dir if directory is None else directory
    label = subcommand if target is None else '{} {}'.format(subcommand,
                                                             target)
    recorder = RunRecorder(config, label, directory)
    with log_to(directory):
        logger.info('Running {} in {}'.format(label, directory))
        for note in recorder.notes:
            logger.warning(note)
        try:
            if subcommand == 'sweep':
                run_sweep(config, recorder, target)
            elif subcommand in SUBCOMMANDS:
                SUBCOMMANDS[subcommand](config, recorder)
            else:
                raise ValueError('Unknown subcommand: {}'.format(subcommand))
        except HomLabException as e:
            recorder.failure = _failure(e)
            raise
        finally:
            recorder.write_manifest()
    return recorder
