"""Reads, validates and serializes experiment configurations"""
import logging
import os

import yaml

from ..dicts import DeepDict, LockableDict
from ..exceptions import ConfigError, HomLabException
from ..helpers import format_rational, parse_rational
from ..mechanics.materials import MaterialBundle
from ..mechanics.micro import Loads, TimeGrid
from ..mesh.geometry import FACES, build_domain, build_unit_cell




logger = logging.getLogger(__name__)

DEFAULTS = os.path.join(os.path.dirname(__file__), '..', 'files',
                        'defaults.yml')
ACCEPTANCE = os.path.join(os.path.dirname(__file__), '..', 'files',
                          'acceptance.yml')

#: Environment variable overriding output.root
OUTPUT_ROOT_VAR = 'HOMLAB_OUTPUT_ROOT'

MODES = ('quadratic', 'nested')

COEFFICIENTS = ('identity', 'deformation', 'rotation')




class ConfigSection(DeepDict, LockableDict):
    """Nested configuration data with dotted-path access and locking"""
    pass




def read_yaml(fp):
    """Reads a YAML mapping from a file"""
    with open(fp, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError('<root>', 'configuration must be a mapping')
    return data


def _rational(val, field):
    try:
        return parse_rational(val)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ConfigError(field, '{!r} is not an exact rational'.format(val))


def _eps(val, field):
    eps = _rational(val, field)
    if eps <= 0 or (1 / eps).denominator != 1:
        raise ConfigError(field, '1/eps must be a positive integer, got'
                                 ' {!r}'.format(val))
    return eps


def _positive(val, field, integer=False):
    kind = int if integer else (int, float)
    if isinstance(val, bool) or not isinstance(val, kind) or val <= 0:
        raise ConfigError(field, 'must be a positive {}, got {!r}'.format(
            'integer' if integer else 'number', val))
    return val




class ExperimentConfig(object):
    """Validated, locked experiment configuration

    Args:
        data (dict): configuration merged over the defaults

    Attributes:
        data (ConfigSection): the locked configuration tree
    """

    def __init__(self, data):
        self.data = ConfigSection(data)
        self.validate()
        self.data.lock()


    def __call__(self, path):
        return self.data.pull(path)


    def __repr__(self):
        return 'ExperimentConfig({})'.format(self.data.to_dict())


    @classmethod
    def load(cls, fp=None, environ=None, overrides=None):
        """Merges a user file over the packaged defaults

        Args:
            fp (str): path to a YAML file, or None for the defaults alone
            environ (dict): environment, os.environ if None
            overrides (dict): nested values merged last, as set by
                command-line flags
        """
        environ = os.environ if environ is None else environ
        data = ConfigSection(read_yaml(DEFAULTS))
        if fp is not None:
            try:
                user = read_yaml(fp)
            except (OSError, yaml.YAMLError) as e:
                raise ConfigError('<file>', 'cannot read {}: {}'.format(fp, e))
            data.merge(user)
        if overrides:
            data.merge(overrides)
        root = environ.get(OUTPUT_ROOT_VAR)
        if root:
            data.push(root, 'output.root')
        return cls(data.to_dict())


    @classmethod
    def from_text(cls, text):
        """Parses configuration text produced by serialize()"""
        return cls(yaml.safe_load(text))


    def serialize(self):
        """Returns the configuration as YAML text"""
        return yaml.safe_dump(self.data.to_dict(), sort_keys=True,
                              default_flow_style=None)


    def to_dict(self):
        return self.data.to_dict()


    def validate(self):
        """Checks every field, raising ConfigError on the first failure"""
        get = self.data.get_path
        for section in ('geometry', 'material', 'time', 'loads', 'solver',
                        'sweep', 'modes', 'output'):
            if not isinstance(self.data.get(section), dict):
                raise ConfigError(section, 'missing section')
        m = _positive(get('geometry.m'), 'geometry.m', integer=True)
        hole = get('geometry.hole')
        if hole is not None:
            if not isinstance(hole, list) or len(hole) != 4:
                raise ConfigError('geometry.hole', 'expected four rationals')
            [_rational(c, 'geometry.hole') for c in hole]
        try:
            self.cell()
        except (HomLabException, ValueError) as e:
            raise ConfigError('geometry.hole', str(e))
        _eps(get('geometry.eps'), 'geometry.eps')
        eps_list = get('sweep.eps')
        if not isinstance(eps_list, list) or not eps_list:
            raise ConfigError('sweep.eps', 'expected a nonempty list')
        [_eps(e, 'sweep.eps') for e in eps_list]
        faces = get('geometry.dirichlet')
        if not isinstance(faces, list) or not faces \
           or not set(faces) <= set(FACES):
            raise ConfigError('geometry.dirichlet',
                              'expected a nonempty subset of {}'.format(FACES))
        try:
            (a1, a2), (b1, b2) = get('geometry.extent')
            if not all(isinstance(c, int) for c in (a1, a2, b1, b2)) \
               or a1 >= b1 or a2 >= b2:
                raise ValueError
        except (TypeError, ValueError):
            raise ConfigError('geometry.extent',
                              'expected [[a1, a2], [b1, b2]] integer corners')
        _positive(get('geometry.macro_m'), 'geometry.macro_m', integer=True)
        p = get('material.p')
        if not isinstance(p, (int, float)) or p < 2:
            raise ConfigError('material.p', 'must be at least 2')
        q = get('material.q')
        if not isinstance(q, (int, float)) or q < 2:
            raise ConfigError('material.q', 'must be at least 2')
        amp = get('material.amplitude')
        if not isinstance(amp, (int, float)) or abs(amp) >= 2:
            raise ConfigError('material.amplitude', 'must satisfy |amp| < 2')
        for key in ('alpha', 'beta', 'delta'):
            _positive(get('material.scales.' + key, 1.),
                      'material.scales.' + key)
        T = _rational(get('time.T'), 'time.T')
        tau = _rational(get('time.tau'), 'time.tau')
        if T <= 0 or tau <= 0 or (T / tau).denominator != 1:
            raise ConfigError('time.tau', 'T/tau must be a positive integer')
        for key in ('body', 'traction'):
            val = get('loads.' + key)
            if val is not None and (not isinstance(val, list) or len(val) != 2
                                    or not all(isinstance(v, (int, float))
                                               for v in val)):
                raise ConfigError('loads.' + key, 'expected two numbers or'
                                                  ' null')
        _positive(get('solver.det_floor'), 'solver.det_floor')
        _positive(get('solver.tol_newton'), 'solver.tol_newton')
        _positive(get('solver.max_iters'), 'solver.max_iters', integer=True)
        order = get('solver.quad_order')
        if not isinstance(order, int) or order < 3:
            raise ConfigError('solver.quad_order', 'must be an integer >= 3')
        if get('modes.homogenized') not in MODES:
            raise ConfigError('modes.homogenized',
                              'expected one of {}'.format(MODES))
        if not isinstance(get('modes.deterministic'), bool):
            raise ConfigError('modes.deterministic', 'expected true or false')
        _positive(get('modes.workers'), 'modes.workers', integer=True)
        coefs = get('funineq.coefficients', list(COEFFICIENTS))
        if not set(coefs) <= set(COEFFICIENTS):
            raise ConfigError('funineq.coefficients',
                              'expected a subset of {}'.format(COEFFICIENTS))
        seed = self.data.get('seed', 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError('seed', 'expected an integer')
        if not get('output.root') or not get('output.name'):
            raise ConfigError('output', 'root and name are required')
        logger.debug('Validated configuration (m={}, p={})'.format(m, p))


    @property
    def eps(self):
        return parse_rational(self('geometry.eps'))


    @property
    def eps_list(self):
        return [parse_rational(e) for e in self('sweep.eps')]


    @property
    def seed(self):
        return self.data.get('seed', 0)


    @property
    def output_dir(self):
        return os.path.join(self('output.root'), self('output.name'))


    def cell(self):
        hole = self.data.get_path('geometry.hole')
        if hole is not None:
            hole = [parse_rational(c) for c in hole]
        return build_unit_cell(hole, self.data.get_path('geometry.m'))


    def extent(self):
        return tuple(tuple(c) for c in self('geometry.extent'))


    def domain(self, eps=None, cell=None):
        cell = self.cell() if cell is None else cell
        eps = self.eps if eps is None else eps
        return build_domain(cell, eps, self('geometry.dirichlet'),
                            self.extent())


    def macro_domain(self):
        """Unperforated Omega meshed with macro_m elements per unit length"""
        cell = build_unit_cell(None, self('geometry.macro_m'))
        return build_domain(cell, 1, self('geometry.dirichlet'),
                            self.extent())


    def bundle(self):
        return MaterialBundle.from_config(self('material'))


    def loads(self):
        return Loads.from_config(self('loads'))


    def grid(self):
        return TimeGrid(self('time.T'), self('time.tau'))


    def solver_options(self):
        return {
            'det_floor': float(self('solver.det_floor')),
            'tol_newton': float(self('solver.tol_newton')),
            'max_iters': int(self('solver.max_iters')),
        }


    def echo(self):
        """Configuration with rationals normalized, for manifests"""
        data = self.to_dict()
        data['geometry']['eps'] = format_rational(self.eps)
        data['sweep']['eps'] = [format_rational(e) for e in self.eps_list]
        return data
