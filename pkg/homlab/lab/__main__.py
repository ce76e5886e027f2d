"""Command line tool for running homogenization experiments"""
import argparse
import logging
import sys

from .config import ExperimentConfig
from .experiments import SUBCOMMANDS, run
from .reports import report
from ..exceptions import ConfigError, ManifestError, MaterialError, SolverError




logger = logging.getLogger(__name__)




class HomLabParser(argparse.ArgumentParser):

    def error(self, message):
        """Return help text on error with command
           From http://stackoverflow.com/questions/4042452"""
        sys.stderr.write('error: %s\n' % message)
        self.print_help()
        sys.exit(2)




def _add_run_args(parser):
    parser.add_argument(
        'config',
        nargs='?',
        default=None,
        help='path to a YAML experiment configuration'
    )
    parser.add_argument(
        '--deterministic',
        dest='deterministic',
        action='store_true',
        default=None,
        help='sum quadrature in a fixed order (overrides modes.deterministic)'
    )
    parser.add_argument(
        '--no-deterministic',
        dest='deterministic',
        action='store_false',
        help='allow threaded quadrature sums'
    )


def _load_config(args):
    overrides = {}
    if args.deterministic is not None:
        overrides['modes'] = {'deterministic': args.deterministic}
    return ExperimentConfig.load(args.config, overrides=overrides)


def main(args=None):

    def _run_callback(args):
        """Runs one subcommand"""
        config = _load_config(args)
        recorder = run(args.subcommand, config)
        print('Wrote {} tables to {}'.format(len(recorder.tables),
                                             recorder.directory))
        return 0


    def _sweep_callback(args):
        """Chains a subcommand over the eps list"""
        config = _load_config(args)
        recorder = run('sweep', config, target=args.target)
        print('Wrote {} runs to {}'.format(len(recorder.runs),
                                           recorder.directory))
        return 0


    def _report_callback(args):
        """Summarizes a manifest"""
        return report(args.manifest)


    if args is None:
        args = sys.argv[1:]

    parser = HomLabParser(
        description=('Strain-gradient viscoelastic homogenization experiments')
    )
    parser.add_argument(
        '-v', '--verbose',
        action='count',
        default=0,
        help='log INFO (-v) or DEBUG (-vv) messages to stderr'
    )
    subparsers = parser.add_subparsers(dest='command', help='sub-command help')

    helps = {
        'micro': 'Run the incremental scheme on the perforated domain',
        'macro': 'Run the homogenized problem on the unperforated domain',
        'cell': 'Solve the cell problem and the homogenized tensor',
        'korn': 'Estimate Korn, Poincare and trace constants',
        'extend': 'Report extension norm ratios over random fields',
        'unfold': 'Check the unfolding isometry over random fields',
        'compare': 'Compare micro solutions over the eps list with the'
                   ' macro solution',
    }
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=helps[name])
        _add_run_args(sub)
        sub.set_defaults(func=_run_callback, subcommand=name)

    sweep_parser = subparsers.add_parser(
        'sweep',
        help='Chain a subcommand over the eps list of the configuration'
    )
    sweep_parser.add_argument(
        'target',
        choices=sorted(SUBCOMMANDS),
        help='the subcommand to repeat'
    )
    _add_run_args(sweep_parser)
    sweep_parser.set_defaults(func=_sweep_callback)

    report_parser = subparsers.add_parser(
        'report',
        help='Print PASS/FAIL for every check recorded in a manifest'
    )
    report_parser.add_argument(
        'manifest',
        help='path to manifest.json or to the run directory'
    )
    report_parser.set_defaults(func=_report_callback)

    args = parser.parse_args(args)
    if not getattr(args, 'func', None):
        parser.error('a subcommand is required')
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose,
                                                               2)]
    logging.basicConfig(level=level,
                        format='%(levelname)s %(name)s: %(message)s')
    for handler in logging.getLogger().handlers:
        handler.setLevel(level)
    try:
        return args.func(args)
    except ConfigError as e:
        sys.stderr.write('config error: {}\n'.format(e))
        return 2
    except (SolverError, MaterialError) as e:
        step = getattr(e, 'step', None)
        sys.stderr.write('solver failure at step {}: {}: {}\n'.format(
            step if step is not None else '-', e.__class__.__name__, e))
        return 3
    except ManifestError as e:
        sys.stderr.write('manifest error: {}\n'.format(e))
        return 4




if __name__ == '__main__':
    sys.exit(main())
