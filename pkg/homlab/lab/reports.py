"""Summarizes a run manifest as PASS/FAIL lines"""
import json
import logging
import os

from ..exceptions import ManifestError
from ..helpers import read_csv
from ..mechanics.micro import StepReport




logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'




def load_manifest(path):
    """Reads a manifest from its path or from the run directory holding it

    Returns:
        Tuple (manifest dict, run directory)
    """
    fp = os.path.join(path, MANIFEST) if os.path.isdir(path) else path
    if not os.path.isfile(fp):
        raise ManifestError('No manifest found at {}'.format(path))
    try:
        with open(fp, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
    except (OSError, ValueError) as e:
        raise ManifestError('Could not parse {}: {}'.format(fp, e))
    if not isinstance(manifest, dict) or not isinstance(
            manifest.get('checks'), list):
        raise ManifestError('{} is not a homlab manifest'.format(fp))
    return manifest, os.path.dirname(os.path.abspath(fp))


def _step_checks(manifest, directory):
    """Re-evaluates the energy inequality from every steps table"""
    for table in manifest.get('tables', []):
        path = table.get('path', '')
        if os.path.basename(path) != 'steps.csv':
            continue
        fp = os.path.join(directory, *path.split('/'))
        try:
            header, rows = read_csv(fp)
        except OSError:
            continue
        failed = []
        for row in rows:
            rep = StepReport(*[float(val) for val in row])
            if not rep.satisfies_energy_inequality():
                failed.append(int(rep.k))
        yield '{}:energy_inequality'.format(path), not failed, failed


def _table_checks(manifest, directory):
    """Every CSV in the run directory is referenced and every reference
    exists"""
    listed = set(table.get('path') for table in manifest.get('tables', []))
    missing = sorted(path for path in listed
                     if not os.path.isfile(os.path.join(directory,
                                                        *path.split('/'))))
    found = set()
    for root, _, files in os.walk(directory):
        for fn in files:
            if fn.endswith('.csv'):
                rel = os.path.relpath(os.path.join(root, fn), directory)
                found.add(rel.replace(os.sep, '/'))
    orphans = sorted(found - listed)
    yield 'tables.present', not missing, missing
    yield 'tables.referenced', not orphans, orphans


def report(path, stream=None):
    """Prints a PASS/FAIL line for every check recorded in a manifest

    Args:
        path (str): path to a manifest or to the run directory holding it
        stream (file): output stream, standard output if None

    Returns:
        0 if every check passes, otherwise 1
    """
    manifest, directory = load_manifest(path)
    lines = ['homlab {} run: {}'.format(manifest.get('version', '?'),
                                        manifest.get('subcommand', '?'))]
    hyp = manifest.get('hypotheses') or {}
    if 'p_gt_n' in hyp:
        lines.append('hypothesis p > n: {}'.format(
            'yes' if hyp['p_gt_n'] else 'no (p = {})'.format(hyp.get('p'))))
    for note in manifest.get('notes', []):
        lines.append('note: {}'.format(note))
    results = []
    for check in manifest['checks']:
        status = check.get('status')
        results.append(status == 'PASS')
        detail = ''
        if check.get('value') is not None:
            detail = ' (value={}'.format(check['value'])
            if check.get('limit') is not None:
                detail += ', limit={}'.format(check['limit'])
            detail += ')'
        lines.append('{} {}{}'.format(status, check.get('name'), detail))
    derived = list(_step_checks(manifest, directory)) \
              + list(_table_checks(manifest, directory))
    for name, passed, detail in derived:
        results.append(passed)
        line = '{} {}'.format('PASS' if passed else 'FAIL', name)
        if detail:
            line += ' {}'.format(detail)
        lines.append(line)
    failure = manifest.get('failure')
    if failure:
        results.append(False)
        lines.append('FAIL run: {error} at step {step}: {message}'.format(
            **failure))
    failed = results.count(False)
    lines.append('{} checks, {} failed'.format(len(results), failed))
    print('\n'.join(lines), file=stream)
    return 1 if failed else 0
