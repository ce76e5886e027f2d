"""Defines tests for configuration, run manifests and the command line tool"""
import io
import json
import os
from fractions import Fraction

import pytest
import yaml

from homlab.exceptions import ConfigError, ManifestError
from homlab.lab import ExperimentConfig, report, run
from homlab.lab.__main__ import main
from homlab.lab.config import ACCEPTANCE
from homlab.lab.experiments import MANIFEST, eps_label


SMALL = {
    'geometry': {'m': 4, 'macro_m': 4},
    'time': {'T': '1/2', 'tau': '1/4'},
    'sweep': {'eps': ['1/2', '1/4']},
    'funineq': {'samples': 2},
}


def write_config(path, data):
    fp = os.path.join(str(path), 'config.yml')
    with open(fp, 'w', encoding='utf-8') as f:
        yaml.safe_dump(data, f)
    return fp


def load(tmp_path, **sections):
    overrides = json.loads(json.dumps(SMALL))
    for key, val in sections.items():
        overrides.setdefault(key, {}).update(val)
    overrides['output'] = {'root': str(tmp_path), 'name': 'run'}
    return ExperimentConfig.load(environ={}, overrides=overrides)


def statuses(recorder):
    return {check['name']: check['status'] for check in recorder.checks}




def test_defaults():
    config = ExperimentConfig.load(environ={})
    assert config.eps == Fraction(1, 2)
    assert config.eps_list == [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    assert config('material.p') == 2
    assert config.bundle().hypotheses()['p_gt_n'] is False
    assert len(config.grid()) == 4


def test_acceptance_config():
    config = ExperimentConfig.load(ACCEPTANCE, environ={})
    assert len(config.grid()) == 10
    assert config.eps_list == [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    assert config('geometry.m') == 8
    assert config('funineq.samples') == 50
    assert config('modes.homogenized') == 'quadratic'
    assert config.bundle().hypotheses()['p_gt_n'] is False


def test_serialize_round_trip():
    config = ExperimentConfig.load(environ={})
    again = ExperimentConfig.from_text(config.serialize())
    assert again.to_dict() == config.to_dict()


def test_user_file_is_merged(tmp_path):
    fp = write_config(tmp_path, {'geometry': {'eps': '1/4'}, 'seed': 3})
    config = ExperimentConfig.load(fp, environ={})
    assert config.eps == Fraction(1, 4)
    assert config.seed == 3
    assert config('geometry.m') == 8


def test_output_root_from_environment(tmp_path):
    config = ExperimentConfig.load(environ={'HOMLAB_OUTPUT_ROOT':
                                            str(tmp_path)})
    assert config.output_dir == os.path.join(str(tmp_path), 'run')


def test_config_is_locked():
    config = ExperimentConfig.load(environ={})
    with pytest.raises(ConfigError):
        config.data['seed'] = 1
    with pytest.raises(ConfigError):
        config.data['geometry']['m'] = 4


@pytest.mark.parametrize('overrides, field', [
    ({'geometry': {'eps': 0.3}}, 'geometry.eps'),
    ({'sweep': {'eps': ['1/2', '2/3']}}, 'sweep.eps'),
    ({'geometry': {'hole': ['1/3', '1/4', '3/4', '3/4']}}, 'geometry.hole'),
    ({'geometry': {'dirichlet': ['front']}}, 'geometry.dirichlet'),
    ({'material': {'p': 1}}, 'material.p'),
    ({'time': {'tau': '1/3', 'T': '1/2'}}, 'time.tau'),
    ({'modes': {'homogenized': 'fe2'}}, 'modes.homogenized'),
])
def test_invalid_config(overrides, field):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.load(environ={}, overrides=overrides)
    assert err.value.field == field


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(os.path.join(str(tmp_path), 'missing.yml'),
                              environ={})




def test_eps_label():
    assert eps_label(Fraction(1, 4)) == 'eps_1-4'


def test_cell_run_without_hole(tmp_path):
    config = load(tmp_path, geometry={'hole': None},
                  material={'amplitude': 0.})
    recorder = run('cell', config)
    checks = statuses(recorder)
    for name in ('cell.stationarity', 'cell.trivial_corrector',
                 'cell.trivial_value', 'cell.tensor_spd',
                 'cell.quadratic_form'):
        assert checks[name] == 'PASS'
    directory = config.output_dir
    for name in ('cell.csv', 'corrector.csv', 'tensor.csv', MANIFEST,
                 'homlab.log'):
        assert os.path.isfile(os.path.join(directory, name))
    assert report(directory, stream=io.StringIO()) == 0


def test_micro_run(tmp_path):
    config = load(tmp_path)
    recorder = run('micro', config)
    assert all(check['status'] == 'PASS' for check in recorder.checks)
    with open(os.path.join(config.output_dir, MANIFEST)) as f:
        manifest = json.load(f)
    assert manifest['hypotheses']['p_gt_n'] is False
    assert manifest['notes']
    assert manifest['config']['geometry']['eps'] == '1/2'
    paths = [table['path'] for table in manifest['tables']]
    assert 'steps.csv' in paths
    assert 'states/u_0002.csv' in paths
    stream = io.StringIO()
    assert report(config.output_dir, stream=stream) == 0
    assert 'PASS micro.energy_inequality' in stream.getvalue()


def test_runs_are_bitwise_reproducible(tmp_path):
    config = load(tmp_path)
    first = run('micro', config, directory=os.path.join(str(tmp_path), 'a'))
    second = run('micro', config, directory=os.path.join(str(tmp_path), 'b'))
    for table in first.tables:
        with open(first.path(table['path']), 'rb') as f:
            a = f.read()
        with open(second.path(table['path']), 'rb') as f:
            b = f.read()
        assert a == b


def test_korn_run(tmp_path):
    config = load(tmp_path, funineq={'coefficients': ['identity']})
    recorder = run('korn', config)
    assert all(check['status'] == 'PASS' for check in recorder.checks)
    assert 'constants.csv' in [table['path'] for table in recorder.tables]


def test_extend_sweep(tmp_path):
    config = load(tmp_path)
    recorder = run('sweep', config, target='extend')
    checks = statuses(recorder)
    for key in ('l2', 'grad', 'hess'):
        assert checks['sweep.extend_{}.uniform'.format(key)] == 'PASS'
    constants = recorder.summaries['extension_constants']
    assert sorted(constants) == ['grad', 'hess', 'l2']
    assert report(config.output_dir, stream=io.StringIO()) == 0




def test_report_with_failed_check(tmp_path):
    config = load(tmp_path, geometry={'hole': None},
                  material={'amplitude': 0.})
    run('cell', config)
    fp = os.path.join(config.output_dir, MANIFEST)
    with open(fp) as f:
        manifest = json.load(f)
    manifest['checks'][0]['status'] = 'FAIL'
    with open(fp, 'w') as f:
        json.dump(manifest, f)
    stream = io.StringIO()
    assert report(fp, stream=stream) == 1
    assert 'FAIL {}'.format(manifest['checks'][0]['name']) in stream.getvalue()


def test_report_flags_orphan_tables(tmp_path):
    config = load(tmp_path, geometry={'hole': None},
                  material={'amplitude': 0.})
    run('cell', config)
    with open(os.path.join(config.output_dir, 'stray.csv'), 'w') as f:
        f.write('a\n1\n')
    stream = io.StringIO()
    assert report(config.output_dir, stream=stream) == 1
    assert 'FAIL tables.referenced' in stream.getvalue()


def test_report_without_manifest(tmp_path):
    with pytest.raises(ManifestError):
        report(str(tmp_path))




def test_cli_report_exit_codes(tmp_path, capsys):
    assert main(['report', str(tmp_path)]) == 4
    assert 'manifest' in capsys.readouterr().err


def test_cli_rejects_bad_eps(tmp_path, capsys):
    fp = write_config(tmp_path, {'geometry': {'eps': 0.3}})
    assert main(['micro', fp]) == 2
    assert 'eps' in capsys.readouterr().err


def test_cli_solver_failure(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv('HOMLAB_OUTPUT_ROOT', raising=False)
    fp = write_config(tmp_path, {
        'geometry': {'m': 4},
        'solver': {'det_floor': 2.0},
        'output': {'root': str(tmp_path), 'name': 'fail'},
    })
    assert main(['micro', fp]) == 3
    assert 'step 1' in capsys.readouterr().err
    manifest = os.path.join(str(tmp_path), 'fail', MANIFEST)
    with open(manifest) as f:
        assert json.load(f)['failure']['step'] == 1
    assert report(manifest, stream=io.StringIO()) == 1


def test_cli_run_and_report(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv('HOMLAB_OUTPUT_ROOT', raising=False)
    fp = write_config(tmp_path, dict(SMALL, geometry={'hole': None,
                                                      'm': 4},
                                     material={'amplitude': 0.},
                                     output={'root': str(tmp_path),
                                             'name': 'cli'}))
    assert main(['cell', fp, '--no-deterministic']) == 0
    assert 'Wrote' in capsys.readouterr().out
    assert main(['report', os.path.join(str(tmp_path), 'cli')]) == 0


def test_cli_needs_subcommand():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2




@pytest.mark.slow
def test_compare_run(tmp_path):
    config = ExperimentConfig.load(ACCEPTANCE, environ={}, overrides={
        'output': {'root': str(tmp_path), 'name': 'run'}})
    recorder = run('compare', config)
    check = [c for c in recorder.checks
             if c['name'] == 'compare.grad_decreasing'][0]
    assert check['status'] == 'PASS'
    assert check['limit'] == 0.9
    assert len(check['value']) == 2
    grads = [recorder.summaries['distances'][label]['grad']
             for label in ('1/2', '1/4', '1/8')]
    for a, b in zip(grads, grads[1:]):
        assert 0 < b <= 0.9 * a
    assert 'distance.csv' in [table['path'] for table in recorder.tables]
    assert report(config.output_dir, stream=io.StringIO()) == 0


@pytest.mark.slow
def test_korn_sweep(tmp_path):
    config = load(tmp_path, funineq={'coefficients': ['identity',
                                                      'deformation']})
    recorder = run('sweep', config, target='korn')
    assert len(recorder.runs) == 2
    assert os.path.isfile(os.path.join(config.output_dir, 'eps_1-4',
                                       MANIFEST))
    assert statuses(recorder)['sweep.korn_identity.uniform'] == 'PASS'
    assert report(config.output_dir, stream=io.StringIO()) == 0
