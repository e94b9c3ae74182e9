import json

import pytest

import store
from cli import main
from pv_model import mpp_oracle
from models import NOMINAL_ENVIRONMENT


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_curve_two_points(capsys):
    code, out, _ = run_cli(capsys, 'curve', '--temp', '25', '--irradiance', '1000', '--points', '2')
    assert code == 0
    lines = out.split('\n')
    assert lines[0] == 'v,i,p'
    assert len([line for line in lines[1:] if line]) == 2


def test_curve_rejects_darkness(capsys):
    code, _, err = run_cli(capsys, 'curve', '--irradiance', '0')
    assert code == 3
    assert 'irradiance g must be > 0' in err


def test_curve_open_circuit_falls_with_temperature(capsys):
    open_circuit = []
    for temp in ('0', '10', '20', '30', '40', '50'):
        code, out, _ = run_cli(capsys, 'curve', '--temp', temp, '--points', '5')
        assert code == 0
        last = [line for line in out.split('\n') if line][-1]
        open_circuit.append(float(last.split(',')[0]))
    assert all(a > b for a, b in zip(open_circuit, open_circuit[1:]))


def test_curve_to_file(capsys, tmp_path):
    path = tmp_path / 'curve.csv'
    code, out, _ = run_cli(capsys, 'curve', '--points', '10', '--out', str(path))
    assert code == 0
    assert out == ''
    assert len(path.read_text(encoding='utf-8').splitlines()) == 11


@pytest.mark.parametrize('temp, p_max', [('50', 193.489), ('0', 241.675)])
def test_mpp(capsys, temp, p_max):
    code, out, _ = run_cli(capsys, 'mpp', '--temp', temp, '--irradiance', '1000')
    assert code == 0
    assert out.count('\n') == 1
    doc = json.loads(out)
    assert set(doc) == {'v_mp', 'i_mp', 'p_max'}
    assert doc['p_max'] == pytest.approx(p_max, rel=0.02)


def test_run_fixed(capsys):
    code, out, _ = run_cli(capsys, 'run', '--t0', '50', '--t1', '0', '--g0', '1000', '--g1', '1000',
                           '--controller', 'fixed', '--step', '0.01')
    assert code == 0
    summary = json.loads(out)
    assert summary['converged']
    assert 540 <= summary['iterations'] <= 660


def test_run_adaptive_with_trace(capsys, tmp_path):
    trace = tmp_path / 'trace.csv'
    code, out, _ = run_cli(capsys, 'run', '--t0', '50', '--t1', '0', '--controller', 'adaptive',
                           '--m', '0.09', '--trace', str(trace))
    assert code == 0
    summary = json.loads(out)
    assert summary['iterations'] <= 30
    lines = trace.read_text(encoding='utf-8').splitlines()
    assert lines[0] == 'iteration,v_volts,i_amps,p_watts,step_volts,direction'
    assert len(lines) == summary['iterations'] + 1


def test_run_not_converged(capsys):
    code, out, _ = run_cli(capsys, 'run', '--t0', '50', '--t1', '0', '--max-iterations', '10')
    assert code == 2
    assert json.loads(out)['converged'] is False


def test_run_rejects_zero_step(capsys):
    code, _, err = run_cli(capsys, 'run', '--t0', '50', '--t1', '0', '--step', '0')
    assert code == 3
    assert 'step' in err


def test_run_scenario_file(capsys, tmp_path):
    path = tmp_path / 'scenario.json'
    path.write_text(json.dumps({
        'env_initial': {'t_celsius': 25.0, 'g': 1000.0},
        'env_final': {'t_celsius': 25.0, 'g': 800.0},
        'config': {'policy': 'adaptive', 'm': 0.09},
    }), encoding='utf-8')
    code, out, _ = run_cli(capsys, 'run', '--scenario', str(path))
    assert code == 0
    assert json.loads(out)['converged']


def test_run_malformed_scenario_file(capsys, tmp_path):
    path = tmp_path / 'scenario.json'
    path.write_text(json.dumps({
        'env_initial': {'t_celsius': 25.0, 'g': 1000.0},
        'config': {'policy': 'fixed', 'step': 0.01},
    }), encoding='utf-8')
    code, _, err = run_cli(capsys, 'run', '--scenario', str(path))
    assert code == 3
    assert 'env_final' in err


def test_run_needs_environments(capsys):
    code, _, err = run_cli(capsys, 'run', '--t0', '50')
    assert code == 1
    assert '--t1' in err


def test_usage_errors_exit_with_one(capsys):
    with pytest.raises(SystemExit) as info:
        main(['mpp', '--bogus'])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_tables_are_deterministic(capsys, tmp_path):
    first, second = tmp_path / 'first', tmp_path / 'second'
    assert run_cli(capsys, 'tables', '--out', str(first))[0] == 0
    assert run_cli(capsys, 'tables', '--out', str(second), '--workers', '1')[0] == 0

    for name in ('table_1.csv', 'table_2.csv', 'table_3.csv'):
        content = (first / name).read_bytes()
        assert content == (second / name).read_bytes()
        lines = content.decode('utf-8').split('\n')
        assert lines[-1] == ''
        header = lines[0].split(',')
        rows = [dict(zip(header, line.split(','))) for line in lines[1:-1]]
        assert len(rows) == 4
        for row in rows:
            assert int(row['adaptive_iterations']) < int(row['fixed_iterations'])


def test_calibrate(capsys, tmp_path):
    path = tmp_path / 'params.json'
    code, _, _ = run_cli(capsys, 'calibrate', '--target-pmax', '217.54', '--temp', '25',
                         '--irradiance', '1000', '--out', str(path))
    assert code == 0
    calibrated = store.load_params(str(path))
    assert mpp_oracle(calibrated, NOMINAL_ENVIRONMENT).p_max == pytest.approx(217.54, rel=1e-3)


def test_calibrate_to_stdout(capsys):
    code, out, _ = run_cli(capsys, 'calibrate', '--target-pmax', '200')
    assert code == 0
    assert json.loads(out)['ns'] == 54


def test_calibrate_rejects_zero_target(capsys):
    code, _, err = run_cli(capsys, 'calibrate', '--target-pmax', '0')
    assert code == 3
    assert 'target_pmax' in err
