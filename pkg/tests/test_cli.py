import io
import random
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from gridcalc.cli import cmd_repl, build_parser, main

from conftest import data_path
from oracles import random_workbook, scan_refs, to_xml

FIG1 = str(data_path('fig1.xml'))


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_check():
    assert run('check', FIG1) == (0, '6 cells, 6 edges, ACYCLIC\n')


@pytest.mark.parametrize('name, witness', [('cycle2.xml', 'A1\nB1\nA1\n'), ('selfloop.xml', 'A1\nA1\n')])
def test_check_cycle(name, witness, capsys):
    code, out = run('check', str(data_path(name)))
    assert code == 1
    assert out == witness
    assert 'circular reference' in capsys.readouterr().err


def test_missing_file(capsys):
    code, _ = run('check', '/nonexistent/book.xml')
    assert code == 2
    assert 'cannot read' in capsys.readouterr().err


@pytest.mark.parametrize('ref, expected', [('A1', 'B1\nC1\nE1\nF1\n'), ('F1', ''), ('D1', 'C1\nE1\nF1\n')])
def test_deps(ref, expected):
    assert run('deps', FIG1, ref) == (0, expected)


def test_deps_unknown_cell():
    assert run('deps', FIG1, 'Z9')[0] == 1


@pytest.mark.parametrize('mode', ['eager', 'lazy', 'compiled'])
@pytest.mark.parametrize('args, expected', [(['E1', '--set', 'A1=2'], '15\n'), (['E1'], '13\n'),
                                            (['F1', '--set', 'A1=2'], '12\n')])
def test_eval(mode, args, expected):
    assert run('eval', FIG1, *args, '--mode', mode) == (0, expected)


def test_eval_sets_apply_in_order():
    assert run('eval', FIG1, 'E1', '--set', 'A1=2', '--set', 'A1=5', '--set', 'D1=0')[1] == '11\n'


def test_eval_errors(capsys):
    assert run('eval', FIG1, 'Z9')[0] == 1
    assert run('eval', FIG1, 'E1', '--set', 'E1=3')[0] == 1
    assert run('eval', FIG1, 'E1', '--plan', 'x.plan')[0] == 2


@pytest.mark.parametrize('argv', [
    ['eval', FIG1, 'e1'], ['eval', FIG1, 'E1', '--set', 'A1'], ['eval', FIG1, 'E1', '--set', 'A1=x'],
    ['eval', FIG1, 'E1', '--set', 'A1=nan'], ['eval', FIG1, 'E1', '--mode', 'fast'], ['frobnicate'], [],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv, out=io.StringIO())
    assert info.value.code == 2


def test_trace():
    assert run('trace', FIG1, 'E1', '--set', 'A1=2') == (0, 'A1=2;B1=1+A1;A1=2;D1=10;C1=A1+D1;E1=B1+C1;\n')
    assert run('trace', FIG1, 'D1') == (0, 'D1=10;\n')
    assert run('trace', FIG1, 'F1', '--set', 'A1=2') == (0, 'A1=2;D1=10;C1=A1+D1;F1=C1;\n')
    assert run('trace', FIG1, 'Z9')[0] == 1


def test_trace_history():
    code, out = run('trace', FIG1, 'E1', '--set', 'A1=2', '--history')
    assert code == 0
    assert out.splitlines() == [
        'A1=2;',
        'A1=2;B1=1+A1;',
        'A1=2;B1=1+A1;A1=2;',
        'A1=2;B1=1+A1;A1=2;D1=10;',
        'A1=2;B1=1+A1;A1=2;D1=10;C1=A1+D1;',
        'A1=2;B1=1+A1;A1=2;D1=10;C1=A1+D1;E1=B1+C1;',
    ]


def test_compile_and_eval_from_plan(tmp_path):
    plan = tmp_path / 'fig1.plan'
    code, out = run('compile', FIG1, '-o', str(plan))
    assert code == 0 and 'compiled 6 cells' in out
    data = plan.read_bytes()
    assert data.startswith(b'GRIDPLAN 1\n')
    assert data.count(b'\nCELL ') == 6
    assert data == data_path('fig1.plan').read_bytes()
    # the workbook argument is not read when a plan is given
    assert run('eval', str(tmp_path / 'absent.xml'), 'E1', '--set', 'A1=2', '--mode', 'compiled',
               '--plan', str(plan)) == (0, '15\n')


def test_compile_unwritable_output():
    assert run('compile', FIG1, '-o', '/nonexistent/dir/out.plan')[0] == 2


def test_corrupt_plan_is_domain_error(tmp_path):
    plan = tmp_path / 'bad.plan'
    plan.write_bytes(b'GRIDPLAN 9\nEND\n')
    assert run('eval', FIG1, 'E1', '--mode', 'compiled', '--plan', str(plan))[0] == 1


def test_bench_table_and_csv():
    code, out = run('bench', '--shape', 'chain', '--cells', '50', '--pairs', '5', '--trials', '2')
    assert code == 0
    assert [line.split()[0] for line in out.splitlines()] == ['mode', 'eager', 'lazy', 'compiled']
    code, out = run('bench', '--cells', '50', '--pairs', '5', '--trials', '2', '--modes', 'lazy', '--csv')
    assert code == 0
    assert out.splitlines()[0] == 'mode,avg_ms,stddev_ms,evals,recomputes'
    assert out.splitlines()[1].startswith('lazy,')


@pytest.mark.parametrize('argv', [
    ['bench', '--modes', 'eager,warp'], ['bench', '--cells', '0'], ['bench', '--trials', '1'],
])
def test_bench_usage_errors(argv):
    assert run(*argv)[0] == 2


def repl(script, path=FIG1):
    out = io.StringIO()
    cmd_repl(build_parser().parse_args(['repl', path]), out, io.StringIO(script))
    return out.getvalue().splitlines()


def test_repl_session():
    assert repl('set A1 2\nget E1\nquit\nget E1\n') == ['15']


def test_repl_errors_continue():
    lines = repl('get Z9\nset E1 4\nset A1 x\nbogus\nget E1\n')
    assert lines[0] == 'error: unknown cell Z9'
    assert lines[1].startswith('error: ') and 'constant' in lines[1]
    assert lines[2].startswith('error: ')
    assert lines[3].startswith('error: ')
    assert lines[4] == '13'


def test_repl_changed_deps_check():
    lines = repl('changed\nset A1 2\nchanged\ndeps D1\ncheck E1\n')
    assert lines[0] == 'no writes yet'
    assert lines[1:6] == ['A1 1 -> 2  *', 'B1 2 -> 3  *', 'C1 11 -> 12  *', 'E1 13 -> 15  *', 'F1 11 -> 12  *']
    assert lines[6:9] == ['C1', 'E1', 'F1']
    assert lines[9] == 'ok 15'


def test_module_entry_point():
    proc = subprocess.run([sys.executable, '-m', 'gridcalc', 'eval', FIG1, 'E1', '--set', 'A1=2'],
                          capture_output=True, text=True)
    assert (proc.returncode, proc.stdout) == (0, '15\n')
    proc = subprocess.run([sys.executable, '-m', 'gridcalc', 'repl', FIG1], input='set A1 2\nget E1\n',
                          capture_output=True, text=True)
    assert proc.stdout == '15\n'


@pytest.fixture(scope='module')
def scratch(tmp_path_factory):
    return tmp_path_factory.mktemp('books')


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.booleans())
def test_eval_output_identical_across_modes(scratch, seed, n, floats):
    rng = random.Random(seed)
    formulas = random_workbook(rng, n, floats=floats)
    path = scratch / f'{seed}.xml'
    path.write_bytes(to_xml('r', formulas))
    constants = [name for name, f in formulas.items() if not scan_refs(f)]
    sets = []
    for _ in range(rng.randint(0, 4)):
        sets += ['--set', f'{rng.choice(constants)}={rng.randint(-9, 9)}']
    target = rng.choice(list(formulas))
    outputs = {run('eval', str(path), target, *sets, '--mode', mode) for mode in ('eager', 'lazy', 'compiled')}
    assert len(outputs) == 1
    assert next(iter(outputs))[0] == 0
