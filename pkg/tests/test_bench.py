import math

import pytest

from gridcalc.bench import WorkloadSpec, generate_workload, run_bench
from gridcalc.formula import parse_ref
from gridcalc.workbook import dump_workbook

R = parse_ref


def test_chain_shape():
    wb, _ = generate_workload(WorkloadSpec('chain', 3, 1))
    assert [wb.cells[r].formula for r in wb.order] == ['1', 'A1+1', 'A2+1']
    assert wb.value(R('A3')) == 3


def test_binary_tree_shape():
    wb, _ = generate_workload(WorkloadSpec('binary-tree', 7, 1))
    assert wb.value(R('A1')) == 4
    assert wb.cells[R('A1')].formula == 'A2+A3'


def test_grid_shape():
    wb, _ = generate_workload(WorkloadSpec('grid', 9, 1))
    # 3x3 grid of left+above sums from a single constant corner: binomial counts
    assert wb.value(R('C3')) == 6
    assert len(wb) == 9


def test_random_dag_is_deterministic():
    a, ops_a = generate_workload(WorkloadSpec('random-dag', 300, 50, seed=4))
    b, ops_b = generate_workload(WorkloadSpec('random-dag', 300, 50, seed=4))
    assert dump_workbook(a) == dump_workbook(b)
    assert ops_a == ops_b
    c, _ = generate_workload(WorkloadSpec('random-dag', 300, 50, seed=5))
    assert dump_workbook(a) != dump_workbook(c)


def test_trace_layout():
    wb, ops = generate_workload(WorkloadSpec('random-dag', 100, 20, seed=1))
    assert len(ops) == 40
    for write, read in zip(ops[::2], ops[1::2]):
        assert write[0] == 'set' and wb.cells[write[1]].is_constant
        assert read[0] == 'get' and read[1] in wb.cells


@pytest.mark.parametrize('kwargs', [
    dict(shape='ring', cell_count=10, edit_read_pairs=1),
    dict(shape='chain', cell_count=0, edit_read_pairs=1),
    dict(shape='chain', cell_count=10, edit_read_pairs=0),
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        WorkloadSpec(**kwargs)


def test_single_cell_all_modes_agree():
    report = run_bench(WorkloadSpec('chain', 1, 1), trials=2)
    reads = {mode: r.reads for mode, r in report.results.items()}
    assert reads['eager'] == reads['lazy'] == reads['compiled']
    assert report.completed


@pytest.mark.parametrize('shape', ['chain', 'binary-tree', 'grid', 'random-dag'])
def test_modes_agree_and_lazy_never_evaluates_more(shape):
    report = run_bench(WorkloadSpec(shape, 200, 30, seed=2), trials=2)
    eager, lazy, compiled = (report.results[m] for m in ('eager', 'lazy', 'compiled'))
    assert eager.reads == lazy.reads == compiled.reads
    for e, lz, c in zip(eager.evals, lazy.evals, compiled.evals):
        assert lz <= e and c <= e
    assert lazy.evals == compiled.evals


def test_counters_are_deterministic():
    spec = WorkloadSpec('random-dag', 150, 20, seed=9)
    a, b = run_bench(spec, trials=2), run_bench(spec, trials=2)
    for mode in a.results:
        assert a.results[mode].evals == b.results[mode].evals
        assert a.results[mode].recomputes == b.results[mode].recomputes


def test_report_output():
    report = run_bench(WorkloadSpec('chain', 20, 5), trials=3)
    table = report.table().splitlines()
    assert table[0].split() == ['mode', 'avg_ms', 'stddev_ms', 'evals', 'recomputes']
    assert [line.split()[0] for line in table[1:]] == ['eager', 'lazy', 'compiled']
    rows = report.csv().splitlines()
    assert rows[0] == 'mode,avg_ms,stddev_ms,evals,recomputes'
    assert len(rows) == 4
    for r in report.results.values():
        assert len(r.times_ms) == 3
        assert math.isfinite(r.avg_ms) and math.isfinite(r.stddev_ms)


def test_budget_stops_early():
    report = run_bench(WorkloadSpec('chain', 2000, 200), ['eager'], trials=5, budget_s=0.2)
    assert not report.completed
    done, ms, evals = report.results['eager'].partial
    assert 0 < done < 400
    assert 'time budget exhausted' in report.table()


def test_run_bench_validation():
    with pytest.raises(ValueError):
        run_bench(WorkloadSpec('chain', 5, 1), ['fast'])
    with pytest.raises(ValueError):
        run_bench(WorkloadSpec('chain', 5, 1), trials=0)
