"""Synthetic workloads and a timing harness comparing the recompute modes.

Modes:

``eager``
    interpreted mode: every write recomputes all dependents through
    parser strings (:mod:`gridcalc.eager`).
``lazy``
    dirty-flag registry evaluating workbook ASTs.
``compiled``
    dirty-flag registry evaluating a compiled plan's stack programs.

Every trial replays the same operation trace from the same initial state.
The first trial is a warm-up and is discarded.
"""

from __future__ import annotations

import csv
import io
import math
import random
import statistics
import time
from dataclasses import dataclass, field

from .compiler import compile_plan, load_plan, save_plan
from .eager import EagerEngine
from .formula import CellRef
from .lazy import LazyRegistry
from .workbook import Workbook, build_workbook, make_cell

SHAPES = ('chain', 'binary-tree', 'grid', 'random-dag')
MODES = ('eager', 'lazy', 'compiled')


@dataclass(frozen=True)
class WorkloadSpec:
    shape: str
    cell_count: int
    edit_read_pairs: int
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f'unknown shape {self.shape!r}; expected one of {", ".join(SHAPES)}')
        if self.cell_count < 1 or self.edit_read_pairs < 1:
            raise ValueError('cell_count and edit_read_pairs must be positive')


def _chain(n, rng):
    cells = [make_cell(CellRef('A', 1), '1')]
    cells += [make_cell(CellRef('A', i), f'A{i - 1}+1') for i in range(2, n + 1)]
    return cells


def _binary_tree(n, rng):
    # heap layout: node i lives in A<i>, its children are nodes 2i and 2i+1
    cells = []
    for i in range(1, n + 1):
        kids = [f'A{k}' for k in (2 * i, 2 * i + 1) if k <= n]
        cells.append(make_cell(CellRef('A', i), '+'.join(kids) if kids else '1'))
    return cells


def _grid(n, rng):
    width = math.isqrt(n - 1) + 1 if n > 1 else 1
    cells = []
    for k in range(n):
        row, col = divmod(k, width)
        row += 1
        col += 1
        terms = []
        if col > 1:
            terms.append(str(CellRef.at(col - 1, row)))
        if row > 1:
            terms.append(str(CellRef.at(col, row - 1)))
        cells.append(make_cell(CellRef.at(col, row), '+'.join(terms) if terms else '1'))
    return cells


def _random_dag(n, rng):
    constants = max(1, n // 10)
    cells = []
    for i in range(1, n + 1):
        if i <= constants:
            formula = str(rng.randint(1, 9))
        else:
            picks = rng.sample(range(1, i), min(i - 1, rng.randint(1, 3)))
            formula = '+'.join(f'A{p}' for p in picks)
        cells.append(make_cell(CellRef('A', i), formula))
    return cells


_BUILDERS = {'chain': _chain, 'binary-tree': _binary_tree, 'grid': _grid, 'random-dag': _random_dag}


def generate_workload(spec: WorkloadSpec) -> tuple[Workbook, list]:
    """Build the workbook and its operation trace.

    Each edit/read pair writes a random integer into a random constant cell,
    then reads a random cell.  Operations are ``('set', ref, value)`` and
    ``('get', ref)``.
    """
    rng = random.Random(spec.seed)
    wb = build_workbook(f'{spec.shape}-{spec.cell_count}', _BUILDERS[spec.shape](spec.cell_count, rng))
    constants = [ref for ref in wb.order if wb.cells[ref].is_constant]
    ops = []
    for _ in range(spec.edit_read_pairs):
        ops.append(('set', rng.choice(constants), float(rng.randint(0, 99))))
        ops.append(('get', rng.choice(wb.order)))
    return wb, ops


@dataclass
class ModeResult:
    mode: str
    times_ms: list = field(default_factory=list)  # timed trials only
    evals: list = field(default_factory=list)
    recomputes: list = field(default_factory=list)
    reads: list = field(default_factory=list)  # values read in the first timed trial
    # progress of a trial cut short by the time budget: (ops done, ms, evals)
    partial: tuple | None = None

    @property
    def avg_ms(self) -> float:
        return statistics.fmean(self.times_ms) if self.times_ms else math.nan

    @property
    def stddev_ms(self) -> float:
        # sample standard deviation (n - 1 denominator)
        return statistics.stdev(self.times_ms) if len(self.times_ms) > 1 else math.nan


@dataclass
class BenchReport:
    spec: WorkloadSpec
    trials: int
    results: dict = field(default_factory=dict)  # mode -> ModeResult
    completed: bool = True
    elapsed_s: float = 0.0

    def table(self) -> str:
        header = ('mode', 'avg_ms', 'stddev_ms', 'evals', 'recomputes')
        rows = [header]
        for r in self.results.values():
            rows.append((r.mode, f'{r.avg_ms:.3f}', f'{r.stddev_ms:.3f}',
                         str(r.evals[0] if r.evals else ''), str(r.recomputes[0] if r.recomputes else '')))
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        lines = ['  '.join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))
                 for row in rows]
        if not self.completed:
            lines.append(f'(stopped early after {self.elapsed_s:.1f} s: time budget exhausted)')
            for r in self.results.values():
                if r.partial is not None:
                    done, ms, evals = r.partial
                    lines.append(f'({r.mode}: interrupted trial reached {done} ops in {ms:.0f} ms, {evals} evals)')
        return '\n'.join(lines)

    def csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(['mode', 'avg_ms', 'stddev_ms', 'evals', 'recomputes'])
        for r in self.results.values():
            writer.writerow([r.mode, f'{r.avg_ms:.3f}', f'{r.stddev_ms:.3f}',
                             r.evals[0] if r.evals else '', r.recomputes[0] if r.recomputes else ''])
        return buf.getvalue()


class _OutOfTime(Exception):
    def __init__(self, done, elapsed, evals):
        super().__init__(done, elapsed, evals)
        self.done, self.elapsed, self.evals = done, elapsed, evals


def _replay_eager(wb, ops, deadline):
    engine = EagerEngine(wb)
    reads = []
    start = time.perf_counter()
    for done, op in enumerate(ops):
        now = time.perf_counter()
        if now > deadline:
            raise _OutOfTime(done, now - start, engine.evaluations)
        if op[0] == 'set':
            engine.set_value(op[1], op[2])
        else:
            reads.append(engine.get_value(op[1]))
    elapsed = time.perf_counter() - start
    return elapsed, engine.evaluations, engine.recomputed, reads


def _replay_lazy(registry, ops, deadline):
    reads = []
    start = time.perf_counter()
    for done, op in enumerate(ops):
        now = time.perf_counter()
        if now > deadline:
            raise _OutOfTime(done, now - start, registry.evaluations)
        if op[0] == 'set':
            registry.set_value(op[1], op[2])
        else:
            reads.append(registry.get_value(op[1]))
    elapsed = time.perf_counter() - start
    # each lazy evaluation recomputes exactly one cell
    return elapsed, registry.evaluations, registry.evaluations, reads


def run_bench(spec: WorkloadSpec, modes=MODES, trials: int = 10, *, warmup: int = 1,
              budget_s: float | None = None, workload=None) -> BenchReport:
    """Time each mode over ``trials`` replays after ``warmup`` discarded ones.

    With ``budget_s`` set, measurement stops once the wall-clock budget is
    spent and the report is marked incomplete.
    """
    if trials < 1:
        raise ValueError('trials must be positive')
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f'unknown mode {mode!r}')
    wb, ops = workload if workload is not None else generate_workload(spec)
    # plan serialization round trip happens outside the timed section
    plan = load_plan(save_plan(compile_plan(wb))) if 'compiled' in modes else None

    report = BenchReport(spec, trials)
    began = time.perf_counter()
    deadline = began + budget_s if budget_s is not None else math.inf
    try:
        for mode in modes:
            result = report.results[mode] = ModeResult(mode)
            for trial in range(warmup + trials):
                if mode == 'eager':
                    elapsed, evals, recomputes, reads = _replay_eager(wb, ops, deadline)
                elif mode == 'lazy':
                    elapsed, evals, recomputes, reads = _replay_lazy(LazyRegistry.from_workbook(wb), ops, deadline)
                else:
                    elapsed, evals, recomputes, reads = _replay_lazy(LazyRegistry.from_plan(plan), ops, deadline)
                if trial < warmup:
                    continue
                result.times_ms.append(elapsed * 1000.0)
                result.evals.append(evals)
                result.recomputes.append(recomputes)
                if trial == warmup:
                    result.reads = reads
    except _OutOfTime as stop:
        result.partial = (stop.done, stop.elapsed * 1000.0, stop.evals)
        report.completed = False
    report.elapsed_s = time.perf_counter() - began
    return report
