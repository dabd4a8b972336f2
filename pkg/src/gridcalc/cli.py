"""Command-line interface.

Exit status: 0 on success, 1 on domain errors (circular reference, unknown
cell, bad formula, ...), 2 on usage errors (bad arguments, unreadable files).
"""

from __future__ import annotations

import argparse
import math
import sys

from .bench import MODES, SHAPES, WorkloadSpec, run_bench
from .compiler import compile_plan, load_plan, save_plan
from .depgraph import DependencySet, dependency_set
from .eager import EagerEngine, build_parser_string
from .errors import CircularReference, GridError, MalformedRef
from .formula import format_number, parse_ref, row_major
from .lazy import LazyRegistry
from .workbook import load_workbook, set_constant


class UsageError(Exception):
    pass


def _ref_arg(text):
    try:
        return parse_ref(text)
    except MalformedRef:
        raise argparse.ArgumentTypeError(f'malformed cell reference {text!r}') from None


def _assignment_arg(text):
    ref, eq, value = text.partition('=')
    if not eq:
        raise argparse.ArgumentTypeError(f'expected REF=VALUE, got {text!r}')
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'not a number: {value!r}') from None
    if not math.isfinite(number):
        raise argparse.ArgumentTypeError(f'value must be finite: {value!r}')
    return _ref_arg(ref.strip()), number


def _read(path):
    try:
        with open(path, 'rb') as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f'cannot read {path}: {exc.strerror}') from None


def _load(path):
    return load_workbook(_read(path))


def cmd_check(args, out):
    try:
        wb = _load(args.file)
    except CircularReference as exc:
        for ref in exc.cycle + exc.cycle[:1]:
            print(ref, file=out)
        raise
    print(f'{len(wb)} cells, {wb.edge_count} edges, ACYCLIC', file=out)


def cmd_deps(args, out):
    wb = _load(args.file)
    deps, _ = dependency_set(wb, {args.ref})
    for ref in deps.ordered():
        print(ref, file=out)


def cmd_eval(args, out):
    if args.plan and args.mode != 'compiled':
        raise UsageError('--plan only applies to --mode compiled')
    if args.mode == 'compiled' and args.plan:
        # evaluate from the plan alone; the workbook file is not consulted
        registry = LazyRegistry.from_plan(load_plan(_read(args.plan)))
    else:
        wb = _load(args.file)
        if args.mode == 'eager':
            engine = EagerEngine(wb)
            for ref, value in args.set:
                engine.set_value(ref, value)
            print(format_number(engine.get_value(args.ref)), file=out)
            return
        if args.mode == 'lazy':
            registry = LazyRegistry.from_workbook(wb)
        else:
            registry = LazyRegistry.from_plan(load_plan(save_plan(compile_plan(wb))))
    for ref, value in args.set:
        registry.set_value(ref, value)
    print(format_number(registry.get_value(args.ref)), file=out)


def cmd_trace(args, out):
    wb = _load(args.file)
    wb.cell(args.ref)
    changed = []
    for ref, value in args.set:
        wb = set_constant(wb, ref, value)
        changed.append(ref)
    if changed:
        deps, _ = dependency_set(wb, changed)
    else:
        deps = DependencySet(frozenset(), frozenset())
    ps = build_parser_string(wb, args.ref, deps, frozenset(changed))
    if args.history:
        for prefix in ps.history():
            print(prefix, file=out)
    else:
        print(ps, file=out)


def cmd_compile(args, out):
    wb = _load(args.file)
    plan = compile_plan(wb)
    data = save_plan(plan)
    try:
        with open(args.output, 'wb') as fh:
            fh.write(data)
    except OSError as exc:
        raise UsageError(f'cannot write {args.output}: {exc.strerror}') from None
    print(f'compiled {len(plan)} cells to {args.output}', file=out)


def cmd_bench(args, out):
    modes = [m.strip() for m in args.modes.split(',') if m.strip()]
    for mode in modes:
        if mode not in MODES:
            raise UsageError(f'unknown mode {mode!r}; choose from {", ".join(MODES)}')
    try:
        spec = WorkloadSpec(args.shape, args.cells, args.pairs, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.trials < 2:
        raise UsageError('--trials must be at least 2')
    report = run_bench(spec, modes, args.trials, budget_s=args.budget)
    print(report.csv() if args.csv else report.table(), file=out, end='' if args.csv else '\n')
    if not report.completed:
        return 1


REPL_HELP = """commands:
  set REF VALUE   write a constant cell
  get REF         read a cell (lazy mode)
  deps REF        list the cells depending on REF
  changed         show the cells touched by the last write
  check REF       compare the lazy value of REF against eager recomputation
  help            show this text
  quit            leave"""


def cmd_repl(args, out, inp=None):
    inp = inp if inp is not None else sys.stdin
    wb = _load(args.file)
    registry = LazyRegistry.from_workbook(wb)
    eager = EagerEngine(wb)
    interactive = inp.isatty() if hasattr(inp, 'isatty') else False
    while True:
        if interactive:
            print('> ', end='', file=out, flush=True)
        line = inp.readline()
        if not line:
            break
        words = line.split()
        if not words:
            continue
        cmd, rest = words[0].lower(), words[1:]
        try:
            if cmd in ('quit', 'exit'):
                break
            elif cmd == 'help':
                print(REPL_HELP, file=out)
            elif cmd == 'set' and len(rest) == 2:
                ref = parse_ref(rest[0])
                value = float(rest[1])
                registry.set_value(ref, value)
                eager.set_value(ref, value)
            elif cmd == 'get' and len(rest) == 1:
                print(format_number(registry.get_value(parse_ref(rest[0]))), file=out)
            elif cmd == 'deps' and len(rest) == 1:
                deps, _ = dependency_set(eager.workbook, {parse_ref(rest[0])})
                for ref in deps.ordered():
                    print(ref, file=out)
            elif cmd == 'changed' and not rest:
                report = eager.last_report
                if report is None:
                    print('no writes yet', file=out)
                    continue
                for ref in row_major(report.changed_cells):
                    old, new = report.changed_cells[ref]
                    mark = '' if old == new else '  *'
                    print(f'{ref} {format_number(old)} -> {format_number(new)}{mark}', file=out)
            elif cmd == 'check' and len(rest) == 1:
                ref = parse_ref(rest[0])
                lazy_value = registry.get_value(ref)
                eager_value = eager.get_value(ref)
                if lazy_value == eager_value:
                    print(f'ok {format_number(lazy_value)}', file=out)
                else:
                    print(f'MISMATCH lazy={format_number(lazy_value)} eager={format_number(eager_value)}', file=out)
            else:
                print(f'error: cannot parse {line.strip()!r}; type help', file=out)
        except (GridError, ValueError) as exc:
            print(f'error: {exc}', file=out)


def build_parser():
    parser = argparse.ArgumentParser(prog='gridcalc', description='Spreadsheet recomputation engine.')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('check', help='validate a workbook and report its size')
    p.add_argument('file')
    p.set_defaults(func=cmd_check)

    p = sub.add_parser('deps', help='list every cell that depends on REF')
    p.add_argument('file')
    p.add_argument('ref', type=_ref_arg)
    p.set_defaults(func=cmd_deps)

    p = sub.add_parser('eval', help='apply writes, then print the value of REF')
    p.add_argument('file')
    p.add_argument('ref', type=_ref_arg)
    p.add_argument('--set', action='append', default=[], type=_assignment_arg, metavar='REF=VALUE')
    p.add_argument('--mode', choices=MODES, default='eager')
    p.add_argument('--plan', help='compiled plan to evaluate from (compiled mode)')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('trace', help='print the parser string that recomputes REF')
    p.add_argument('file')
    p.add_argument('ref', type=_ref_arg)
    p.add_argument('--set', action='append', default=[], type=_assignment_arg, metavar='REF=VALUE')
    p.add_argument('--history', action='store_true', help='print the string after every append')
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser('compile', help='compile a workbook into a plan file')
    p.add_argument('file')
    p.add_argument('-o', '--output', required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser('bench', help='time the recompute modes on a synthetic workload')
    p.add_argument('--shape', choices=SHAPES, default='chain')
    p.add_argument('--cells', type=int, default=1000)
    p.add_argument('--pairs', type=int, default=100)
    p.add_argument('--modes', default=','.join(MODES))
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--trials', type=int, default=10)
    p.add_argument('--budget', type=float, default=None, help='stop after this many seconds')
    p.add_argument('--csv', action='store_true')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('repl', help='interactive what-if session')
    p.add_argument('file')
    p.set_defaults(func=cmd_repl)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out) or 0
    except UsageError as exc:
        print(f'gridcalc: {exc}', file=sys.stderr)
        return 2
    except GridError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
