"""Interpreted mode: recompute every dependent as soon as a constant changes.

Each dependent is evaluated by walking its call tree left to right in
post-order and emitting one ``REF=FORMULA;`` assignment per visited cell.
The resulting parser string is then executed by the formula interpreter,
assignment by assignment, in a fresh environment.  For E1 of the sample
workbook after ``A1 <- 2`` the string is::

    A1=2;B1=1+A1;A1=2;D1=10;C1=A1+D1;E1=B1+C1;

Repeated assignments (the second ``A1=2;``) are expected and harmless.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .depgraph import DependencySet, build_call_tree, dependency_set
from .errors import FormulaSyntaxError, MalformedRef
from .formula import CellRef, evaluate, format_number, parse_formula, parse_ref
from .workbook import Workbook, set_constant


@dataclass(frozen=True)
class ParserString:
    text: str

    def __str__(self):
        return self.text

    def segments(self) -> list[str]:
        """Assignments without their trailing ``;``."""
        if not self.text:
            return []
        if not self.text.endswith(';'):
            raise FormulaSyntaxError("parser string must end with ';'", len(self.text), self.text)
        return self.text[:-1].split(';')

    def history(self) -> list[str]:
        """The string after each append, in order."""
        out = []
        prefix = ''
        for seg in self.segments():
            prefix += seg + ';'
            out.append(prefix)
        return out


class _Cut:
    """Membership test for cells whose stored value is used as is."""

    __slots__ = ('members', 'fresh')

    def __init__(self, members, fresh):
        self.members = members
        self.fresh = fresh

    def __contains__(self, ref):
        return ref not in self.members or ref in self.fresh


def build_parser_string(wb: Workbook, root: CellRef, dep_set: DependencySet, changed=frozenset(),
                        *, fresh=frozenset(), values=None) -> ParserString:
    """Emit the post-order assignment string that evaluates ``root``.

    Members of ``dep_set`` are expanded through their formulas.  Every other
    cell, and every cell in ``fresh``, is emitted as a constant holding its
    stored value (``values`` if given, else the workbook's).  The root is
    always emitted with its own formula.
    """
    if values is None:
        values = wb.values
    changed = frozenset(changed)
    tree = build_call_tree(wb, root, cut=_Cut(dep_set.members, fresh), changed=changed)
    cells = wb.cells
    parts = []
    for node in tree.postorder():
        if node.expanded:
            parts.append(f'{node.ref}={cells[node.ref].formula};')
        else:
            parts.append(f'{node.ref}={format_number(values[node.ref])};')
    return ParserString(''.join(parts))


def eval_parser_string(ps: ParserString | str) -> dict:
    """Run the assignments left to right; later assignments overwrite earlier ones."""
    if isinstance(ps, str):
        ps = ParserString(ps)
    env = {}
    for seg in ps.segments():
        lhs, eq, body = seg.partition('=')
        if not eq:
            raise FormulaSyntaxError(f'assignment without "=": {seg!r}', None, ps.text)
        try:
            ref = parse_ref(lhs.strip())
        except MalformedRef as exc:
            raise FormulaSyntaxError(str(exc), None, ps.text) from None
        env[ref] = evaluate(parse_formula(body), env)
    return env


@dataclass
class RecomputeReport:
    changed_cells: dict = field(default_factory=dict)  # ref -> (old, new)
    recompute_count: int = 0
    evaluations: int = 0  # parser-string assignments executed

    def differing(self) -> dict:
        return {r: ov for r, ov in self.changed_cells.items() if ov[0] != ov[1]}


def set_and_recompute(wb: Workbook, ref: CellRef, value: float) -> tuple[Workbook, RecomputeReport]:
    """Set a constant cell and bring every dependent up to date.

    Dependents are recomputed in topological order, so each one's string
    reuses the fresh values of dependents already done in this pass.
    """
    old_origin = wb.value(ref)
    wb = set_constant(wb, ref, value)
    deps, _ = dependency_set(wb, {ref})
    changed = frozenset((ref,))
    values = dict(wb.values)
    report = RecomputeReport()
    report.changed_cells[ref] = (old_origin, values[ref])
    report.recompute_count = 1
    report.evaluations = 1
    members = deps.members
    done = set()
    for member in wb.topo:
        if member not in members:
            continue
        ps = build_parser_string(wb, member, deps, changed, fresh=done, values=values)
        env = eval_parser_string(ps)
        report.changed_cells[member] = (values[member], env[member])
        values[member] = env[member]
        done.add(member)
        report.recompute_count += 1
        report.evaluations += ps.text.count(';')
    return replace(wb, values=values), report


class EagerEngine:
    """Mutable holder around :func:`set_and_recompute` with running counters."""

    def __init__(self, wb: Workbook):
        self.workbook = wb
        self.evaluations = 0
        self.recomputed = 0
        self.last_report = None

    def set_value(self, ref: CellRef, value: float) -> RecomputeReport:
        self.workbook, report = set_and_recompute(self.workbook, ref, value)
        self.evaluations += report.evaluations
        self.recomputed += report.recompute_count
        self.last_report = report
        return report

    def get_value(self, ref: CellRef) -> float:
        return self.workbook.value(ref)
