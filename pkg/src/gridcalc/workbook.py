"""Workbook data model, XML ingestion and the acyclicity check.

A workbook file looks like::

    <workbook name="fig1">
      <cell ref="A1" formula="1"/>
      <cell ref="B1" formula="1+A1"/>
    </workbook>

Formulas carry no leading ``=``.  Each cell's children are the cells its
formula references; the reverse (parents) index is built once at load time.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping
from xml.sax.saxutils import quoteattr

from .errors import (
    CircularReference,
    DanglingRef,
    DuplicateCell,
    EvalError,
    FormulaSyntaxError,
    MalformedRef,
    NotConstant,
    UnknownCell,
    XmlError,
)
from .formula import CellRef, NumberLiteral, evaluate, extract_children, format_number, parse_formula, parse_ref


@dataclass(frozen=True, slots=True)
class Cell:
    ref: CellRef
    formula: str
    ast: object
    children: tuple  # distinct referenced cells, first-occurrence order

    @property
    def is_constant(self) -> bool:
        return not self.children


def make_cell(ref: CellRef, formula: str) -> Cell:
    try:
        ast = parse_formula(formula)
    except FormulaSyntaxError as exc:
        exc.cell = ref
        raise
    return Cell(ref, formula, ast, tuple(dict.fromkeys(extract_children(ast))))


@dataclass(frozen=True)
class Workbook:
    """An admissible workbook.  Treat every mapping here as read-only.

    ``values`` caches the current value of every cell.  After
    :func:`set_constant` only the edited cell's entry is fresh; the engines
    bring dependents up to date.
    """

    name: str
    cells: Mapping[CellRef, Cell]
    parents: Mapping[CellRef, frozenset]
    order: tuple  # row-major
    topo: tuple  # children before parents
    values: Mapping[CellRef, float] = field(repr=False)

    def __len__(self):
        return len(self.cells)

    def __contains__(self, ref):
        return ref in self.cells

    def cell(self, ref: CellRef) -> Cell:
        try:
            return self.cells[ref]
        except KeyError:
            raise UnknownCell(ref) from None

    def value(self, ref: CellRef) -> float:
        try:
            return self.values[ref]
        except KeyError:
            raise UnknownCell(ref) from None

    @property
    def edge_count(self) -> int:
        return sum(len(c.children) for c in self.cells.values())


def _sort_key(ref):
    return (ref.row, len(ref.column), ref.column)


def _topological_order(cells: Mapping[CellRef, Cell], parents: Mapping[CellRef, Iterable]) -> list:
    """Layered Kahn's algorithm; raises CircularReference.

    Each layer holds the cells whose children all sit in earlier layers and
    is emitted in row-major order, so every constant comes first.
    """
    pending = {ref: len(cell.children) for ref, cell in cells.items()}
    layer = [ref for ref, n in pending.items() if n == 0]
    order = []
    while layer:
        layer.sort(key=_sort_key)
        order.extend(layer)
        nxt = []
        for ref in layer:
            for parent in parents.get(ref, ()):
                pending[parent] -= 1
                if pending[parent] == 0:
                    nxt.append(parent)
        layer = nxt
    if len(order) != len(cells):
        raise CircularReference(_find_cycle(cells, {r for r, n in pending.items() if n > 0}))
    return order


def _find_cycle(cells, stuck) -> list:
    # Every stuck cell has at least one stuck child, so walking stuck children
    # from any stuck cell must revisit a cell.
    ref = min(stuck, key=_sort_key)
    path = []
    seen = {}
    while ref not in seen:
        seen[ref] = len(path)
        path.append(ref)
        ref = next(c for c in cells[ref].children if c in stuck)
    return path[seen[ref]:]


def build_workbook(name: str, cells: Iterable[Cell]) -> Workbook:
    """Link cells into a workbook: check references, acyclicity, compute values."""
    table = {}
    for cell in cells:
        if cell.ref in table:
            raise DuplicateCell(cell.ref)
        table[cell.ref] = cell
    parents = {ref: set() for ref in table}
    for ref in sorted(table, key=_sort_key):
        for child in table[ref].children:
            if child not in parents:
                raise DanglingRef(ref, child)
            parents[child].add(ref)
    frozen = {ref: frozenset(ps) for ref, ps in parents.items()}
    topo = _topological_order(table, frozen)
    values = {}
    for ref in topo:
        try:
            values[ref] = evaluate(table[ref].ast, values)
        except EvalError as exc:
            raise EvalError(f'cell {ref}: {exc}') from None
    order = tuple(sorted(table, key=_sort_key))
    return Workbook(name, {r: table[r] for r in order}, frozen, order, tuple(topo), values)


def validate_acyclic(wb: Workbook) -> list:
    """Topological order of all cells, every cell after its children."""
    return _topological_order(wb.cells, wb.parents)


def load_workbook(xml_bytes: bytes) -> Workbook:
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise XmlError(f'malformed XML: {exc}') from None
    if root.tag != 'workbook':
        raise XmlError(f'root element must be <workbook>, found <{root.tag}>')
    extra = set(root.attrib) - {'name'}
    if extra:
        raise XmlError(f'unexpected workbook attribute(s): {", ".join(sorted(extra))}')
    if (root.text or '').strip():
        raise XmlError('unexpected text inside <workbook>')
    cells = []
    for elem in root:
        if elem.tag != 'cell':
            raise XmlError(f'unexpected element <{elem.tag}>')
        if list(elem.attrib) != ['ref', 'formula']:
            raise XmlError(f'<cell> needs exactly the attributes ref, formula in that order; got {list(elem.attrib)}')
        if len(elem) or (elem.text or '').strip() or (elem.tail or '').strip():
            raise XmlError(f'<cell ref={elem.get("ref")!r}> must be an empty element')
        try:
            ref = parse_ref(elem.get('ref'))
        except MalformedRef as exc:
            raise XmlError(str(exc)) from None
        cells.append(make_cell(ref, elem.get('formula')))
    return build_workbook(root.get('name', ''), cells)


def dump_workbook(wb: Workbook) -> bytes:
    lines = [f'<workbook name={quoteattr(wb.name)}>']
    for ref in wb.order:
        lines.append(f'  <cell ref="{ref}" formula={quoteattr(wb.cells[ref].formula)}/>')
    lines.append('</workbook>\n')
    return '\n'.join(lines).encode('utf-8')


def set_constant(wb: Workbook, ref: CellRef, value: float) -> Workbook:
    """Replace a constant cell's formula with the literal ``value``.

    Only the edited cell's cached value is updated.
    """
    cell = wb.cell(ref)
    if not cell.is_constant:
        raise NotConstant(ref)
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f'cell values must be finite, got {value!r}')
    cells = dict(wb.cells)
    cells[ref] = Cell(ref, format_number(value), NumberLiteral(value), ())
    values = dict(wb.values)
    values[ref] = value
    return replace(wb, cells=cells, values=values)


def recompute_all(wb: Workbook) -> Workbook:
    """Re-evaluate every cell in topological order."""
    values = {}
    for ref in wb.topo:
        values[ref] = evaluate(wb.cells[ref].ast, values)
    return replace(wb, values=values)
