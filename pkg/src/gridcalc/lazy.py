"""Deferred recomputation with on-demand cell discovery.

A :class:`LazyRegistry` only knows about cells that the caller has touched
plus everything below them.  Touching a cell discovers its descendants and
records, on each child, which parents have been seen so far.  Writing a
constant marks the discovered ancestors dirty; reading a dirty cell
recomputes it (and any dirty cells under it) and caches the result.

The registry is single-owner mutable state: do not share one between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .compiler import exec_program
from .errors import CircularReference, NotConstant, UnknownCell
from .formula import CellRef, evaluate


@dataclass(slots=True)
class LazyCellState:
    ref: CellRef
    val: Optional[float] = None
    dirty: bool = True
    discovered_ancestors: set = field(default_factory=set)


class _WorkbookSource:
    def __init__(self, wb):
        self.cells = wb.cells

    def __contains__(self, ref):
        return ref in self.cells

    def children(self, ref):
        return self.cells[ref].children

    def compute(self, ref, env):
        return evaluate(self.cells[ref].ast, env)


class _PlanSource:
    # Works from compiled programs only; no formula text is available here.
    def __init__(self, plan):
        self.programs = plan.programs

    def __contains__(self, ref):
        return ref in self.programs

    def children(self, ref):
        return self.programs[ref].children

    def compute(self, ref, env):
        return exec_program(self.programs[ref], env)


class LazyRegistry:
    """Registry of discovered cells over a workbook or a compiled plan.

    ``evaluations`` counts formula evaluations performed by :meth:`get_value`.
    """

    def __init__(self, source):
        self._source = source
        self.states: dict[CellRef, LazyCellState] = {}
        self.evaluations = 0

    @classmethod
    def from_workbook(cls, wb) -> 'LazyRegistry':
        return cls(_WorkbookSource(wb))

    @classmethod
    def from_plan(cls, plan) -> 'LazyRegistry':
        return cls(_PlanSource(plan))

    def __contains__(self, ref):
        return ref in self.states

    @property
    def discovered(self):
        return self.states.keys()

    def get_cell(self, ref: CellRef) -> LazyCellState:
        """Return the state for ``ref``, discovering it and its descendants if new."""
        state = self.states.get(ref)
        if state is not None:
            return state
        if ref not in self._source:
            raise UnknownCell(ref)
        states = self.states
        children = self._source.children
        state = states[ref] = LazyCellState(ref)
        stack = [ref]
        while stack:
            parent = stack.pop()
            for child in children(parent):
                child_state = states.get(child)
                if child_state is None:
                    child_state = states[child] = LazyCellState(child)
                    stack.append(child)
                child_state.discovered_ancestors.add(parent)
        return state

    def set_value(self, ref: CellRef, value: float) -> None:
        if ref not in self._source:
            raise UnknownCell(ref)
        if self._source.children(ref):
            raise NotConstant(ref)
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f'cell values must be finite, got {value!r}')
        state = self.get_cell(ref)
        state.val = value
        state.dirty = False
        states = self.states
        stack = list(state.discovered_ancestors)
        while stack:
            ancestor = states[stack.pop()]
            # an already-dirty cell's discovered ancestors are dirty too
            if ancestor.dirty:
                continue
            ancestor.dirty = True
            stack.extend(ancestor.discovered_ancestors)

    def get_value(self, ref: CellRef) -> float:
        state = self.get_cell(ref)
        if not state.dirty:
            return state.val
        states = self.states
        children = self._source.children
        compute = self._source.compute
        on_path = set()
        # entries are (ref, None) to expand, or (ref, children) once expanded
        stack = [(ref, None)]
        pop = stack.pop
        push = stack.append
        while stack:
            current, kids = pop()
            st = states[current]
            if not st.dirty:
                continue
            if kids is not None:
                st.val = compute(current, {c: states[c].val for c in kids})
                st.dirty = False
                self.evaluations += 1
                on_path.discard(current)
                continue
            if current in on_path:
                raise CircularReference(_path_cycle(stack, current))
            on_path.add(current)
            kids = children(current)
            push((current, kids))
            for child in reversed(kids):
                if states[child].dirty:
                    push((child, None))
        return state.val


def _path_cycle(stack, ref):
    # cells still awaiting evaluation, outermost first, from ref's first entry
    path = [r for r, kids in stack if kids is not None]
    return path[path.index(ref):] if ref in path else [ref]
