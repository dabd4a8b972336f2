"""Dependency set generation and call-tree construction.

The dependency set of a group of changed cells is found breadth-first over
the reverse (parent) index: starting from the changed cells, each round
collects the direct dependents of the previous round until a round comes up
empty.  The union of all rounds after the first, minus the changed cells
themselves, is the set of cells whose values may have changed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnknownCell
from .formula import CellRef, iter_children, row_major
from .workbook import Workbook


@dataclass(frozen=True)
class FrontierTrace:
    """``rounds[0]`` is the changed set, ``rounds[-1]`` is empty."""

    rounds: tuple  # of row-major tuples of CellRef

    @property
    def depth(self) -> int:
        """Index of the final (empty) round; bounded by the cell count."""
        return len(self.rounds) - 1


@dataclass(frozen=True)
class DependencySet:
    members: frozenset
    origin: frozenset

    def __contains__(self, ref):
        return ref in self.members

    def __len__(self):
        return len(self.members)

    def ordered(self) -> list:
        return row_major(self.members)


def _check_known(wb: Workbook, refs):
    for ref in refs:
        if ref not in wb.cells:
            raise UnknownCell(ref)


def direct_dependents(wb: Workbook, cells) -> set:
    _check_known(wb, cells)
    out = set()
    for ref in cells:
        out.update(wb.parents[ref])
    return out


def dependency_set(wb: Workbook, changed) -> tuple[DependencySet, FrontierTrace]:
    changed = frozenset(changed)
    if not changed:
        raise ValueError('changed set must not be empty')
    _check_known(wb, changed)
    parents = wb.parents
    frontier = changed
    rounds = [tuple(row_major(frontier))]
    found = set()
    limit = len(wb.cells)
    while frontier:
        nxt = set()
        for ref in frontier:
            nxt.update(parents[ref])
        rounds.append(tuple(row_major(nxt)))
        found.update(nxt)
        frontier = nxt
        if len(rounds) - 1 > limit:
            # cannot happen on an acyclic workbook
            raise RuntimeError(f'dependency search exceeded {limit} rounds; graph has a cycle')
    return DependencySet(frozenset(found - changed), changed), FrontierTrace(tuple(rounds))


@dataclass
class CallNode:
    ref: CellRef
    children: list = field(default_factory=list)
    expanded: bool = True  # False for cut leaves whose stored value is reused

    def postorder(self):
        """Left-to-right post-order, iterative so deep chains do not recurse."""
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                yield node
                continue
            stack.append((node, True))
            for child in reversed(node.children):
                stack.append((child, False))


@dataclass
class CallTree:
    root: CallNode

    def postorder(self):
        return self.root.postorder()

    def size(self) -> int:
        return sum(1 for _ in self.postorder())


def build_call_tree(wb: Workbook, root: CellRef, cut=frozenset(), changed=frozenset()) -> CallTree:
    """Expand ``root`` through its formula references, one node per occurrence.

    Cells in ``cut`` and cells in ``changed`` become leaves: the former are
    read from the workbook's stored values, the latter carry their new
    constant.  The root itself is always expanded.
    """
    cells = wb.cells
    if root not in cells:
        raise UnknownCell(root)
    top = CallNode(root)
    stack = [top]
    while stack:
        node = stack.pop()
        cell = cells.get(node.ref)
        if cell is None:
            raise UnknownCell(node.ref)
        # one node per reference occurrence, unlike the deduplicated Cell.children
        for child in iter_children(cell.ast):
            if child in cut or child in changed:
                leaf = CallNode(child, expanded=False)
                node.children.append(leaf)
            else:
                sub = CallNode(child)
                node.children.append(sub)
                stack.append(sub)
    return CallTree(top)

