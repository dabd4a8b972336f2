"""Spreadsheet recomputation engine with eager, lazy and compiled modes."""

from .compiler import CompiledPlan, CompiledProgram, Instruction, compile_plan, exec_program, load_plan, save_plan
from .depgraph import DependencySet, FrontierTrace, build_call_tree, dependency_set, direct_dependents
from .eager import EagerEngine, ParserString, RecomputeReport, build_parser_string, eval_parser_string, set_and_recompute
from .errors import (
    CircularReference,
    DanglingRef,
    DuplicateCell,
    EvalError,
    FormulaSyntaxError,
    GridError,
    MalformedRef,
    NotConstant,
    PlanFormatError,
    UnboundRef,
    UnknownCell,
    XmlError,
)
from .formula import CellRef, evaluate, extract_children, format_number, parse_formula, parse_ref, render_formula
from .lazy import LazyCellState, LazyRegistry
from .workbook import Cell, Workbook, build_workbook, dump_workbook, load_workbook, make_cell, set_constant

__all__ = [name for name in dir() if not name.startswith('_')]
