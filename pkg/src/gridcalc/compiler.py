"""Offline compilation of formulas into straight-line stack programs.

A compiled plan holds one postfix program per cell and can be saved to,
and loaded from, a small line-oriented text format::

    GRIDPLAN 1
    CELL A1 1
    PUSH 1
    CELL B1 3
    PUSH 1
    LOAD A1
    ADD
    END

Cells appear in row-major order.  Once a plan is loaded nothing on the
evaluation path looks at formula text.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import NamedTuple

from .errors import CircularReference, EvalError, MalformedRef, PlanFormatError, UnboundRef
from .formula import (
    Binary,
    CellRef,
    FUNCTIONS,
    FunctionCall,
    NumberLiteral,
    RangeArg,
    Reference,
    Unary,
    BINARY_FUNCS,
    apply_function,
    evaluate,
    format_number,
    parse_ref,
    row_major,
)
from .workbook import Workbook, _topological_order

PLAN_MAGIC = 'GRIDPLAN'
PLAN_VERSION = 1

_BINARY_OPCODES = {'+': 'ADD', '-': 'SUB', '*': 'MUL', '/': 'DIV', '^': 'POW'}
_OPCODE_SYMBOLS = {v: k for k, v in _BINARY_OPCODES.items()}
_OPCODE_FUNCS = {code: BINARY_FUNCS[sym] for sym, code in _BINARY_OPCODES.items()}


class Instruction(NamedTuple):
    opcode: str
    operand: object = None  # float for PUSH, CellRef for LOAD, name for CALL
    argc: int = 0

    def __str__(self):
        if self.opcode == 'PUSH':
            return f'PUSH {format_number(self.operand)}'
        if self.opcode == 'LOAD':
            return f'LOAD {self.operand}'
        if self.opcode == 'CALL':
            return f'CALL {self.operand} {self.argc}'
        return self.opcode


@dataclass(frozen=True)
class CompiledProgram:
    ref: CellRef
    instructions: tuple
    children: tuple  # distinct LOAD targets, first-occurrence order


@dataclass(frozen=True)
class CompiledPlan:
    programs: dict  # CellRef -> CompiledProgram, row-major
    parents: dict  # CellRef -> frozenset of CellRef
    version: int = PLAN_VERSION

    def __len__(self):
        return len(self.programs)


def compile_ast(ast) -> list[Instruction]:
    """Lower an AST to postfix code."""
    code = []
    _emit(ast, code)
    return code


def _emit(node, code):
    if isinstance(node, NumberLiteral):
        code.append(Instruction('PUSH', node.value))
    elif isinstance(node, Reference):
        code.append(Instruction('LOAD', node.ref))
    elif isinstance(node, Binary):
        _emit(node.left, code)
        _emit(node.right, code)
        code.append(Instruction(_BINARY_OPCODES[node.op]))
    elif isinstance(node, Unary):
        _emit(node.operand, code)
        code.append(Instruction('NEG'))
    elif isinstance(node, FunctionCall):
        argc = 0
        for arg in node.args:
            if isinstance(arg, RangeArg):
                cells = arg.cells()
                code.extend(Instruction('LOAD', ref) for ref in cells)
                argc += len(cells)
            else:
                _emit(arg, code)
                argc += 1
        code.append(Instruction('CALL', node.name, argc))
    else:
        raise TypeError(f'not a formula node: {node!r}')


def _program(ref, instructions) -> CompiledProgram:
    loads = (ins.operand for ins in instructions if ins.opcode == 'LOAD')
    return CompiledProgram(ref, tuple(instructions), tuple(dict.fromkeys(loads)))


def compile_cell(cell) -> CompiledProgram:
    """Compile one cell.  A constant cell becomes a single PUSH of its value."""
    if cell.is_constant:
        return _program(cell.ref, [Instruction('PUSH', evaluate(cell.ast, {}))])
    return _program(cell.ref, compile_ast(cell.ast))


def _link(programs: dict) -> CompiledPlan:
    parents = {ref: set() for ref in programs}
    for ref, prog in programs.items():
        for child in prog.children:
            if child not in parents:
                raise PlanFormatError(f'cell {ref} loads {child}, which has no program')
            parents[child].add(ref)
    frozen = {ref: frozenset(ps) for ref, ps in parents.items()}
    _topological_order(programs, frozen)
    return CompiledPlan(programs, frozen)


def compile_plan(wb: Workbook) -> CompiledPlan:
    programs = {ref: compile_cell(wb.cells[ref]) for ref in wb.order}
    return CompiledPlan(programs, dict(wb.parents))


def exec_program(prog: CompiledProgram, env) -> float:
    stack = []
    push = stack.append
    pop = stack.pop
    binary = _OPCODE_FUNCS.get
    try:
        for opcode, operand, argc in prog.instructions:
            if opcode == 'LOAD':
                try:
                    push(env[operand])
                except KeyError:
                    raise UnboundRef(operand) from None
            elif opcode == 'PUSH':
                push(operand)
            else:
                fn = binary(opcode)
                if fn is not None:
                    b = pop()
                    push(fn(pop(), b))
                elif opcode == 'NEG':
                    push(-pop())
                elif opcode == 'CALL':
                    if argc < 1 or argc > len(stack):
                        raise EvalError(f'CALL {operand} {argc}: bad argument count')
                    args = stack[-argc:]
                    del stack[-argc:]
                    push(apply_function(operand, args))
                else:
                    raise EvalError(f'unknown opcode {opcode!r}')
    except IndexError:
        raise EvalError(f'stack underflow in program for {prog.ref}') from None
    if len(stack) != 1:
        raise EvalError(f'program for {prog.ref} left {len(stack)} values on the stack')
    return stack[0]


# -- serialization -----------------------------------------------------------

def save_plan(plan: CompiledPlan) -> bytes:
    lines = [f'{PLAN_MAGIC} {plan.version}']
    for ref in row_major(plan.programs):
        prog = plan.programs[ref]
        lines.append(f'CELL {ref} {len(prog.instructions)}')
        lines.extend(str(ins) for ins in prog.instructions)
    lines.append('END')
    return ('\n'.join(lines) + '\n').encode('utf-8')


def _is_count(text):
    return text.isascii() and text.isdigit()


def _parse_instruction(line, lineno) -> Instruction:
    parts = line.split(' ')
    op = parts[0]
    if op == 'PUSH' and len(parts) == 2:
        try:
            value = float(parts[1])
        except ValueError:
            raise PlanFormatError(f'bad PUSH operand {parts[1]!r}', lineno) from None
        if not math.isfinite(value):
            raise PlanFormatError(f'non-finite PUSH operand {parts[1]!r}', lineno)
        return Instruction('PUSH', value)
    if op == 'LOAD' and len(parts) == 2:
        try:
            return Instruction('LOAD', parse_ref(parts[1]))
        except MalformedRef:
            raise PlanFormatError(f'bad LOAD operand {parts[1]!r}', lineno) from None
    if op == 'CALL' and len(parts) == 3:
        if parts[1] not in FUNCTIONS:
            raise PlanFormatError(f'unknown function {parts[1]!r}', lineno)
        if not _is_count(parts[2]) or int(parts[2]) < 1:
            raise PlanFormatError(f'bad CALL argument count {parts[2]!r}', lineno)
        return Instruction('CALL', parts[1], int(parts[2]))
    if op in _OPCODE_SYMBOLS or op == 'NEG':
        if len(parts) == 1:
            return Instruction(sys.intern(op))
    raise PlanFormatError(f'malformed instruction {line!r}', lineno)


def _check_stack(ref, instructions, lineno):
    depth = 0
    for ins in instructions:
        if ins.opcode in ('PUSH', 'LOAD'):
            depth += 1
        elif ins.opcode == 'NEG':
            if depth < 1:
                break
        elif ins.opcode == 'CALL':
            if depth < ins.argc:
                break
            depth -= ins.argc - 1
        else:
            if depth < 2:
                break
            depth -= 1
    else:
        if depth == 1:
            return
    raise PlanFormatError(f'unbalanced stack effect in program for {ref}', lineno)


def load_plan(data: bytes) -> CompiledPlan:
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError:
        raise PlanFormatError('plan is not valid UTF-8') from None
    if not text.endswith('\n'):
        raise PlanFormatError('plan is truncated (no final newline)')
    lines = text[:-1].split('\n')
    header = lines[0].split(' ')
    if len(header) != 2 or header[0] != PLAN_MAGIC:
        raise PlanFormatError(f'bad magic {lines[0]!r}', 1)
    if header[1] != str(PLAN_VERSION):
        raise PlanFormatError(f'unsupported plan version {header[1]!r}', 1)

    programs = {}
    last_key = None
    i = 1
    while True:
        if i >= len(lines):
            raise PlanFormatError('plan is truncated (missing END)')
        line = lines[i]
        lineno = i + 1
        if line == 'END':
            if i != len(lines) - 1:
                raise PlanFormatError('content after END', lineno + 1)
            break
        parts = line.split(' ')
        if len(parts) != 3 or parts[0] != 'CELL' or not _is_count(parts[2]):
            raise PlanFormatError(f'expected CELL header, found {line!r}', lineno)
        try:
            ref = parse_ref(parts[1])
        except MalformedRef:
            raise PlanFormatError(f'bad cell reference {parts[1]!r}', lineno) from None
        key = ref.sort_key
        if last_key is not None and key <= last_key:
            raise PlanFormatError(f'cell {ref} out of row-major order or duplicated', lineno)
        last_key = key
        count = int(parts[2])
        if count < 1:
            raise PlanFormatError(f'cell {ref} has an empty program', lineno)
        body = lines[i + 1:i + 1 + count]
        if len(body) < count:
            raise PlanFormatError(f'plan is truncated inside cell {ref}')
        instructions = [_parse_instruction(ln, lineno + 1 + k) for k, ln in enumerate(body)]
        _check_stack(ref, instructions, lineno)
        programs[ref] = _program(ref, instructions)
        i += 1 + count
    try:
        return _link(programs)
    except CircularReference as exc:
        raise PlanFormatError(str(exc)) from None
