"""Exception hierarchy shared by every gridcalc module."""


class GridError(Exception):
    """Base class for domain errors (the CLI maps these to exit code 1)."""


class MalformedRef(GridError, ValueError):
    pass


class FormulaSyntaxError(GridError):
    """A formula failed to lex or parse.

    ``offset`` is the 0-based character position of the offending input,
    ``cell`` names the cell the formula belongs to when known.
    """

    def __init__(self, message, offset=None, text=None, cell=None):
        self.message = message
        self.offset = offset
        self.text = text
        self.cell = cell
        super().__init__(str(self))

    def __str__(self):
        where = ''
        if self.cell is not None:
            where += f'cell {self.cell}: '
        if self.offset is not None:
            where += f'at offset {self.offset}: '
        return where + self.message


class EvalError(GridError, ArithmeticError):
    pass


class UnboundRef(GridError, KeyError):
    def __init__(self, ref):
        self.ref = ref
        super().__init__(ref)

    def __str__(self):
        return f'unbound reference {self.ref}'


class XmlError(GridError):
    pass


class DanglingRef(GridError):
    def __init__(self, cell, ref):
        self.cell = cell
        self.ref = ref
        super().__init__(f'cell {cell} references missing cell {ref}')


class DuplicateCell(GridError):
    def __init__(self, ref):
        self.ref = ref
        super().__init__(f'duplicate cell {ref}')


class CircularReference(GridError):
    """Raised when the dependency graph has a directed cycle.

    ``cycle`` lists the cells on the cycle in parent-to-child order,
    without repeating the first cell at the end.
    """

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__('circular reference: ' + self.witness())

    def witness(self):
        refs = [str(r) for r in self.cycle]
        return ' -> '.join(refs + refs[:1])


class UnknownCell(GridError, KeyError):
    def __init__(self, ref):
        self.ref = ref
        super().__init__(ref)

    def __str__(self):
        return f'unknown cell {self.ref}'


class NotConstant(GridError):
    def __init__(self, ref):
        self.ref = ref
        super().__init__(f'cell {ref} does not hold a constant formula')


class PlanFormatError(GridError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
