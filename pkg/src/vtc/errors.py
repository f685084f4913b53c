"""Exception hierarchy shared by every stage."""


class VtcError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 2


class NonFiniteInput(VtcError):
    pass


class ZeroNormRow(VtcError):
    def __init__(self, index: int):
        super().__init__(f"row {index} has zero norm")
        self.index = index


class IndexOutOfRange(VtcError):
    pass


class DegenerateSequence(VtcError):
    pass


class EmptyPool(VtcError):
    pass


class EmptyInput(VtcError):
    pass


class ShapeMismatch(VtcError):
    pass


class ParseError(VtcError):
    def __init__(self, message: str, offset: int | None = None, field: str | None = None):
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))
        self.message = message
        self.offset = offset
        self.field = field


class OracleMismatch(VtcError):
    exit_code = 3

    def __init__(self, field: str, detail: str = ""):
        super().__init__(f"oracle mismatch at {field}" + (f": {detail}" if detail else ""))
        self.field = field
