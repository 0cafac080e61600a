"""Exception hierarchy shared by every module. Each error carries the exit
code the command line front end returns when it escapes to the top."""


class PlcAutomataError(Exception):
    exit_code = 2


# --- Usage (exit 1) ---
class UsageError(PlcAutomataError):
    exit_code = 1


class ConfigError(UsageError):
    pass


# --- Data / validation (exit 2) ---
class DataError(PlcAutomataError):
    exit_code = 2


class TraceFormatError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SegmentationError(DataError):
    pass


class DataValidationError(DataError):
    pass


class DimensionError(DataError, ValueError):
    pass


class AutomatonFormatError(DataError):
    def __init__(self, message, line=None, column=None, field=None):
        self.line = line
        self.column = column
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class IncompleteCycleError(DataError):
    """Input ran out before the block returned to position A. The partial
    automaton is kept on the exception."""

    def __init__(self, automaton, message="input exhausted before position A recurred"):
        self.automaton = automaton
        super().__init__(message)


# --- Numeric (exit 3) ---
class NumericError(PlcAutomataError):
    exit_code = 3


class StageError(PlcAutomataError):
    """A pipeline stage failed; keeps the stage name and the wrapped exit code."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
        super().__init__(f"[{stage}] {cause}")
