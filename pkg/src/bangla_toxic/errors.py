"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it as the
machine-parsable prefix of its one-line failure message.
"""


class BanglaToxicError(Exception):
    category = "error"


class ShapeError(BanglaToxicError, ValueError):
    category = "shape"


class NumericError(BanglaToxicError, ArithmeticError):
    category = "numeric"


class ArgumentError(BanglaToxicError, ValueError):
    category = "argument"


class SchemaError(BanglaToxicError, ValueError):
    category = "schema"


class RowError(BanglaToxicError, ValueError):
    category = "row"

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class LookupIndexError(BanglaToxicError, IndexError):
    category = "lookup"


class StateError(BanglaToxicError, RuntimeError):
    category = "state"


class FormatError(BanglaToxicError, ValueError):
    category = "format"


class CompatibilityError(BanglaToxicError, ValueError):
    category = "compatibility"


class TrainingError(BanglaToxicError, RuntimeError):
    category = "training"


class ConfigError(BanglaToxicError, ValueError):
    category = "config"
