"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor or array dimensions do not agree with what an operation expects."""


class ConfigError(ValueError):
    """Invalid or unknown configuration value."""


class ParseError(ValueError):
    """A file could not be parsed.

    ``field`` names the offending header field or line so callers can report it.
    """

    def __init__(self, message, *, path=None, field=None, line=None):
        self.path = path
        self.field = field
        self.line = line
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ": ".join([", ".join(where)]) + ": " if where else ""
        super().__init__(prefix + message)


class IngestionError(RuntimeError):
    """Dataset directory is missing files or holds an empty sequence."""


class EmptyGroundTruthError(ValueError):
    """No ground-truth pixel survived the validity filter."""


class NonFiniteLossError(RuntimeError):
    """A training loss term became NaN or infinite."""

    def __init__(self, term, value, step=None):
        self.term = term
        self.value = value
        self.step = step
        at = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite loss term '{term}' = {value}{at}")
