"""Exception hierarchy shared by all solvers."""


class OciError(Exception):
    """Base class for every error raised by this package."""


class CycleError(OciError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("graph has a cycle: " + " -> ".join(map(str, self.cycle)))


class BadEdgeError(OciError):
    pass


class DomainError(OciError):
    pass


class TooLargeError(OciError):
    pass


class HypothesisError(OciError):
    """Raised when a closed-form objective is requested outside its model class."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DimensionError(OciError):
    pass


class SingularError(OciError):
    pass


class ParseError(OciError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)


class ValidationError(OciError):
    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
