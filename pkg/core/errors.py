"""
Error hierarchy. Every class carries the exit code the CLI maps it to.
"""


class LabError(Exception):
    exit_code = 1


class InputError(LabError, ValueError):
    pass


class QuantizerRangeError(LabError, OverflowError):
    pass


class SpecError(LabError, ValueError):
    pass


class StructureError(SpecError):
    pass


class DomainError(LabError, ValueError):
    pass


class ConsistencyError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    pass


class CapabilityError(LabError):
    exit_code = 2


class BudgetError(LabError):
    exit_code = 2


class SearchError(LabError):
    exit_code = 2


class DepthError(LabError):
    exit_code = 2


class ReportIOError(LabError, OSError):
    exit_code = 3

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")


class EnumerationRangeError(CapabilityError):
    """Prefix enumeration over 2**L states requested above the configured cap."""
