"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line driver can map it
without a lookup table: 2 for bad input or violated assumptions, 3 for
numeric/positivity failures, 4 for enumeration size limits.
"""


class SpillsenseError(Exception):
    exit_code = 1


class InputDomainError(SpillsenseError, ValueError):
    exit_code = 2


class ExposureOverflowError(InputDomainError):
    """A count exposure exceeded ``g_max`` while clamping was disabled."""


class ScenarioValidationError(InputDomainError):
    def __init__(self, report):
        self.report = report
        lines = "; ".join(str(v) for v in report.violations[:5])
        more = "" if len(report.violations) <= 5 else f" (+{len(report.violations) - 5} more)"
        super().__init__(f"scenario failed validation: {lines}{more}")


class StructuralError(InputDomainError):
    """The scenario's structure breaks the transportability assumptions."""


class ModeError(InputDomainError):
    """Operation requested in a mode the measure or scenario does not support."""


class NumericError(SpillsenseError, ArithmeticError):
    exit_code = 3


class UndefinedStratumError(NumericError):
    """Conditioning on an event (or stratum) with zero probability mass."""


class PositivityError(NumericError):
    pass


class EstimationError(NumericError):
    pass


class EnumerationSizeError(SpillsenseError, MemoryError):
    exit_code = 4

    def __init__(self, cardinality, cap):
        self.cardinality = cardinality
        self.cap = cap
        super().__init__(f"joint enumeration needs {cardinality} states, cap is {cap}")
