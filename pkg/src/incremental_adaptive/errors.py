"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A parameter or identifier is invalid."""


class ValidationError(ConfigurationError):
    """One or more scenario constraints are violated.

    ``errors`` holds every violation found, not just the first.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConfigParseError(ConfigurationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class HistoryUnderflowError(LookupError):
    """Requested estimate lies before the retained history window."""


class ContractViolation(ValueError):
    pass


class NumericFault(FloatingPointError):
    """A non-finite value appeared during simulation.

    Carries the name of the first offending quantity and where it occurred.
    """

    def __init__(self, quantity, t=None, step=None, value=None):
        self.quantity = quantity
        self.t = t
        self.step = step
        self.value = value
        where = []
        if step is not None:
            where.append(f"step {step}")
        if t is not None:
            where.append(f"t={t!r}")
        loc = f" at {', '.join(where)}" if where else ""
        super().__init__(f"non-finite {quantity}{loc}: {value!r}")
