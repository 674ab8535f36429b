"""Exception types shared across the simulator."""


class ParameterError(ValueError):
    """Invalid constructor or call parameters."""


class PreconditionError(ValueError):
    """A documented precondition of an operation was violated."""


class ZeroFunctionError(ValueError):
    """Construction would produce the identically-zero function."""


class CapabilityError(ValueError):
    """Request exceeds a hard capability cap (factorial growth guards)."""


class NodeError(ArithmeticError):
    """Evaluation at a node of the pilot wave, where the phase is ill-defined."""


class DomainError(ValueError):
    """Point outside the admissible domain (e.g. a flux-line singularity)."""


class ScenarioError(ValueError):
    """Scenario file failed validation; carries per-field diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
