"""Exception hierarchy shared by the solvers, the kernel tools and the CLI."""


class NLStefanError(Exception):
    """Base class for every error raised by this package."""


class NumericalGuard(NLStefanError):
    """A numerical guard tripped; the CLI maps these to exit code 3."""


class DomainTooSmall(NumericalGuard):
    """A phase set came within one kernel radius of the grid boundary."""


class CflViolation(NumericalGuard):
    """Explicit step size violates the stability bound."""


class KernelWiderThanGrid(NumericalGuard):
    """The truncated kernel stencil does not fit inside the grid."""


class MaxSweepsExceeded(NumericalGuard):
    """Projected Gauss-Seidel did not reach the complementarity tolerance."""


class DegenerateBox(NLStefanError):
    pass


class NonIntegrableMoment(NLStefanError):
    pass


class QuadratureNonConvergence(NLStefanError):
    pass


class InconsistentKernel(NLStefanError):
    """Moment conditions hold but the Fourier expansion disagrees.

    This points at a quadrature or closed-form bug, not at the kernel.
    """


class FormatError(NLStefanError):
    pass


class ConfigError(NLStefanError):
    """Base for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, errors):
        # errors: list of (line_number, message)
        self.errors = list(errors)
        text = "; ".join(f"line {ln}: {msg}" for ln, msg in self.errors)
        super().__init__(text)

    @property
    def line(self):
        return self.errors[0][0]


class ValidationError(ConfigError):
    def __init__(self, field, constraint):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: violates {constraint}")
