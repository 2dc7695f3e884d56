"""Exception hierarchy.

Errors split into configuration problems (bad shapes, invalid frames,
malformed input files) and numerical failures (degenerate problems,
accuracy faults). The CLI maps the two families to distinct exit codes.
"""


class HamstabError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(HamstabError):
    """Invalid input supplied by the caller."""


class NumericalError(HamstabError):
    """A well-posed request that failed for numerical reasons."""


class DimensionError(ConfigError):
    pass


class InvalidFrame(ConfigError):
    pass


class InvalidSymmetry(ConfigError):
    pass


class InvalidEccentricity(ConfigError):
    pass


class FormatError(ConfigError):
    pass


class StiffnessError(NumericalError):
    pass


class AccuracyError(NumericalError):
    pass


class DegenerateBaseProblem(NumericalError):
    """The unperturbed boundary problem has a nontrivial kernel."""

    def __init__(self, message, sign=None):
        super().__init__(message)
        self.sign = sign


class DegenerateEndpoint(NumericalError):
    pass


class DegenerateFactor(NumericalError):
    def __init__(self, message, factor=None):
        super().__init__(message)
        self.factor = factor


class TruncationResonance(NumericalError):
    pass


class SuspectedEvenOrderRoot(NumericalError):
    pass


class NonRegularCrossing(NumericalError):
    """A crossing whose crossing form is degenerate; orientation is undefined."""


class WindowTooSmall(NumericalError):
    pass
