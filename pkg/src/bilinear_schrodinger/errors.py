"""Exception hierarchy shared by the numerical modules and the CLI."""


class ValidationError(ValueError):
    """Bad input: violated precondition, malformed config or file."""


class NumericalFailure(RuntimeError):
    """A well-posed request whose numerics could not be completed."""


class ObstructedState(NumericalFailure):
    """The base state lies in the obstruction set; the linearization has no right inverse."""


class IllConditioned(NumericalFailure):
    """The moment Gram system is too ill-conditioned to trust the synthesized control."""


class Diverged(NumericalFailure):
    """Newton steering stopped making progress."""
