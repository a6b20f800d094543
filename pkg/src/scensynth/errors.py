"""Exception hierarchy shared by the library modules."""


class SynthesisError(Exception):
    """Base class for every error raised by scensynth."""


class DomainError(SynthesisError, ValueError):
    """An argument is outside the domain of the operation."""


class FitError(SynthesisError):
    """Percentile fitting did not converge.

    The best parameters found so far and their squared-error residual are kept
    on the exception so callers can decide whether to use them anyway.
    """

    def __init__(self, message, params=None, residual=None):
        super().__init__(message)
        self.params = params
        self.residual = residual


class DegeneracyError(SynthesisError):
    """All importance weights underflowed to zero."""


class InfeasibleSpecError(SynthesisError):
    """Target scores cannot be reached by reweighting the given sample."""


class ConvergenceError(SynthesisError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConstructionError(SynthesisError):
    """A derived object (e.g. the backstop spec) would be degenerate."""


class PipelineError(SynthesisError):
    """Wraps a module error with the pipeline stage and scenario name."""

    def __init__(self, stage, scenario, cause):
        where = f"stage={stage}"
        if scenario is not None:
            where += f" scenario={scenario!r}"
        super().__init__(f"[{where}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.scenario = scenario
        self.cause = cause
