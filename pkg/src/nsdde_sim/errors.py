"""Exception types raised by the library.

Everything derives from :class:`NsddeError` so callers can catch the whole
family with a single except clause.  Input validation errors are raised as
early as possible (at grid/model construction), runtime blow-ups during a
simulation are reported through :class:`NonFiniteState` which carries the
first offending step.
"""


class NsddeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRange(NsddeError):
    """A parameter is outside its admissible range."""


class NonDivisibleStep(NsddeError):
    """Step size does not divide the delay or the horizon."""


class IncompatibleFactor(NsddeError):
    """Coarsening factor does not divide the grid step counts."""


class IncompatibleGrids(NsddeError):
    """Two grids that must be nested/equal are not."""


class IncompatibleNoise(NsddeError):
    """A Brownian path does not match the grid or path it is used with."""


class DimensionMismatch(NsddeError):
    """State or noise dimensions of model, segment and noise disagree."""


class DegenerateSampling(NsddeError):
    """A sampling-based estimate had no usable samples."""


class ConfigError(NsddeError):
    """A run configuration file is malformed or inconsistent."""


class NonFiniteState(NsddeError):
    """A simulated state became NaN or infinite.

    Attributes
    ----------
    step : int
        Grid index of the first non-finite state.
    time : float
        Grid time of that step.
    """

    def __init__(self, step, time):
        self.step = int(step)
        self.time = float(time)
        super().__init__(f"state non-finite at step {self.step} (t={self.time:g})")
