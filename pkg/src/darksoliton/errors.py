"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the admissible range of an operation."""


class GuardError(RuntimeError):
    """The hydrodynamical state left the region max(eta) < 1 - sigma_guard."""

    def __init__(self, message, max_eta=None, t=None):
        super().__init__(message)
        self.max_eta = max_eta
        self.t = t


class LiftingError(RuntimeError):
    """The wave function vanishes (or nearly so) and cannot be lifted."""


class NoSolitonError(RuntimeError):
    """No soliton-like dip could be located in the state."""


class ModulationError(RuntimeError):
    """The modulation Newton solve failed to converge."""

    def __init__(self, message, history=None, t=None):
        super().__init__(message)
        self.history = history or []
        self.t = t


class DegenerateModulationError(ModulationError):
    """The modulation Jacobian is numerically singular."""


class TrackingLossError(RuntimeError):
    """The phase-tracking integral fell below its admissible lower bound."""


class IntegrationError(RuntimeError):
    """A time integration produced non-finite values."""

    def __init__(self, message, step=None, t=None):
        super().__init__(message)
        self.step = step
        self.t = t


class ConfigError(DomainError):
    """A run configuration failed validation."""


class SweepError(RuntimeError):
    """A member run of an amplitude sweep failed."""

    def __init__(self, message, member=None):
        super().__init__(message)
        self.member = member
