from omnialloc.exceptions import SimulationError


class ConfigFileError(SimulationError):
    default_message = 'Experiment configuration file could not be read'


class ConfigMismatchError(SimulationError):
    """Compared configurations differ in more than the allocator."""

    default_message = 'Configurations differ outside the allocator choice'

    def __init__(self, message=None, fields=None):
        super().__init__(message, fields=fields)
        self.fields = fields or []


class SimulationAbortedError(SimulationError):
    default_message = 'Closed-loop state became non-finite'

    def __init__(self, message=None, step_index=None):
        super().__init__(message, step_index=step_index)
        self.step_index = step_index


class FallbackBudgetExceeded(SimulationError):
    default_message = 'Too many receding-horizon cycles fell back to MBNO'

    def __init__(self, message=None, fallbacks=None, budget=None):
        super().__init__(message, fallbacks=fallbacks, budget=budget)
        self.fallbacks = fallbacks
        self.budget = budget


class OutputError(SimulationError):
    default_message = 'Could not write run outputs'

    def __init__(self, message=None, path=None):
        super().__init__(message, path=str(path) if path is not None else None)
        self.path = path
