from omnialloc.exceptions import SimulationError


class OcpConfigurationError(SimulationError):
    default_message = 'Invalid optimal control problem configuration'


class NumericalError(SimulationError):
    default_message = 'Non-finite value in the linearised closed loop'

    def __init__(self, message=None, step_index=None):
        super().__init__(message, step_index=step_index)
        self.step_index = step_index


class SolverFailureError(SimulationError):
    """Backward pass stayed indefinite at the largest regularisation.

    ``best_solution`` is the lowest-cost iterate reached before the failure.
    """

    default_message = 'Backward pass failed at maximum regularisation'

    def __init__(self, message=None, best_solution=None, regularization=None):
        super().__init__(message, regularization=regularization)
        self.best_solution = best_solution
