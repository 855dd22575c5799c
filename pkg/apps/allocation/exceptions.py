from omnialloc.exceptions import SimulationError


class GeometryError(SimulationError):
    default_message = 'Invalid rotor geometry'


class GeometryRankError(GeometryError):
    default_message = 'Allocation matrix does not have full wrench rank'


class InfeasibleAllocationError(SimulationError):
    """No nullspace shift keeps every motor inside its bounds.

    ``x_diagnostic`` is the shift with the least maximum bound violation and
    ``max_violation`` that violation in newtons.
    """

    default_message = 'Motor bounds cannot be satisfied for the requested wrench'

    def __init__(self, message=None, x_diagnostic=None, max_violation=None):
        super().__init__(message, max_violation=max_violation)
        self.x_diagnostic = x_diagnostic
        self.max_violation = max_violation
