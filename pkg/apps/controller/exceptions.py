from omnialloc.exceptions import SimulationError


class ControllerConfigurationError(SimulationError):
    default_message = 'Invalid controller configuration'
