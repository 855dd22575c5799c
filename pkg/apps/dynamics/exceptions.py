from omnialloc.exceptions import SimulationError


class InvalidArgumentError(SimulationError):
    default_message = 'Invalid argument'


class ParameterError(SimulationError):
    default_message = 'Invalid vehicle parameters'
