from omnialloc.exceptions import SimulationError


class MotorConfigurationError(SimulationError):
    default_message = 'Invalid motor configuration'
