"""Base error type shared by every simulation app."""


class SimulationError(Exception):
    """Root of all errors raised by the simulation library.

    Management commands catch this type and turn it into a ``CommandError``.
    """

    default_message = 'Simulation error'

    def __init__(self, message=None, **context):
        self.message = message or self.default_message
        self.context = context
        super().__init__(self.message)

    def __str__(self):
        if not self.context:
            return self.message
        details = ', '.join(f'{key}={value}' for key, value in sorted(self.context.items()))
        return f'{self.message} ({details})'
