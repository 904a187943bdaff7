class ConfigurationError(ValueError):
    """Raised for invalid parameters: bad ranges, rates, depths or unknown config keys."""


class InvariantViolation(RuntimeError):
    """Raised when a genome or statevector breaks one of its invariants.

    ``generation`` is filled in when the violation is detected inside the
    generation loop so the CLI can report where the run aborted.
    """

    def __init__(self, message: str, generation=None):
        self.generation = generation
        if generation is not None:
            message = f"generation {generation}: {message}"
        super().__init__(message)
