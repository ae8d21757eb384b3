"""Exception types shared across the solver modules."""


class InvalidModelError(ValueError):
    """Model coefficients violate a required bound at an evaluation point."""


class AssumptionError(RuntimeError):
    """The model data violates the sign/divergence structure the theory needs.

    Carries the name of the violated condition in ``condition``.
    """

    def __init__(self, condition: str, message: str):
        self.condition = condition
        super().__init__(f"{condition}: {message}")


class NumericsError(RuntimeError):
    """A numerical routine failed to converge; details in the message."""
