class InvalidArgument(ValueError):
    pass


class SingularLegendreError(ArithmeticError):
    """Raised when the fibre derivative cannot be inverted at a state."""


class IntegratorStepError(RuntimeError):
    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


class GradientValidationError(ValueError):
    def __init__(self, report):
        bad = ", ".join(report.failures)
        super().__init__(f"user gradients disagree with finite differences: {bad}")
        self.report = report


class ConfigError(ValueError):
    pass
