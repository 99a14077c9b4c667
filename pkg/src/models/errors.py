class DimensionMismatchError(ValueError):
    pass


class NonPositiveSpectrumError(ValueError):
    pass


class RankDeficientStateError(ValueError):
    pass


class ProtocolOrderError(ValueError):
    pass


class ScheduleError(ValueError):
    pass


class ConfigValidationError(ValueError):
    """Raised with every diagnostic collected while validating a config."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))
