class SolverError(FloatingPointError):
    """A solver produced a non-finite or otherwise invalid state."""

    def __init__(self, message, step=None, index=None, residual=None):
        super().__init__(message)
        self.step = step
        self.index = index
        self.residual = residual
