"""Exception types shared across the package."""


class CapabilityError(RuntimeError):
    """An exact/certified computation was requested where only an
    approximate or bounded one is available."""


class FormInvariantError(ValueError):
    """A positive form failed its Hermitian / positive-semidefinite
    invariants, or produced an inadmissible quadratic value."""


class ConfigError(ValueError):
    """Configuration document rejected; carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
