"""Exception and warning types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible shapes or qubit counts."""


class NumericalError(RuntimeError):
    """A dense linear-algebra routine failed or left a residual above tolerance."""


class UnknownFrequencyError(ValueError):
    """A requested frequency is not a Bohr frequency of the Hamiltonian (within tolerance)."""


class SubspacePreconditionError(ValueError):
    """An operator violates a subspace membership precondition.

    Carries the measured distance so callers can report how far off the input was.
    """

    def __init__(self, message: str, distance: float):
        super().__init__(f"{message} (distance {distance:.3e})")
        self.distance = distance


class ReversibilityError(RuntimeError):
    """The generator matrix came out non-Hermitian beyond tolerance.

    This signals a transition-rate function that violates detailed balance.
    """


class SizeError(ValueError):
    """An exhaustive computation was requested on a problem too large for it."""


class WitnessDegenerateError(RuntimeError):
    """The Cheeger projection has (numerically) zero variance, so no ratio is defined."""


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class IdentityFieldWarning(UserWarning):
    """The single-site field operator is a multiple of the identity.

    The perturbed Hamiltonian is still well defined, but such a field cannot
    split degeneracies or remove arithmetic progressions.
    """
