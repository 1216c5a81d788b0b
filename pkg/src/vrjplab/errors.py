"""Exception types shared across the package."""


class VrjplabError(Exception):
    """Base class for package-specific failures."""


class DegenerateInputError(VrjplabError):
    """A supplied matrix/field is (numerically) outside the admissible set.

    Raised e.g. when a conditioning block of the Schrödinger operator is not
    positive definite at tolerance, so Green functions and conditional
    parameters cannot be formed from it.
    """


class DegenerateSampleError(VrjplabError):
    """A sampled potential hit a measure-zero numerical degeneracy.

    The sequential sampler raises this when an elimination pivot falls below
    the relative floor.  Replicate harnesses count these, drop the replicate,
    and fail the run only if the budget is exceeded.
    """


class OracleInapplicableError(VrjplabError):
    """The certified truncated path sum cannot be bounded.

    Raised when the symmetrized transfer operator has spectral radius >= 1 at
    tolerance, i.e. the operator is not positive definite or is too close to
    critical for a geometric tail bound.
    """


class ConfigError(VrjplabError):
    """Invalid or unknown configuration input (CLI exit code 2)."""
