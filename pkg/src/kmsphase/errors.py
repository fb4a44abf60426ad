"""Exception hierarchy shared by all kmsphase modules."""


class KmsPhaseError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(KmsPhaseError):
    """An instance specification failed structural validation."""


class CommutationError(ValidationError):
    """Adjacency matrices of different colors do not commute."""


class FactorizationError(ValidationError):
    """Supplied factorization data is not a consistent bijection."""


class LanguageError(ValidationError):
    """A factorial-language spec violates a language axiom."""


class DynamicsError(ValidationError):
    """Vertex maps of a dynamics spec do not commute."""


class LatticeError(ValidationError):
    """An ideal family is not a monotone, perp-invariant lattice."""


class UnsupportedError(KmsPhaseError):
    """Operation not available for this instance (e.g. language algebra over cap)."""


class CapExceeded(KmsPhaseError):
    """An enumeration or construction exceeded its configured budget."""


class SizeCap(CapExceeded):
    """Truncated Fock basis would exceed the configured size limit."""


class DimensionCap(CapExceeded):
    """Vertex enumeration requested beyond the supported dimension."""


class EigenSnapAmbiguity(KmsPhaseError):
    """e^beta is within snap tolerance of several distinct eigenvalues."""


class MembershipError(KmsPhaseError):
    """A trace vector fails the membership test of the requested trace set."""


class ConvergenceError(KmsPhaseError):
    """A partition series diverges where a finite value was required."""


class NotKMSError(KmsPhaseError):
    """Input trace is not the restriction of any equilibrium state at this beta."""


class NegativeMassError(NotKMSError):
    """An alternating Wold sum produced a mass below the clamp tolerance."""


class PathError(KmsPhaseError):
    """A basis path is not composable/allowable for the instance."""


class FactorizationRequired(KmsPhaseError):
    """Fock construction needs explicit factorization data for this graph."""


class OutOfTruncation(KmsPhaseError):
    """Requested projection parameters exceed the Fock truncation."""
