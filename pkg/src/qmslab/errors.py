"""Exception hierarchy for domain-contract violations.

Every validation failure raises one of these rather than a bare ValueError so
callers (and the CLI's exit-code mapping) can tell a malformed input apart
from a genuine inequality failure.
"""


class QmsLabError(Exception):
    """Base class for all domain errors."""


class ShapeError(QmsLabError):
    """Operand is not square / dimensions are incompatible."""


class HermitianViolation(QmsLabError):
    """Matrix fails the Hermiticity tolerance."""


class DomainViolation(QmsLabError):
    """Scalar or operator falls outside the required domain (e.g. not PSD)."""


class SupportError(QmsLabError):
    """Support inclusion needed for a finite relative entropy fails."""


class RankError(QmsLabError):
    """Operator is rank-deficient where full rank is required."""


class NotModularEigenvector(QmsLabError):
    """Jump operator is not an eigenvector of the modular group of sigma."""


class ModelError(QmsLabError):
    """Model definition is inconsistent (frequencies, adjoint closure, ...)."""


class EvolutionError(QmsLabError):
    """Semigroup evolution produced an invalid state."""


class DegenerateSampling(QmsLabError):
    """All sampled witnesses were degenerate (denominators below floor)."""


class PrimitivityError(QmsLabError):
    """Operation requires a primitive (trivial fixed-point algebra) model."""


class IncompatibleStates(QmsLabError):
    """Two reference states do not share the block/commutation structure."""


class DBCError(QmsLabError):
    """Channel fails the sigma-detailed-balance condition."""


class DegeneracyError(QmsLabError):
    """Eigenvalue grouping could not separate clusters at the tolerance."""


class IrreducibilityError(QmsLabError):
    """Graph is not connected where irreducibility is required."""


class UnitarityError(QmsLabError):
    """Matrix fails the unitarity tolerance."""


class SubalgebraError(QmsLabError):
    """Fixed-point algebra decomposition failed internal consistency."""


class HypothesisError(QmsLabError):
    """A user-supplied hypothesis (e.g. a weak-LSI pair) fails on samples."""


class ConfigError(QmsLabError):
    """Config / model file unreadable or schema-invalid."""
