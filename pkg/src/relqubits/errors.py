"""Exception hierarchy for the relqubits package.

Every failure mode raised by the library derives from :class:`RelQubitsError`
so callers can catch the whole family with one clause.
"""


class RelQubitsError(Exception):
    """Base class for all relqubits errors."""


# --- geometry ---------------------------------------------------------------

class SingularMetric(RelQubitsError):
    """Metric matrix is not invertible at the evaluated point."""


class NonOrthonormalTetrad(RelQubitsError):
    """Tetrad fails g_{mu nu} e^mu_I e^nu_J = eta_IJ beyond tolerance."""


class ImproperTransform(RelQubitsError):
    """Matrix is not a proper orthochronous Lorentz transformation."""


# --- trajectories -----------------------------------------------------------

class StepTooLarge(RelQubitsError):
    """Integration step produced unacceptable normalisation drift."""


class NotNull(RelQubitsError):
    """Vector expected to be null is not, beyond tolerance."""


class NullTrajectory(RelQubitsError):
    """Operation requires a timelike trajectory but got a null one."""


# --- state spaces -----------------------------------------------------------

class MomentumMismatch(RelQubitsError):
    """States live in Hilbert spaces with different momenta."""


class VelocityMismatch(RelQubitsError):
    """State velocity does not match the trajectory's initial velocity."""


class NotTimelike(RelQubitsError):
    """4-velocity is not timelike, future-directed and normalised."""


class NonOrthogonalAcceleration(RelQubitsError):
    """Proper acceleration has a component along the 4-velocity."""


class AntipodalSingularity(RelQubitsError):
    """Photon direction is (anti)parallel to the negative frame z-axis,
    where the adaption rotation is topologically undefined."""


# --- interferometry ---------------------------------------------------------

class MissingWavevector(RelQubitsError):
    """Interferometer arm lacks the wavevector samples needed for a phase."""


class WavevectorMismatch(RelQubitsError):
    """Recombining arms carry different wavevectors."""


class OrthogonalStates(RelQubitsError):
    """Transport phase is undefined for orthogonal states."""


class ImaginaryVelocity(RelQubitsError):
    """Particle cannot reach the upper interferometer path."""


class NegativeRadicand(RelQubitsError):
    """Weak-field expression requires 2*dz*g <= v1^2."""


# --- measurement ------------------------------------------------------------

class DegenerateConfiguration(RelQubitsError):
    """Stern-Gerlach axis is undefined (zero rest-frame field)."""


class NotOrthogonal(RelQubitsError):
    """Measurement axis must be orthogonal to the 4-velocity."""


class InvalidFrame(RelQubitsError):
    """Diad frame fails its defining orthogonality relations."""


# --- multiqubit -------------------------------------------------------------

class SubsystemOutOfRange(RelQubitsError):
    """Subsystem index does not exist in this state."""


class ZeroProbabilityBranch(RelQubitsError):
    """Measurement update conditioned on an outcome of probability zero."""


class NonCanonicalEntanglement(RelQubitsError):
    """Shared pair is not maximally entangled in canonical form."""


# --- quantum reference frames -----------------------------------------------

class NotDensityMatrix(RelQubitsError):
    """Input is not Hermitian, positive and trace one within tolerance."""


class DimensionMismatch(RelQubitsError):
    """Operator and space dimensions are incompatible."""


class NonMLProjectors(RelQubitsError):
    """Relational instrument requires maximum-likelihood projector families."""


class UnsupportedStateKind(RelQubitsError):
    """Operation not defined for this reference-frame state kind."""


class ConfigError(RelQubitsError):
    """Invalid run configuration (unknown key or bad value)."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key '{key}': {message}")
