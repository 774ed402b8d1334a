"""Exception hierarchy for billispec."""


class BillispecError(Exception):
    """Base class; CLI maps these to exit code 3."""


class QuadratureError(BillispecError):
    """Quadrature failed to converge below the requested tolerance."""


class GeometryError(BillispecError):
    """Invalid or degenerate domain geometry (self-intersection, failed ray trace)."""


class GlancingError(BillispecError):
    """Phase point too close to the glancing set |zeta| = 1."""


class FocalRayError(BillispecError):
    """Ray passes through (or too close to) a focus; caustic parameter undefined."""


class CurveError(BillispecError):
    """Invariant-curve construction failed (level outside the elliptic-caustic range)."""


class RotationError(BillispecError):
    """Rotation-number average did not converge."""


class NoSuchFamilyError(BillispecError):
    """No periodic family with the requested rotation number."""


class CompletenessError(BillispecError):
    """Eigenvalue search is missing levels against the Weyl count."""


class AccuracyError(BillispecError):
    """Eigenvalue residual above the acceptance tolerance."""


class ResolutionError(BillispecError):
    """Boundary trace grid too coarse for the deformation field."""


class MatchingError(BillispecError):
    """Cluster matching across finite-difference spectra failed."""


class CutoffError(BillispecError):
    """Spectral leakage beyond the eigenvalue cutoff exceeds the tail tolerance."""


class PoleError(BillispecError):
    """Spectral parameter collides with an eigenvalue."""


class MomentError(BillispecError):
    """Moment extrapolation at the glancing level did not converge."""


class FlatError(BillispecError):
    """Reparametrization requested for a flat coefficient sequence."""


class DegenerateRatioError(BillispecError):
    """Ratio denominator below the noise floor."""
