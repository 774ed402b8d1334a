"""Billiard map on the coball bundle of the boundary, the caustic invariant,
invariant curves with their Leray density, periodic families, and the length
spectrum of the ellipse.

Phase coordinates are (theta, zeta): boundary angle and tangential momentum,
with gamma1 = sqrt(1 - zeta^2) the inward normal component of the unit
covector. For the exact ellipse the conserved caustic parameter has the
closed form

    Z(theta, zeta) = b zeta^2 - eps (1 - zeta^2) sin^2(theta),

derived from tangency of the chord to the confocal conic with squared axes
(eps + Z, Z); it is validated numerically by the conservation tests rather
than trusted a priori. The Leray density on a level {Z = c} follows the
convention dq ^ dzeta = dZ ^ du_Z with q arclength, i.e.
du_Z = |x'(theta)| dtheta / |dZ/dzeta|.
"""
import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import (CurveError, FocalRayError, GeometryError, GlancingError,
                     NoSuchFamilyError, RotationError)
from .geometry import perimeter

TWO_PI = 2.0*np.pi
GLANCING_MARGIN = 1e-6
FOCUS_MARGIN = 1e-8


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    zeta: float

    def __post_init__(self):
        if not abs(self.zeta) < 1.0:
            raise GlancingError(f"|zeta| must be < 1, got {self.zeta}")

    @property
    def gamma1(self):
        return math.sqrt(1.0 - self.zeta*self.zeta)


def gamma1(zeta):
    """Normal component sqrt(1 - zeta^2) of the unit covector."""
    return np.sqrt(1.0 - np.asarray(zeta, dtype=float)**2)


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------

def _direction(domain, th, ze):
    """Unit ray direction zeta*tangent + gamma1*(inward normal)."""
    t = domain.tangent(np.atleast_1d(th))[:, 0]
    n_in = np.array([-t[1], t[0]])  # inward = tangent rotated +90 deg (CCW boundary)
    g = math.sqrt(1.0 - ze*ze)
    return ze*t + g*n_in


def _ray_trace_deformed(domain, th0, ze0):
    """Next boundary impact on a deformed domain: 2-d Newton on (s, phi),
    seeded by the base-ellipse chord; bracketed fallback on the signed
    perpendicular offset of boundary points from the ray."""
    p = domain.position(np.atleast_1d(th0))[:, 0]
    d = _direction(domain, th0, ze0)
    A, B = domain.base.A, domain.base.B
    lift, th_seed, _, ch = kernels.ellipse_steps_batch(
        A, B, np.array([float(th0 % TWO_PI)]), np.array([float(ze0)]), 1)
    phi, s = float(th_seed[0]), float(ch[0])
    ok = False
    for _ in range(60):
        y = domain.position(np.atleast_1d(phi))[:, 0]
        r = p + s*d - y
        if np.hypot(r[0], r[1]) < 1e-13*max(1.0, s):
            ok = s > 1e-9
            break
        yp = domain._d1(np.atleast_1d(phi))[:, 0]
        det = d[0]*(-yp[1]) - d[1]*(-yp[0])
        if det == 0.0:
            break
        ds = (-r[0]*(-yp[1]) - (-r[1])*(-yp[0]))/det
        dphi = (d[0]*(-r[1]) - d[1]*(-r[0]))/det
        s, phi = s + ds, phi + dphi
    if not ok:
        phi, s = _ray_trace_bracketed(domain, th0, p, d)
    return phi % TWO_PI, s


def _ray_trace_bracketed(domain, th0, p, d):
    n = 2048
    phis = th0 + (np.arange(1, n)*TWO_PI/n)
    y = domain.position(phis)
    h = (y[0] - p[0])*d[1] - (y[1] - p[1])*d[0]
    sgn = np.sign(h)
    hits = []
    for i in np.nonzero(sgn[:-1]*sgn[1:] < 0)[0]:
        lo, hi = phis[i], phis[i + 1]
        flo = h[i]
        for _ in range(80):
            mid = 0.5*(lo + hi)
            ym = domain.position(np.atleast_1d(mid))[:, 0]
            fm = (ym[0] - p[0])*d[1] - (ym[1] - p[1])*d[0]
            if fm == 0.0:
                lo = hi = mid
                break
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        phi = 0.5*(lo + hi)
        ym = domain.position(np.atleast_1d(phi))[:, 0]
        s = (ym[0] - p[0])*d[0] + (ym[1] - p[1])*d[1]
        if s > 1e-10:
            hits.append((s, phi))
    if not hits:
        raise GeometryError("ray trace found no forward boundary intersection")
    s, phi = min(hits)
    return phi, s


def billiard_map(domain, pt):
    """One bounce: returns (next PhasePoint, chord length)."""
    if abs(pt.zeta) > 1.0 - GLANCING_MARGIN:
        raise GlancingError(f"|zeta| = {abs(pt.zeta)} within glancing margin")
    if not domain.is_deformed:
        A, B = domain.base.A, domain.base.B
        lift, th, ze, ch = kernels.ellipse_steps_batch(
            A, B, np.array([float(pt.theta % TWO_PI)]), np.array([float(pt.zeta)]), 1)
        return PhasePoint(float(th[0]), float(ze[0])), float(ch[0])
    phi, s = _ray_trace_deformed(domain, pt.theta % TWO_PI, pt.zeta)
    d = _direction(domain, pt.theta % TWO_PI, pt.zeta)
    t2 = domain.tangent(np.atleast_1d(phi))[:, 0]
    ze2 = float(d[0]*t2[0] + d[1]*t2[1])
    return PhasePoint(float(phi), ze2), float(s)


def billiard_orbit(domain, pt, n):
    """n bounces; returns (theta lift array, zeta array, chord array)."""
    if abs(pt.zeta) > 1.0 - GLANCING_MARGIN:
        raise GlancingError(f"|zeta| = {abs(pt.zeta)} within glancing margin")
    if not domain.is_deformed:
        return kernels.ellipse_orbit(domain.base.A, domain.base.B,
                                     float(pt.theta), float(pt.zeta), int(n))
    thetas = np.empty(n + 1)
    zetas = np.empty(n + 1)
    chords = np.empty(n)
    cur = pt
    lift = float(pt.theta)
    thetas[0], zetas[0] = lift, pt.zeta
    for k in range(n):
        nxt, ch = billiard_map(domain, cur)
        lift += (nxt.theta - cur.theta) % TWO_PI
        thetas[k + 1], zetas[k + 1], chords[k] = lift, nxt.zeta, ch
        cur = nxt
    return thetas, zetas, chords


# ---------------------------------------------------------------------------
# caustic invariant and invariant curves
# ---------------------------------------------------------------------------

def caustic_invariant(domain, pt):
    """Confocal caustic parameter Z of the ray through pt (exact ellipse only)."""
    if domain.is_deformed:
        raise GeometryError("caustic invariant is defined on the exact ellipse")
    b = domain.base.b
    epsq = domain.base.eps
    z = b*pt.zeta**2 - epsq*(1.0 - pt.zeta**2)*math.sin(pt.theta)**2
    if abs(z) < FOCUS_MARGIN:
        raise FocalRayError(f"ray within focus margin, Z = {z:.3e}")
    return z


def _z_value(domain, th, ze):
    b, epsq = domain.base.b, domain.base.eps
    return b*ze**2 - epsq*(1.0 - ze**2)*np.sin(th)**2


def _z_partial_zeta(domain, th, ze):
    b, epsq = domain.base.b, domain.base.eps
    return 2.0*ze*(b + epsq*np.sin(th)**2)


def _zeta_on_level(domain, th, c, branch=1):
    b, epsq = domain.base.b, domain.base.eps
    s2 = np.sin(th)**2
    return branch*np.sqrt((c + epsq*s2)/(b + epsq*s2))


@dataclass(frozen=True)
class InvariantCurve:
    """Sampled graph zeta(theta; c) of a level {Z = c} with its Leray weight
    w(theta), du_Z = w dtheta."""
    level: float
    branch: int
    theta: np.ndarray
    zeta: np.ndarray
    weight: np.ndarray
    domain: object

    @property
    def gamma1(self):
        return np.sqrt(1.0 - self.zeta**2)

    @property
    def mass(self):
        return float(np.mean(self.weight)*TWO_PI)


def invariant_curve(domain, c, branch=1, n=1024):
    """Invariant curve at elliptic-caustic level c in (0, b).

    zeta is solved pointwise from Z(theta, zeta) = c (closed-form inversion
    plus a Newton polish); the Leray weight is |x'| / |dZ/dzeta|.
    """
    if domain.is_deformed:
        raise CurveError("invariant curves are defined on the exact ellipse")
    b = domain.base.b
    if not (0.0 < c < b):
        raise CurveError(f"level must lie in (0, b) = (0, {b}), got {c}")
    if branch not in (1, -1):
        raise CurveError("branch must be +1 or -1")
    th = np.arange(n)*TWO_PI/n
    ze = _zeta_on_level(domain, th, c, branch)
    for _ in range(2):
        ze = ze - (_z_value(domain, th, ze) - c)/_z_partial_zeta(domain, th, ze)
    if not np.all(np.isfinite(ze)) or np.abs(ze).max() >= 1.0:
        raise CurveError(f"level {c} produced an invalid graph")
    w = domain.speed(th)/np.abs(_z_partial_zeta(domain, th, ze))
    return InvariantCurve(float(c), int(branch), th, ze, w, domain)


# ---------------------------------------------------------------------------
# rotation numbers and periodic families
# ---------------------------------------------------------------------------

def _bump_weights(n):
    t = (np.arange(n) + 0.5)/n
    return np.exp(-1.0/(t*(1.0 - t)))


def rotation_number(curve, tol=1e-9, n_start=2048, max_doubling=10):
    """Rotation number in (0, 1/2] by Birkhoff averaging of boundary-angle
    increments. The average uses exponential bump weights (filtering the
    quasi-periodic remainder) and is extrapolated over orbit-length doublings
    until consecutive estimates agree below tol."""
    dom = curve.domain
    A, B = dom.base.A, dom.base.B
    i0 = int(np.argmin(np.abs(curve.theta - np.pi/2)))
    th0, ze0 = float(curve.theta[i0]), float(curve.zeta[i0])

    def omega_n(n):
        thetas, _, _ = kernels.ellipse_orbit(A, B, th0, ze0, int(n))
        w = _bump_weights(n)
        return float(np.sum(w*np.diff(thetas))/(TWO_PI*np.sum(w)))

    n = n_start
    prev = omega_n(n)
    for _ in range(max_doubling):
        n *= 2
        cur = omega_n(n)
        if abs(cur - prev) < tol:
            w = cur % 1.0
            return min(w, 1.0 - w)
        prev = cur
    raise RotationError(f"rotation average not converged below {tol}")


@dataclass(frozen=True)
class PeriodicFamily:
    """A (p, q) family of periodic orbits: winding p, bounces q, caustic level,
    common length T, and the component bookkeeping for F_T (an invariant curve
    together with its time-reversal image, except for the degenerate
    bouncing-ball orbits)."""
    p: int
    q: int
    level: float
    length: float
    length_spread: float
    kind: str                 # "curve" | "minor-bb" | "major-bb"
    n_components: int
    reversal_paired: bool
    perimeter_multiple: bool


def _closure_defect(domain, c, p, q):
    A, B = domain.base.A, domain.base.B
    th0 = np.pi/2
    ze0 = float(_zeta_on_level(domain, np.array([th0]), c)[0])
    lift, _, _, _ = kernels.ellipse_steps_batch(
        A, B, np.array([th0]), np.array([ze0]), int(q))
    return lift[0] - th0 - TWO_PI*p


def periodic_family(domain, p, q, n_check=8, perim=None):
    """Periodic family with rotation number p/q, by bisection of the q-step
    closure defect in the caustic level (monotone by the twist property)."""
    if domain.is_deformed:
        raise NoSuchFamilyError("periodic families are solved on the exact ellipse")
    p, q = int(p), int(q)
    if q < 2 or p < 1 or math.gcd(p, q) != 1 or 2*p > q:
        raise NoSuchFamilyError(f"need 0 < p/q <= 1/2 with gcd(p, q) = 1, got {p}/{q}")
    A, B = domain.base.A, domain.base.B
    b = domain.base.b
    if perim is None:
        perim = perimeter(domain)
    if 2*p == q:
        # degenerate minor-axis bouncing ball: Z = -eps through the closed form
        T = 4.0*B
        return PeriodicFamily(p, q, -domain.base.eps, T, 0.0, "minor-bb", 1, True,
                              _is_perim_multiple(T, perim))
    # families with p/q near 1/2 live exponentially close to the separatrix
    # Z -> 0+, so bisect the closure defect in log Z (geometric midpoints)
    lo, hi = b*1e-280, b*(1.0 - 1e-12)
    flo = _closure_defect(domain, lo, p, q)
    fhi = _closure_defect(domain, hi, p, q)
    if not (flo > 0.0 > fhi):
        raise NoSuchFamilyError(f"closure defect does not bracket for p/q = {p}/{q}")
    for _ in range(110):
        mid = math.sqrt(lo*hi)
        fm = _closure_defect(domain, mid, p, q)
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
    c = math.sqrt(lo*hi)
    th0 = np.arange(n_check)*TWO_PI/n_check
    ze0 = _zeta_on_level(domain, th0, c)
    _, _, _, chsum = kernels.ellipse_steps_batch(A, B, th0, ze0, q)
    T = float(np.mean(chsum))
    spread = float(chsum.max() - chsum.min())
    return PeriodicFamily(p, q, float(c), T, spread, "curve", 2, True,
                          _is_perim_multiple(T, perim))


def _is_perim_multiple(T, perim, tol=1e-9):
    m = round(T/perim)
    return m >= 1 and abs(T - m*perim) < tol*perim


def _major_bouncing_ball(domain, perim):
    T = 4.0*domain.base.A
    return PeriodicFamily(1, 2, 0.0, T, 0.0, "major-bb", 1, True,
                          _is_perim_multiple(T, perim))


def length_spectrum(domain, q_max, window=None):
    """All periodic families with q <= q_max bounces (each entry carries both
    time-reversal branches), sorted by length; bouncing balls included as
    degenerate entries; lengths at multiples of the perimeter flagged."""
    if q_max < 2:
        raise NoSuchFamilyError("q_max must be >= 2")
    perim = perimeter(domain)
    fams = [periodic_family(domain, 1, 2, perim=perim), _major_bouncing_ball(domain, perim)]
    for q in range(3, int(q_max) + 1):
        for p in range(1, (q - 1)//2 + 1):
            if math.gcd(p, q) == 1:
                fams.append(periodic_family(domain, p, q, perim=perim))
    if window is not None:
        lo, hi = window
        fams = [f for f in fams if lo <= f.length <= hi]
    return sorted(fams, key=lambda f: f.length)


@dataclass(frozen=True)
class LengthGroup:
    length: float
    families: tuple
    clean_simple: bool


def multiplicity_filter(families, tol):
    """Group families whose lengths coincide within tol. A group is
    clean-simple when it is exactly one invariant curve plus its time-reversal
    image; only those feed the rigidity pipeline."""
    fams = sorted(families, key=lambda f: f.length)
    groups = []
    cur = []
    for f in fams:
        if cur and f.length - cur[-1].length > tol:
            groups.append(cur)
            cur = []
        cur.append(f)
    if cur:
        groups.append(cur)
    out = []
    for g in groups:
        clean = len(g) == 1 and g[0].kind == "curve"
        out.append(LengthGroup(float(np.mean([f.length for f in g])), tuple(g), clean))
    return out
