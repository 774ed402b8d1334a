"""Ellipse geometry, symmetric deformation fields, and deformed domains.

Conventions used throughout the package:
  - boundary parametrization x(theta) = (A cos theta, B sin theta), A >= B > 0;
  - squared half-axes a = A^2, b = B^2 and confocal parameter eps = a - b;
  - normals point OUTWARD, and deformation fields measure displacement along
    the outward normal (all variational signs downstream are fixed against
    this choice by finite-difference oracles);
  - boundary integrals are int f(theta) |x'(theta)| dtheta.
"""
import json
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, QuadratureError

TWO_PI = 2.0*np.pi


# ---------------------------------------------------------------------------
# deformation fields
# ---------------------------------------------------------------------------

class DeformationField:
    """Normal-displacement velocity on the boundary, rho_dot(theta).

    Two modes:
      * symmetric cosine mode: rho_dot = sum_k c_k cos(2 k theta), exactly the
        smooth functions invariant under theta -> -theta and theta -> pi - theta;
      * raw sample mode: values on a uniform theta grid, evaluated through the
        trigonometric interpolant (for asymmetric test fields such as
        translations).
    """

    def __init__(self, coefficients=None, samples=None):
        if (coefficients is None) == (samples is None):
            raise ValueError("provide exactly one of coefficients or samples")
        if coefficients is not None:
            c = np.atleast_1d(np.asarray(coefficients, dtype=float))
            if c.ndim != 1:
                raise ValueError("coefficients must be 1-d")
            self._coef = c.copy()
            self._coef.flags.writeable = False
            self._samples = None
            self._ck = None
            self.symmetric = True
        else:
            v = np.atleast_1d(np.asarray(samples, dtype=float))
            if v.ndim != 1 or v.size < 4:
                raise ValueError("samples must be a 1-d array of length >= 4")
            self._samples = v.copy()
            self._samples.flags.writeable = False
            self._ck = np.fft.rfft(self._samples)
            self._coef = None
            self.symmetric = False

    @classmethod
    def from_coefficients(cls, coefficients):
        return cls(coefficients=coefficients)

    @classmethod
    def from_samples(cls, samples):
        return cls(samples=samples)

    @classmethod
    def zero(cls):
        return cls(coefficients=[0.0])

    @property
    def coefficients(self):
        return self._coef

    @property
    def samples(self):
        return self._samples

    @property
    def max_wavenumber(self):
        """Largest angular wavenumber carried by the field (resolution checks)."""
        if self._coef is not None:
            sig = np.nonzero(np.abs(self._coef) > 1e-14*max(1.0, np.abs(self._coef).max()))[0]
            return 0 if sig.size == 0 else int(2*sig.max())
        mags = np.abs(self._ck)
        sig = np.nonzero(mags > 1e-12*max(1.0, mags.max()))[0]
        return 0 if sig.size == 0 else int(sig.max())

    def eval(self, theta, order=0):
        """Value (order=0) or theta-derivative of the field."""
        theta = np.asarray(theta, dtype=float)
        scalar = theta.ndim == 0
        th = np.atleast_1d(theta)
        if self._coef is not None:
            k = 2.0*np.arange(self._coef.size)
            arg = np.outer(th, k)
            if order % 4 == 0:
                base = np.cos(arg)
            elif order % 4 == 1:
                base = -np.sin(arg)
            elif order % 4 == 2:
                base = -np.cos(arg)
            else:
                base = np.sin(arg)
            out = base @ (self._coef*k**order)
        else:
            n = self._samples.size
            k = np.arange(self._ck.size)
            coef = self._ck/n
            coef = coef*(1j*k)**order
            w = np.full(self._ck.size, 2.0)
            w[0] = 1.0
            if n % 2 == 0:
                w[-1] = 1.0 if order == 0 else 0.0
            out = (np.exp(1j*np.outer(th, k)) @ (w*coef)).real
        return float(out[0]) if scalar else out

    def __call__(self, theta):
        return self.eval(theta)

    def scaled(self, alpha):
        if self._coef is not None:
            return DeformationField(coefficients=alpha*self._coef)
        return DeformationField(samples=alpha*self._samples)

    def __mul__(self, alpha):
        return self.scaled(float(alpha))

    __rmul__ = __mul__

    def __add__(self, other):
        if self._coef is not None and other._coef is not None:
            n = max(self._coef.size, other._coef.size)
            c = np.zeros(n)
            c[:self._coef.size] += self._coef
            c[:other._coef.size] += other._coef
            return DeformationField(coefficients=c)
        if self._samples is not None and other._samples is not None \
                and self._samples.size == other._samples.size:
            return DeformationField(samples=self._samples + other._samples)
        # mixed mode: resample both on a common grid
        n = 512
        th = np.arange(n)*TWO_PI/n
        return DeformationField(samples=self.eval(th) + other.eval(th))

    def sup_norm(self, n=4096):
        th = np.arange(n)*TWO_PI/n
        return float(np.abs(self.eval(th)).max())

    def to_dict(self):
        if self._coef is not None:
            return {"kind": "cosine", "coefficients": [float(c) for c in self._coef]}
        return {"kind": "samples", "samples": [float(v) for v in self._samples]}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "cosine":
            return cls(coefficients=d["coefficients"])
        if d["kind"] == "samples":
            return cls(samples=d["samples"])
        raise ValueError(f"unknown field kind {d['kind']!r}")


def eval_deformation(field, theta):
    """Displacement of the field at boundary angle theta."""
    return field.eval(theta)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EllipseDomain:
    """Ellipse x^2/a + y^2/b = 1 with a = A^2, b = B^2."""
    A: float
    B: float

    def __post_init__(self):
        if not (self.A >= self.B > 0):
            raise GeometryError(f"need A >= B > 0, got A={self.A}, B={self.B}")

    @property
    def a(self):
        return self.A*self.A

    @property
    def b(self):
        return self.B*self.B

    @property
    def eps(self):
        """Confocal parameter a - b (0 exactly for the disk)."""
        return self.a - self.b


def _base_frame(A, B, th, need_second=False):
    """Position/derivative data of the undeformed ellipse at angles th."""
    s, c = np.sin(th), np.cos(th)
    sp = np.hypot(A*s, B*c)
    pos = np.stack([A*c, B*s])
    d1 = np.stack([-A*s, B*c])
    nrm = np.stack([B*c, A*s])/sp
    epsq = A*A - B*B
    spd1 = epsq*s*c/sp
    nrm1 = (np.stack([-B*s, A*c]) - nrm*spd1)/sp
    out = dict(pos=pos, d1=d1, sp=sp, nrm=nrm, spd1=spd1, nrm1=nrm1, s=s, c=c)
    if need_second:
        d2 = -pos
        spd2 = epsq*np.cos(2.0*th)/sp - (epsq*s*c)**2/sp**3
        nrm2 = (np.stack([-B*c, -A*s]) - 2.0*nrm1*spd1 - nrm*spd2)/sp
        out.update(d2=d2, spd2=spd2, nrm2=nrm2)
    return out


class DomainSpec:
    """An ellipse, optionally deformed by eps * rho_dot(theta) along the
    outward normal. Immutable after construction; construction rejects
    deformations past the first self-intersection."""

    def __init__(self, base, field=None, eps=0.0, check=True):
        self.base = base
        self.field = field if (field is not None and eps != 0.0) else None
        self.eps = float(eps) if self.field is not None else 0.0
        if check and self.field is not None:
            self._check_embedded()

    @property
    def is_deformed(self):
        return self.field is not None

    def _check_embedded(self):
        th = np.arange(4096)*TWO_PI/4096
        p = self.position(th)
        d1 = self._d1(th)
        cross = p[0]*d1[1] - p[1]*d1[0]
        spd = np.hypot(d1[0], d1[1])
        if cross.min() <= 0.0 or spd.min() <= 0.0:
            raise GeometryError(
                "deformed boundary loses star-shapedness (eps beyond first "
                f"self-intersection; min radial winding rate {cross.min():.3e})")

    # -- frame quantities (vectorized over theta) --

    def _disp(self, th, order=0):
        if self.field is None:
            return np.zeros_like(np.atleast_1d(th))
        return self.eps*np.atleast_1d(self.field.eval(th, order=order))

    def position(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        fr = _base_frame(self.base.A, self.base.B, th)
        return fr["pos"] + self._disp(th)*fr["nrm"]

    def _d1(self, th):
        fr = _base_frame(self.base.A, self.base.B, th)
        return fr["d1"] + self._disp(th, 1)*fr["nrm"] + self._disp(th)*fr["nrm1"]

    def _d2(self, th):
        fr = _base_frame(self.base.A, self.base.B, th, need_second=True)
        return (fr["d2"] + self._disp(th, 2)*fr["nrm"]
                + 2.0*self._disp(th, 1)*fr["nrm1"] + self._disp(th)*fr["nrm2"])

    def speed(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        d1 = self._d1(th)
        return np.hypot(d1[0], d1[1])

    def tangent(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        d1 = self._d1(th)
        return d1/np.hypot(d1[0], d1[1])

    def normal(self, theta):
        """Outward unit normal."""
        t = self.tangent(theta)
        return np.stack([t[1], -t[0]])

    def curvature(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        d1, d2 = self._d1(th), self._d2(th)
        return (d1[0]*d2[1] - d1[1]*d2[0])/np.hypot(d1[0], d1[1])**3

    def area(self):
        n = 4096
        th = np.arange(n)*TWO_PI/n
        p, d1 = self.position(th), self._d1(th)
        return float(0.5*np.mean(p[0]*d1[1] - p[1]*d1[0])*TWO_PI)

    def contains(self, x, y, margin=0.0):
        """Point-in-domain test via the star-shaped radial profile."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        phi = np.arctan2(y, x)
        th = phi.copy()
        u = np.stack([np.cos(phi), np.sin(phi)])
        for _ in range(60):
            p = self.position(th)
            h = p[0]*u[1] - p[1]*u[0]
            d1 = self._d1(th)
            dh = d1[0]*u[1] - d1[1]*u[0]
            step = h/dh
            th = th - step
            if np.abs(step).max() < 1e-14:
                break
        rb = (self.position(th)*u).sum(axis=0)
        return np.hypot(x, y) < rb - margin

    # -- serialization --

    def to_dict(self):
        return {
            "A": self.base.A,
            "B": self.base.B,
            "deformation": None if self.field is None else self.field.to_dict(),
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, d):
        base = EllipseDomain(float(d["A"]), float(d["B"]))
        field = None
        if d.get("deformation"):
            field = DeformationField.from_dict(d["deformation"])
        return cls(base, field=field, eps=float(d.get("eps", 0.0)))

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def ellipse(A, B):
    """Undeformed ellipse domain."""
    return DomainSpec(EllipseDomain(float(A), float(B)))


def deformed(A, B, field, eps):
    return DomainSpec(EllipseDomain(float(A), float(B)), field=field, eps=eps)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def boundary_point(domain, theta):
    """(position, outward unit normal, speed d(arclength)/d(theta)) at theta.

    theta is wrapped mod 2*pi; scalar input gives scalar-shaped output.
    """
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    th = np.atleast_1d(theta) % TWO_PI
    pos = domain.position(th)
    nrm = domain.normal(th)
    sp = domain.speed(th)
    if scalar:
        return pos[:, 0], nrm[:, 0], float(sp[0])
    return pos, nrm, sp


def perimeter(domain, tol=1e-12, max_level=16):
    """Boundary length by doubling trapezoid quadrature of |x'(theta)|."""
    n = 64
    prev = None
    for _ in range(max_level):
        th = np.arange(n)*TWO_PI/n
        val = float(np.mean(domain.speed(th))*TWO_PI)
        if prev is not None and abs(val - prev) <= tol*max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise QuadratureError(f"perimeter quadrature did not converge below {tol}")


def cumulative_arclength(domain, theta, n=4096):
    """Arclength s(theta) from theta=0, by spectral antiderivative of |x'|."""
    grid = np.arange(n)*TWO_PI/n
    ck = np.fft.rfft(domain.speed(grid))/n
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    k = np.arange(1, ck.size)
    w = np.full(ck.size - 1, 2.0)
    if n % 2 == 0:
        w[-1] = 1.0
    osc = (np.exp(1j*np.outer(th, k)) - 1.0) @ (w*ck[1:]/(1j*k))
    return ck[0].real*th + osc.real


def arc_to_theta(domain, s, n=4096):
    """Inverse of cumulative_arclength (Newton on the monotone arclength)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    total = cumulative_arclength(domain, np.array([TWO_PI]), n=n)[0]
    th = s/total*TWO_PI
    for _ in range(60):
        f = cumulative_arclength(domain, th, n=n) - s
        th = th - f/domain.speed(th)
        if np.abs(f).max() < 1e-13*max(1.0, total):
            break
    return th


def translation_field(domain, vx, vy, n=512):
    """rho_dot = <v, nu> for a constant vector v (sampled; spectrum-invariant)."""
    th = np.arange(n)*TWO_PI/n
    nrm = domain.normal(th)
    return DeformationField(samples=vx*nrm[0] + vy*nrm[1])


def dilation_field(domain, n=512):
    """rho_dot = <x, nu_x>, the unit-rate dilation velocity."""
    th = np.arange(n)*TWO_PI/n
    pos = domain.position(th)
    nrm = domain.normal(th)
    return DeformationField(samples=pos[0]*nrm[0] + pos[1]*nrm[1])
