"""Hadamard variational formulas: eigenvalue variations per multiplicity
cluster, the Gaussian-smoothed wave-trace variation, and the Green's-kernel
variation, each paired with a finite-difference validation route.

Sign conventions (rho_dot measured along the OUTWARD normal, fixed by the
disk dilation oracle delta(lam^2) = -2 lam^2):

    Dirichlet:  delta sum lam^2 = - sum_k int (d_nu Psi_k)^2 rho_dot ds
    Neumann:    delta sum lam^2 = + sum_k int (|grad_T Psi_k|^2
                                               - lam^2 Psi_k^2) rho_dot ds

The smoothed trace variation pairs the spectral-side identity

    delta Tr cos(t sqrt(-Delta)) = -t sum_j delta(sum lam^2)_j
                                        sin(t lam_j) / (2 lam_j)

with the Gaussian window exp(-(t - T)^2 / (2 sigma^2)); the t-integral is
done in closed form per cluster and summed with compensated arithmetic.
"""
import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import (CutoffError, MatchingError, PoleError, ResolutionError)
from .geometry import DomainSpec, perimeter
from .spectral import SolverOptions, solve_spectrum

TWO_PI = 2.0*np.pi


@dataclass(frozen=True)
class EigVariation:
    """First-order variation of one multiplicity cluster: the basis-free sum
    delta(sum_k lam_k^2) over the cluster."""
    cluster_id: int
    lam2: float       # representative lam^2(0)
    size: int
    value: float


def _check_resolution(spec, fld):
    w = max(1, fld.max_wavenumber)
    if spec.theta.size < 8*w:
        raise ResolutionError(
            f"trace grid ({spec.theta.size} points) has fewer than 8 points "
            f"per oscillation of the field's top mode (wavenumber {w})")


def eig_variation(spec, fld):
    """Per-cluster Hadamard eigenvalue variations for a deformation field."""
    _check_resolution(spec, fld)
    rho = fld.eval(spec.theta)
    wq = TWO_PI/spec.theta.size
    if spec.bc == "dirichlet":
        contrib = -np.sum(spec.trace_dnu**2*(rho*spec.speed)[None, :], axis=1)*wq
    else:
        g = spec.trace_dtan**2 - spec.lam2[:, None]*spec.trace_val**2
        contrib = np.sum(g*(rho*spec.speed)[None, :], axis=1)*wq
    out = []
    for cid in range(spec.n_clusters):
        idx = spec.cluster_members(cid)
        out.append(EigVariation(cid, float(spec.lam2[idx[0]]), idx.size,
                                float(contrib[idx].sum())))
    return out


def finite_difference_variation(domain, fld, bc, h, lam_max, opts=None,
                                base=None):
    """Central-difference oracle for eig_variation.

    Solves the +/- h deformed spectra, matches eigenvalues across the three
    spectra by symmetry class and within-class rank, and differences the
    cluster sums of the base spectrum. MatchingError if the class counts
    disagree.
    """
    if domain.is_deformed:
        raise ValueError("finite differences are taken around an undeformed base")
    opts = opts or SolverOptions()
    if base is None:
        base = solve_spectrum(domain, bc, lam_max, opts)
    pad = 0.25 + 4.0*h*lam_max*fld.sup_norm()
    plus = solve_spectrum(DomainSpec(domain.base, field=fld, eps=+h), bc,
                          lam_max + pad, opts)
    minus = solve_spectrum(DomainSpec(domain.base, field=fld, eps=-h), bc,
                           lam_max + pad, opts)

    def by_class(spec):
        d = {}
        for j in range(spec.n_eigs):
            d.setdefault(spec.classes[j], []).append(spec.lam2[j])
        return {k: sorted(v) for k, v in d.items()}

    cb, cp, cm = by_class(base), by_class(plus), by_class(minus)
    for tag, lams in cb.items():
        if len(cp.get(tag, [])) < len(lams) or len(cm.get(tag, [])) < len(lams):
            raise MatchingError(
                f"class {tag}: have {len(lams)} base eigenvalues but "
                f"{len(cp.get(tag, []))}/{len(cm.get(tag, []))} at +h/-h")

    rank = {tag: 0 for tag in cb}
    fd_per_eig = np.empty(base.n_eigs)
    order = np.argsort(base.lam2, kind="stable")
    for j in order:
        tag = base.classes[j]
        r = rank[tag]
        fd_per_eig[j] = (cp[tag][r] - cm[tag][r])/(2.0*h)
        rank[tag] = r + 1

    out = []
    for cid in range(base.n_clusters):
        idx = base.cluster_members(cid)
        out.append(EigVariation(cid, float(base.lam2[idx[0]]), idx.size,
                                float(fd_per_eig[idx].sum())))
    return out


# ---------------------------------------------------------------------------
# smoothed wave-trace variation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothedTraceVariation:
    T: float
    sigma: float
    value: float
    lam_cutoff: float
    leakage_estimate: float


def _window_weight(lam, T, sigma):
    """Closed-form pairing of -t sin(t lam)/(2 lam) with the Gaussian window.

    Written in |T| so evenness of the trace variation in T holds exactly.
    """
    Ta = abs(T)
    if lam < 1e-12:
        return -math.sqrt(TWO_PI)*sigma*(Ta*Ta + sigma*sigma)/2.0
    return (-math.sqrt(TWO_PI)*sigma*math.exp(-0.5*(lam*sigma)**2)
            * (Ta*math.sin(lam*Ta) + lam*sigma*sigma*math.cos(lam*Ta))/(2.0*lam))


def trace_variation(spec, variations, T, sigma, tail_tol=1e-8):
    """Gaussian-smoothed wave-trace variation at window center T.

    The eigenvalue cutoff of `spec` must keep the Weyl-smoothed tail estimate
    below tail_tol (CutoffError otherwise). Summation is compensated and in
    fixed cluster order, so repeated evaluations are bit-identical.
    """
    lam_c = spec.lam_max
    dens = spec.domain.area()/TWO_PI
    scale = [abs(v.value)/max(v.lam2, 1.0) for v in variations
             if v.lam2 > 0.25*lam_c**2]
    k_est = max(scale) if scale else max(
        (abs(v.value)/max(v.lam2, 1.0) for v in variations), default=0.0)
    lam_tail = np.linspace(lam_c, lam_c + 15.0/max(sigma, 1e-3), 2000)
    env = (math.sqrt(TWO_PI)*sigma*np.exp(-0.5*(lam_tail*sigma)**2)
           * (abs(T) + lam_tail*sigma**2)/(2.0*lam_tail))
    leak = float(np.trapezoid(dens*lam_tail*k_est*lam_tail**2*env, lam_tail))
    if leak > tail_tol:
        raise CutoffError(
            f"Weyl tail estimate {leak:.3e} above tail_tol {tail_tol:.1e}; "
            f"raise lam_max or widen sigma")
    terms = np.array([v.value*_window_weight(math.sqrt(v.lam2), T, sigma)
                      for v in variations])
    value = kernels.neumaier_sum(terms)
    return SmoothedTraceVariation(float(T), float(sigma), float(value),
                                  float(lam_c), leak)


# ---------------------------------------------------------------------------
# Green's-kernel variation
# ---------------------------------------------------------------------------

def _accelerated_boundary_field(u, traces, folds=10):
    """Limit of the cumulative boundary field sum_j u_j t_j(q).

    The truncated Cauchy-data expansion of a Green's kernel carries a Gibbs
    oscillation in the truncation index; iterated averaging of the cumulative
    fields (after collapsing plateau terms that contribute nothing) removes
    it at first order. Returns (field, previous-fold field) for error
    estimation."""
    F = np.cumsum(u[:, None]*traces, axis=0)
    inc = np.linalg.norm(np.diff(F, axis=0), axis=1)
    scale = max(float(np.linalg.norm(F[-1])), 1e-300)
    keep = np.r_[True, inc > 1e-13*scale]
    F = F[keep]
    prev = F[-1]
    for _ in range(min(folds, F.shape[0] - 1)):
        prev = F[-1]
        F = 0.5*(F[1:] + F[:-1])
    return F[-1], prev


def greens_variation(spec, fld, lam, x, y, n_terms, gap_tol=None):
    """Hadamard variation of the Green's kernel of (-Delta - lam^2) at interior
    points x, y, through the truncated eigenfunction expansion (n_terms
    eigenfunctions).

    Dirichlet:  delta G = + int d_nu G(x, q) d_nu G(q, y) rho_dot dq
    Neumann:    delta G = - int [grad_T G . grad_T G - lam^2 G G] rho_dot dq

    Each Cauchy-data factor is accelerated in the truncation index before
    pairing, so the truncation error enters the boundary integral at first
    order. Returns (value, truncation error estimate).
    """
    _check_resolution(spec, fld)
    lam2 = lam*lam
    if gap_tol is None:
        gap_tol = 1e-6*max(1.0, lam2)
    if np.min(np.abs(spec.lam2 - lam2)) < gap_tol:
        raise PoleError(f"lam^2 = {lam2:.6g} within gap_tol of an eigenvalue")
    if not (spec.domain.contains(x[0], x[1])[0] and
            spec.domain.contains(y[0], y[1])[0]):
        raise ValueError("x and y must be interior points")
    n = min(int(n_terms), spec.n_eigs)
    rho = fld.eval(spec.theta)
    wq = (rho*spec.speed)*(TWO_PI/spec.theta.size)
    ux = np.array([float(spec.eval_interior(j, x[0], x[1])[0]) for j in range(n)])
    uy = np.array([float(spec.eval_interior(j, y[0], y[1])[0]) for j in range(n)])
    ux /= (spec.lam2[:n] - lam2)
    uy /= (spec.lam2[:n] - lam2)
    if spec.bc == "dirichlet":
        fx, fx_prev = _accelerated_boundary_field(ux, spec.trace_dnu[:n])
        fy, fy_prev = _accelerated_boundary_field(uy, spec.trace_dnu[:n])
        val = float(np.sum(fx*fy*wq))
        val_prev = float(np.sum(fx_prev*fy_prev*wq))
        return val, abs(val - val_prev) + 1e-16*abs(val)
    gx, gx_prev = _accelerated_boundary_field(ux, spec.trace_dtan[:n])
    gy, gy_prev = _accelerated_boundary_field(uy, spec.trace_dtan[:n])
    vx, vx_prev = _accelerated_boundary_field(ux, spec.trace_val[:n])
    vy, vy_prev = _accelerated_boundary_field(uy, spec.trace_val[:n])
    val = -float(np.sum((gx*gy - lam2*vx*vy)*wq))
    val_prev = -float(np.sum((gx_prev*gy_prev - lam2*vx_prev*vy_prev)*wq))
    return val, abs(val - val_prev) + 1e-16*abs(val)
