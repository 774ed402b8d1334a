"""Numba-compiled hot kernels (default backend).

Scalar inner loops mirror _kernels_numpy exactly; fastmath stays off so both
backends follow the same IEEE evaluation order.
"""
import numpy as np
from numba import njit

TWO_PI = 2.0*np.pi


@njit(cache=True)
def _step(A, B, th, ze):
    sth = np.sin(th)
    cth = np.cos(th)
    sp = np.hypot(A*sth, B*cth)
    tx = -A*sth/sp
    ty = B*cth/sp
    nx = -B*cth/sp
    ny = -A*sth/sp
    g = np.sqrt(1.0 - ze*ze)
    dx = ze*tx + g*nx
    dy = ze*ty + g*ny
    ex = dx/A
    ey = dy/B
    spar = -2.0*(cth*ex + sth*ey)/(ex*ex + ey*ey)
    Px = A*cth + spar*dx
    Py = B*sth + spar*dy
    th2 = np.arctan2(Py/B, Px/A)
    sth2 = np.sin(th2)
    cth2 = np.cos(th2)
    sp2 = np.hypot(A*sth2, B*cth2)
    ze2 = (dx*(-A*sth2) + dy*(B*cth2))/sp2
    return th2, ze2, spar


@njit(cache=True)
def ellipse_orbit(A, B, theta0, zeta0, n):
    thetas = np.empty(n + 1)
    zetas = np.empty(n + 1)
    chords = np.empty(n)
    th = theta0 % TWO_PI
    lift = theta0
    ze = zeta0
    thetas[0] = lift
    zetas[0] = ze
    for k in range(n):
        th2, ze2, ch = _step(A, B, th, ze)
        th2 = th2 % TWO_PI
        dth = (th2 - th) % TWO_PI
        lift += dth
        th = th2
        ze = ze2
        thetas[k + 1] = lift
        zetas[k + 1] = ze
        chords[k] = ch
    return thetas, zetas, chords


@njit(cache=True)
def ellipse_steps_batch(A, B, thetas0, zetas0, n):
    m = thetas0.shape[0]
    lift = thetas0.copy()
    th = np.empty(m)
    ze = zetas0.copy()
    chsum = np.zeros(m)
    for i in range(m):
        th[i] = thetas0[i] % TWO_PI
    for i in range(m):
        for _ in range(n):
            th2, ze2, ch = _step(A, B, th[i], ze[i])
            th2 = th2 % TWO_PI
            lift[i] += (th2 - th[i]) % TWO_PI
            chsum[i] += ch
            th[i] = th2
            ze[i] = ze2
    return lift, th, ze, chsum


@njit(cache=True)
def z_deviation(A, B, theta0, zeta0, n):
    b = B*B
    epsq = A*A - B*B
    th = theta0
    ze = zeta0
    z0 = b*ze*ze - epsq*(1.0 - ze*ze)*np.sin(th)**2
    worst = 0.0
    for _ in range(n):
        th, ze, _ = _step(A, B, th, ze)
        z = b*ze*ze - epsq*(1.0 - ze*ze)*np.sin(th)**2
        d = abs(z - z0)
        if d > worst:
            worst = d
    return worst


@njit(cache=True)
def neumaier_sum(values):
    s = 0.0
    comp = 0.0
    for i in range(values.shape[0]):
        v = values[i]
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
    return s + comp


@njit(cache=True)
def bessel_j_table(mmax, x):
    n = x.shape[0]
    out = np.zeros((mmax + 1, n))
    mstart = mmax + max(30, int(3.0*np.sqrt(mmax + 1.0)))
    for j in range(n):
        xa = abs(x[j])
        if xa < 1e-12:
            out[0, j] = 1.0
            continue
        jp = 0.0
        jc = 1e-30
        ssum = 0.0
        for m in range(mstart, 0, -1):
            jm = (2.0*m/xa)*jc - jp
            jp = jc
            jc = jm
            if m - 1 <= mmax:
                out[m - 1, j] = jc
            if (m - 1) % 2 == 0 and m - 1 > 0:
                ssum += 2.0*jc
            if abs(jc) > 1e250:
                jc *= 1e-250
                jp *= 1e-250
                ssum *= 1e-250
                for mm in range(mmax + 1):
                    out[mm, j] *= 1e-250
        norm = ssum + out[0, j]
        for mm in range(mmax + 1):
            out[mm, j] /= norm
    return out
