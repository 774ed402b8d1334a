"""Pure-numpy reference kernels.

Same call signatures as the numba implementations; selected via
BILLISPEC_BACKEND=numpy (see backend.py). Orbit iteration is sequential per
orbit, so the numpy path vectorizes across batch elements instead.
"""
import numpy as np

TWO_PI = 2.0*np.pi


def _step_arrays(A, B, th, ze):
    """One exact-ellipse billiard step for arrays th, ze. Returns th2, ze2, chord."""
    sth, cth = np.sin(th), np.cos(th)
    sp = np.hypot(A*sth, B*cth)
    tx, ty = -A*sth/sp, B*cth/sp
    nx, ny = -B*cth/sp, -A*sth/sp
    g = np.sqrt(1.0 - ze*ze)
    dx = ze*tx + g*nx
    dy = ze*ty + g*ny
    ex, ey = dx/A, dy/B
    spar = -2.0*(cth*ex + sth*ey)/(ex*ex + ey*ey)
    Px = A*cth + spar*dx
    Py = B*sth + spar*dy
    th2 = np.arctan2(Py/B, Px/A)
    sth2, cth2 = np.sin(th2), np.cos(th2)
    sp2 = np.hypot(A*sth2, B*cth2)
    ze2 = (dx*(-A*sth2) + dy*(B*cth2))/sp2
    return th2, ze2, spar


def ellipse_orbit(A, B, theta0, zeta0, n):
    """Iterate the exact-ellipse map n times from a single phase point.

    Returns (thetas, zetas, chords) with thetas a continuous lift (theta0 at
    index 0, increments in (0, 2*pi)).
    """
    thetas = np.empty(n + 1)
    zetas = np.empty(n + 1)
    chords = np.empty(n)
    th = float(theta0) % TWO_PI
    lift = float(theta0)
    ze = float(zeta0)
    thetas[0] = lift
    zetas[0] = ze
    for k in range(n):
        th2, ze2, ch = _step_arrays(A, B, np.float64(th), np.float64(ze))
        th2 = float(th2) % TWO_PI
        dth = (th2 - th) % TWO_PI
        lift += dth
        th, ze = th2, float(ze2)
        thetas[k + 1] = lift
        zetas[k + 1] = ze
        chords[k] = float(ch)
    return thetas, zetas, chords


def ellipse_steps_batch(A, B, thetas0, zetas0, n):
    """Advance a batch of phase points n steps; accumulate theta lifts.

    Returns (lifts, thetas, zetas, chord_sums).
    """
    th = np.asarray(thetas0, dtype=float) % TWO_PI
    ze = np.asarray(zetas0, dtype=float).copy()
    lift = np.asarray(thetas0, dtype=float).copy()
    chsum = np.zeros_like(lift)
    for _ in range(n):
        th2, ze2, ch = _step_arrays(A, B, th, ze)
        th2 = th2 % TWO_PI
        lift += (th2 - th) % TWO_PI
        chsum += ch
        th, ze = th2, ze2
    return lift, th, ze, chsum


def z_deviation(A, B, theta0, zeta0, n):
    """Max |Z(orbit) - Z(start)| over n iterates of the exact-ellipse map."""
    b = B*B
    epsq = A*A - B*B
    th, ze = float(theta0), float(zeta0)
    z0 = b*ze*ze - epsq*(1.0 - ze*ze)*np.sin(th)**2
    worst = 0.0
    for _ in range(n):
        th2, ze2, _ = _step_arrays(A, B, np.float64(th), np.float64(ze))
        th, ze = float(th2), float(ze2)
        z = b*ze*ze - epsq*(1.0 - ze*ze)*np.sin(th)**2
        worst = max(worst, abs(z - z0))
    return worst


def neumaier_sum(values):
    """Compensated (Neumaier) summation in fixed order."""
    s = 0.0
    comp = 0.0
    for v in values:
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
    return s + comp


def bessel_j_table(mmax, x):
    """J_m(x) for m = 0..mmax on an array x, by Miller backward recurrence.

    Stable for the full range used here (x up to a few hundred); columns with
    x below 1e-12 fall back to the leading series term.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    out = np.zeros((mmax + 1, n))
    tiny = np.abs(x) < 1e-12
    xs = np.where(tiny, 1.0, np.abs(x))
    mstart = mmax + max(30, int(3.0*np.sqrt(mmax + 1.0)))
    jp = np.zeros(n)
    jc = np.full(n, 1e-30)
    ssum = np.zeros(n)
    for m in range(mstart, 0, -1):
        jm = (2.0*m/xs)*jc - jp
        jp, jc = jc, jm
        if m - 1 <= mmax:
            out[m - 1] = jc
        if (m - 1) % 2 == 0 and m - 1 > 0:
            ssum += 2.0*jc
        big = np.abs(jc) > 1e250
        if big.any():
            jc = np.where(big, jc*1e-250, jc)
            jp = np.where(big, jp*1e-250, jp)
            ssum = np.where(big, ssum*1e-250, ssum)
            out[:, big] *= 1e-250
    norm = ssum + out[0]
    out /= norm
    if tiny.any():
        out[:, tiny] = 0.0
        out[0, tiny] = 1.0
    return out
