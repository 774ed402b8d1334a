"""Shared oracles for the test suite (independent of the library's own
computational paths wherever they validate one)."""
import numpy as np
from scipy.special import jn_zeros, jnp_zeros


def disk_bessel_oracle(bc, lam_max):
    """Disk eigenfrequencies with multiplicity, from Bessel-zero root finding:
    j_{m,k} (Dirichlet) or j'_{m,k} (Neumann), doubled for m >= 1."""
    zs = []
    for m in range(0, 80):
        z = jn_zeros(m, 80) if bc == "dirichlet" else jnp_zeros(m, 80)
        z = z[z <= lam_max]
        if z.size == 0 and m > lam_max:
            break
        for zz in z:
            zs += [float(zz)]*(1 if m == 0 else 2)
    if bc == "neumann":
        zs.append(0.0)
    return np.sort(zs)


def ellipse_perimeter_series(A, B, n_terms=200):
    """4 A E(e^2) with the complete elliptic integral from its power series
    (independent of quadrature and of scipy.special.ellipe)."""
    m = 1.0 - (B/A)**2
    total = 1.0
    c = 1.0
    for n in range(1, n_terms):
        c *= (2*n - 1)/(2.0*n)
        total -= c*c*m**n/(2*n - 1)
    return 4.0*A*(np.pi/2)*total


def interior_l2_norm_sq(spec, j, n_u=96, n_th=512):
    """Independent interior quadrature of the squared L2 norm of
    eigenfunction j: map (u, theta) -> u * boundary(theta), Jacobian
    u * cross(p, p')."""
    dom = spec.domain
    th = np.arange(n_th)*2*np.pi/n_th
    p = dom.position(th)
    d1 = dom._d1(th)
    cross = p[0]*d1[1] - p[1]*d1[0]
    u, wu = np.polynomial.legendre.leggauss(n_u)
    u = 0.5*(u + 1.0)
    wu = 0.5*wu
    total = 0.0
    for ui, wi in zip(u, wu):
        vals = spec.eval_interior(j, ui*p[0], ui*p[1])
        total += wi*ui*np.sum(vals**2*cross)*(2*np.pi/n_th)
    return total


def fd_dirichlet_ground_state(domain, h=0.02):
    """Coarse 5-point finite-difference oracle for the first Dirichlet
    eigenvalue (O(h^2) accurate)."""
    from scipy.sparse import lil_matrix
    from scipy.sparse.linalg import eigsh
    th = np.linspace(0, 2*np.pi, 721)
    p = domain.position(th)
    xmax, ymax = np.abs(p[0]).max(), np.abs(p[1]).max()
    nx = int(2*xmax/h) + 3
    ny = int(2*ymax/h) + 3
    xs = np.linspace(-xmax - h, xmax + h, nx)
    ys = np.linspace(-ymax - h, ymax + h, ny)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = domain.contains(X.ravel(), Y.ravel()).reshape(X.shape)
    idx = -np.ones(X.shape, dtype=int)
    ii = np.nonzero(inside)
    idx[ii] = np.arange(len(ii[0]))
    n = len(ii[0])
    L = lil_matrix((n, n))
    for k, (i, j) in enumerate(zip(*ii)):
        L[k, k] = 2.0/hx**2 + 2.0/hy**2
        for di, dj, w in ((1, 0, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)):
            kk = idx[i + di, j + dj]
            if kk >= 0:
                L[k, kk] = -1.0/w**2
    vals = eigsh(L.tocsr(), k=1, which="SM",
                 return_eigenvectors=False, tol=1e-8)
    return float(vals[0])


def max_polygon_length(domain, q, winding=1, tries=6):
    """Variational oracle: maximize the perimeter of an inscribed q-gon (the
    Birkhoff periodic orbit of rotation number winding/q)."""
    from scipy.optimize import minimize
    A, B = domain.base.A, domain.base.B

    def neg_per(ths):
        x, y = A*np.cos(ths), B*np.sin(ths)
        return -np.sum(np.hypot(np.diff(np.r_[x, x[0]]),
                                np.diff(np.r_[y, y[0]])))

    best = np.inf
    for t0 in np.linspace(0.0, 2*np.pi/q, tries):
        start = t0 + np.arange(q)*2*np.pi*winding/q
        r = minimize(neg_per, start, method="Nelder-Mead",
                     options=dict(xatol=1e-13, fatol=1e-14, maxiter=40000))
        best = min(best, r.fun)
    return -best


def numerical_taylor_at_b(fvals, dvals):
    """Taylor coefficients at 0 of f from samples f(-d) on a node ladder d,
    via scaled Vandermonde interpolation (generic differentiation oracle)."""
    d0 = dvals[0]
    u = np.asarray(dvals)/d0
    V = np.vander(-u, N=len(dvals), increasing=True)
    coef = np.linalg.solve(V, np.asarray(fvals))
    fact = np.cumprod(np.r_[1.0, np.arange(1, len(dvals))])
    return coef*fact/d0**np.arange(len(dvals))
