import numpy as np
import pytest

import billispec as bs
from billispec.errors import CompletenessError
from billispec.spectral import SolverOptions, class_orders

from helpers import (disk_bessel_oracle, fd_dirichlet_ground_state,
                     interior_l2_norm_sq)

TWO_PI = 2*np.pi


def test_class_orders():
    ms, trig = class_orders("ee", 8)
    assert list(ms) == [0, 2, 4, 6, 8] and trig == "cos"
    ms, trig = class_orders("oo", 8)
    assert list(ms) == [2, 4, 6, 8] and trig == "sin"
    ms, trig = class_orders("oe", 7)
    assert list(ms) == [1, 3, 5, 7] and trig == "cos"
    ms, trig = class_orders("eo", 7)
    assert list(ms) == [1, 3, 5, 7] and trig == "sin"


def test_disk_dirichlet_matches_bessel(spec_disk_d):
    oracle = disk_bessel_oracle("dirichlet", 12.0)
    assert spec_disk_d.n_eigs == oracle.size
    rel = np.abs(np.sqrt(spec_disk_d.lam2) - oracle)/oracle
    assert rel.max() < 1e-8
    assert abs(spec_disk_d.lam2[0] - 5.7831859629) < 1e-8


def test_disk_neumann_matches_bessel(spec_disk_n):
    oracle = disk_bessel_oracle("neumann", 12.0)
    assert spec_disk_n.n_eigs == oracle.size
    rel = np.abs(np.sqrt(spec_disk_n.lam2) - oracle)/np.maximum(oracle, 1.0)
    assert rel.max() < 1e-8
    assert spec_disk_n.lam2[0] == 0.0
    # first nonzero Neumann eigenvalue (zero of J1')
    from scipy.special import jnp_zeros
    assert abs(spec_disk_n.lam2[1] - jnp_zeros(1, 1)[0]**2) < 1e-8


def test_disk_cluster_structure_stable(spec_disk_d):
    # exact double eigenvalues (m >= 1) pair across classes; the clusters
    # must not change when the gap threshold moves by 2x either way
    from billispec.spectral import _cluster
    base = _cluster(spec_disk_d.lam2, 1e-7)
    assert np.array_equal(base, _cluster(spec_disk_d.lam2, 2e-7))
    assert np.array_equal(base, _cluster(spec_disk_d.lam2, 5e-8))
    sizes = np.bincount(base)
    assert set(sizes.tolist()) <= {1, 2}
    # m = 0 modes are simple, all others double
    assert (sizes == 2).sum() > 0


def test_ellipse_ground_state_self_convergence(ellipse21):
    s1 = bs.solve_spectrum(ellipse21, "dirichlet", 2.2,
                           SolverOptions(boundary_margin=24))
    s2 = bs.solve_spectrum(ellipse21, "dirichlet", 2.2,
                           SolverOptions(boundary_margin=48, order_margin=18))
    assert abs(s1.lam2[0] - s2.lam2[0]) < 1e-8*s1.lam2[0]


def test_ellipse_ground_state_vs_fd_oracle(ellipse21, spec_ell_d):
    # staircase boundary makes the 5-point scheme O(h); Richardson over a
    # halved step restores an O(h^2)-ish oracle
    f1 = fd_dirichlet_ground_state(ellipse21, h=0.02)
    f2 = fd_dirichlet_ground_state(ellipse21, h=0.01)
    fd = 2.0*f2 - f1
    assert abs(spec_ell_d.lam2[0] - fd)/fd < 5e-3


def test_symmetry_classes_even_traces(spec_ell_d):
    # (even, even) class: the Cauchy trace is even about theta = 0 and pi/2,
    # so d/dtheta vanishes there; check via the reflected samples
    n = spec_ell_d.theta.size
    for j in range(spec_ell_d.n_eigs):
        if spec_ell_d.classes[j] != "ee":
            continue
        tr = spec_ell_d.trace_dnu[j]
        refl0 = np.roll(tr[::-1], 1)            # theta -> -theta
        scale = np.abs(tr).max()
        assert np.abs(tr - refl0).max() < 1e-7*scale
        k = n//2
        reflpi = np.roll(tr[::-1], k + 1)       # theta -> pi - theta
        assert np.abs(tr - reflpi).max() < 1e-7*scale


def test_normalization_independent_interior_quadrature(spec_ell_d, spec_ell_n):
    for spec in (spec_ell_d, spec_ell_n):
        for j in (0, 1, min(4, spec.n_eigs - 1)):
            nrm = interior_l2_norm_sq(spec, j)
            assert abs(nrm - 1.0) < 1e-6


def test_weyl_sanity(spec_ell_d, spec_ell_n):
    assert spec_ell_d.weyl_deviation() < 0.25
    assert spec_ell_n.weyl_deviation() < 0.25


def test_boundary_cauchy_data_shapes(spec_ell_d, spec_ell_n):
    th, dnu, sp = bs.boundary_cauchy_data(spec_ell_d, 0)
    assert th.shape == dnu.shape == sp.shape
    th, val, dtan, sp = bs.boundary_cauchy_data(spec_ell_n, 1)
    assert th.shape == val.shape == dtan.shape
    with pytest.raises(IndexError):
        bs.boundary_cauchy_data(spec_ell_d, spec_ell_d.n_eigs)


def test_dirichlet_trace_rellich_identity(spec_disk_d):
    # int (dnu Psi)^2 ds = 2 lam^2 / R for the L2-normalized disk modes
    for j in range(6):
        val = spec_disk_d.boundary_quadrature(spec_disk_d.trace_dnu[j]**2)
        assert abs(val - 2*spec_disk_d.lam2[j]) < 1e-7*spec_disk_d.lam2[j]


def test_disk_first_mode_trace_constant(spec_disk_d):
    tr = spec_disk_d.trace_dnu[0]
    assert np.abs(tr - tr.mean()).max() < 1e-9*abs(tr.mean())


def test_neumann_radial_mode_has_zero_tangential_trace(spec_disk_n):
    # the first m = 0, k = 1 Neumann mode (J0' zero at 3.8317)
    from scipy.special import jnp_zeros
    lam2 = jnp_zeros(0, 1)[0]**2
    j = int(np.argmin(np.abs(spec_disk_n.lam2 - lam2)))
    assert np.abs(spec_disk_n.trace_dtan[j]).max() < 1e-8
    tr = spec_disk_n.trace_val[j]
    assert np.abs(tr - tr.mean()).max() < 1e-8*abs(tr.mean())


def test_deformed_domain_spectrum_shift(ellipse21):
    # first-order shift under a small deformation moves eigenvalues by O(eps)
    f = bs.DeformationField([0.0, 1.0])
    eps = 1e-3
    sp = bs.solve_spectrum(bs.deformed(2.0, 1.0, f, +eps), "dirichlet", 2.2)
    sm = bs.solve_spectrum(bs.deformed(2.0, 1.0, f, -eps), "dirichlet", 2.2)
    s0 = bs.solve_spectrum(ellipse21, "dirichlet", 2.2)
    assert abs(sp.lam2[0] - s0.lam2[0]) < 0.05
    assert abs(0.5*(sp.lam2[0] + sm.lam2[0]) - s0.lam2[0]) < 5e-5


def test_spectrum_save_load_roundtrip(tmp_path, spec_ell_d):
    path = tmp_path/"spec.json"
    bs.save_spectrum(spec_ell_d, str(path))
    back = bs.load_spectrum(str(path))
    assert back.bc == spec_ell_d.bc
    assert np.array_equal(back.lam2, spec_ell_d.lam2)
    assert back.classes == spec_ell_d.classes
    assert np.array_equal(back.trace_dnu, spec_ell_d.trace_dnu)
    assert np.array_equal(back.cluster_ids, spec_ell_d.cluster_ids)
    # loaded spectra still evaluate interior points (coefficients round-trip)
    x, y = np.array([0.3]), np.array([0.2])
    assert abs(back.eval_interior(0, x, y)[0]
               - spec_ell_d.eval_interior(0, x, y)[0]) < 1e-14


def test_completeness_guard_raises():
    # sabotaged acceptance threshold rejects every dip; the class Weyl count
    # must catch the resulting deficit
    opts = SolverOptions(accept_sigma=1e-30, rescan_rounds=0, weyl_slack=0.0)
    with pytest.raises(CompletenessError):
        bs.solve_spectrum(bs.ellipse(1.0, 1.0), "dirichlet", 9.0, opts)


def test_solver_rejects_bad_bc(ellipse21):
    with pytest.raises(ValueError):
        bs.solve_spectrum(ellipse21, "robin", 5.0)
