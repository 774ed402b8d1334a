import json

import numpy as np
import pytest

import billispec as bs
from billispec.errors import GeometryError, QuadratureError
from billispec.geometry import arc_to_theta, cumulative_arclength

from helpers import ellipse_perimeter_series

TWO_PI = 2*np.pi


def test_boundary_point_axes(ellipse21):
    pos, nrm, sp = bs.boundary_point(ellipse21, 0.0)
    assert np.allclose(pos, [2.0, 0.0], atol=1e-15)
    assert np.allclose(nrm, [1.0, 0.0], atol=1e-15)
    pos, nrm, sp = bs.boundary_point(ellipse21, np.pi/2)
    assert np.allclose(pos, [0.0, 1.0], atol=1e-15)
    assert np.allclose(nrm, [0.0, 1.0], atol=1e-15)
    assert sp > 0


def test_boundary_point_disk_normal_is_position(disk):
    th = np.linspace(0, TWO_PI, 37)
    pos, nrm, sp = bs.boundary_point(disk, th)
    assert np.allclose(pos, nrm, atol=1e-14)
    assert np.allclose(sp, 1.0, atol=1e-14)


def test_boundary_point_wraps_theta(ellipse21):
    p1, n1, s1 = bs.boundary_point(ellipse21, 0.7)
    p2, n2, s2 = bs.boundary_point(ellipse21, 0.7 + TWO_PI)
    assert np.allclose(p1, p2, atol=1e-12)
    assert np.isclose(s1, s2)


def test_normal_orthogonal_to_tangent(ellipse21, rng):
    th = rng.uniform(0, TWO_PI, 1000)
    nrm = ellipse21.normal(th)
    tan = ellipse21.tangent(th)
    dots = np.abs(nrm[0]*tan[0] + nrm[1]*tan[1])
    assert dots.max() < 1e-14
    assert np.abs(np.hypot(nrm[0], nrm[1]) - 1).max() < 1e-14


def test_perimeter_disk_and_scaled(disk):
    assert abs(bs.perimeter(disk) - TWO_PI) < 1e-12
    assert abs(bs.perimeter(bs.ellipse(2.0, 2.0)) - 4*np.pi) < 1e-12


def test_perimeter_ellipse_vs_series_oracle(ellipse21):
    p = bs.perimeter(ellipse21)
    oracle = ellipse_perimeter_series(2.0, 1.0, n_terms=400)
    assert abs(p - oracle) < 1e-9
    assert abs(p - 9.6884482205) < 1e-9


def test_perimeter_nonconvergence_raises(ellipse21):
    # a single level leaves no convergence comparison to pass
    with pytest.raises(QuadratureError):
        bs.perimeter(ellipse21, max_level=1)


def test_eval_deformation_trivials():
    assert bs.eval_deformation(bs.DeformationField([0.0]), 1.234) == 0.0
    assert bs.eval_deformation(bs.DeformationField([1.0]), 2.5) == 1.0
    f = bs.DeformationField([0.0, 1.0])
    assert abs(bs.eval_deformation(f, np.pi/4) - np.cos(np.pi/2)) < 1e-16


def test_field_symmetry_under_both_reflections(rng):
    f = bs.DeformationField(rng.standard_normal(6))
    th = rng.uniform(0, TWO_PI, 1000)
    assert np.abs(f.eval(th) - f.eval(-th)).max() < 1e-14
    assert np.abs(f.eval(th) - f.eval(np.pi - th)).max() < 1e-14


def test_field_sample_mode_interpolates_exactly():
    th = np.arange(64)*TWO_PI/64
    vals = np.cos(3*th) + 0.5*np.sin(th)
    f = bs.DeformationField(samples=vals)
    assert not f.symmetric
    assert np.abs(f.eval(th) - vals).max() < 1e-13
    fine = np.linspace(0, TWO_PI, 301)
    assert np.abs(f.eval(fine) - (np.cos(3*fine) + 0.5*np.sin(fine))).max() < 1e-12


def test_field_derivatives():
    f = bs.DeformationField([0.0, 0.7, 0.2])
    th = np.linspace(0, TWO_PI, 57)
    d_exact = -0.7*2*np.sin(2*th) - 0.2*4*np.sin(4*th)
    assert np.abs(f.eval(th, order=1) - d_exact).max() < 1e-13
    g = bs.DeformationField(samples=np.cos(2*np.arange(128)*TWO_PI/128))
    assert np.abs(g.eval(th, order=1) + 2*np.sin(2*th)).max() < 1e-11


def test_field_arithmetic_and_norm():
    f = bs.DeformationField([1.0, 2.0])
    g = bs.DeformationField([0.0, -2.0, 1.0])
    h = f + 0.5*g
    assert np.allclose(h.coefficients, [1.0, 1.0, 0.5])
    assert abs(bs.DeformationField([0.0, 1.0]).sup_norm() - 1.0) < 1e-12


def test_deformed_frame_derivatives_match_fd(ellipse21):
    f = bs.DeformationField([0.1, 0.3, -0.2])
    dom = bs.deformed(2.0, 1.0, f, 0.05)
    th = np.linspace(0.1, TWO_PI, 11)
    d = 1e-6
    fd1 = (dom.position(th + d) - dom.position(th - d))/(2*d)
    assert np.abs(fd1 - dom._d1(th)).max() < 1e-7
    fd2 = (dom._d1(th + d) - dom._d1(th - d))/(2*d)
    assert np.abs(fd2 - dom._d2(th)).max() < 1e-6


def test_curvature_ellipse_closed_form(ellipse21):
    th = np.linspace(0, TWO_PI, 41)
    A, B = 2.0, 1.0
    sp = np.hypot(A*np.sin(th), B*np.cos(th))
    assert np.abs(ellipse21.curvature(th) - A*B/sp**3).max() < 1e-13


def test_perimeter_first_variation_is_curvature_pairing(ellipse21):
    f = bs.DeformationField([0.2, -0.4, 0.15])
    eps = 1e-5
    pp = bs.perimeter(bs.deformed(2.0, 1.0, f, +eps))
    pm = bs.perimeter(bs.deformed(2.0, 1.0, f, -eps))
    fd = (pp - pm)/(2*eps)
    th = np.arange(4096)*TWO_PI/4096
    formula = np.mean(f.eval(th)*ellipse21.curvature(th)*ellipse21.speed(th))*TWO_PI
    assert abs(fd - formula) < 1e-6*max(1.0, abs(formula))


def test_deformed_embedding_check():
    f = bs.DeformationField([0.0, 1.0])
    bs.deformed(2.0, 1.0, f, 0.05)  # fine
    with pytest.raises(GeometryError):
        bs.deformed(2.0, 1.0, f, 5.0)


def test_invalid_axes_raise():
    with pytest.raises(GeometryError):
        bs.ellipse(1.0, 2.0)
    with pytest.raises(GeometryError):
        bs.ellipse(1.0, 0.0)


def test_serialization_round_trip():
    f = bs.DeformationField([0.1, 0.2, 0.3])
    dom = bs.deformed(2.0, 1.0, f, 1e-3)
    text = dom.dumps()
    dom2 = bs.DomainSpec.loads(text)
    assert dom2.dumps() == text
    th = np.linspace(0, TWO_PI, 17)
    assert np.allclose(dom.position(th), dom2.position(th), atol=1e-16)
    plain = bs.ellipse(2.0, 1.0)
    assert bs.DomainSpec.loads(plain.dumps()).dumps() == plain.dumps()
    d = json.loads(text)
    assert set(d) == {"A", "B", "deformation", "eps"}


def test_translation_and_dilation_fields(disk, ellipse21):
    t = bs.translation_field(disk, 1.0, 0.0)
    th = np.linspace(0, TWO_PI, 33)
    assert np.abs(t.eval(th) - np.cos(th)).max() < 1e-12
    d = bs.dilation_field(disk)
    assert np.abs(d.eval(th) - 1.0).max() < 1e-12
    de = bs.dilation_field(ellipse21)
    pos = ellipse21.position(th)
    nrm = ellipse21.normal(th)
    assert np.abs(de.eval(th) - (pos[0]*nrm[0] + pos[1]*nrm[1])).max() < 1e-10


def test_arclength_and_inverse(disk, ellipse21):
    th = np.linspace(0, TWO_PI, 13)
    assert np.abs(cumulative_arclength(disk, th) - th).max() < 1e-12
    total = cumulative_arclength(ellipse21, np.array([TWO_PI]))[0]
    assert abs(total - bs.perimeter(ellipse21)) < 1e-10
    s = np.linspace(0.1, total - 0.1, 9)
    back = cumulative_arclength(ellipse21, arc_to_theta(ellipse21, s))
    assert np.abs(back - s).max() < 1e-10


def test_contains(ellipse21):
    assert ellipse21.contains(0.0, 0.0)[0]
    assert ellipse21.contains(1.9, 0.0)[0]
    assert not ellipse21.contains(2.1, 0.0)[0]
    assert not ellipse21.contains(1.5, 0.9)[0]
    f = bs.DeformationField([0.0, 1.0])
    dom = bs.deformed(2.0, 1.0, f, 0.1)
    assert dom.contains(0.0, 0.0)[0]
    assert not dom.contains(0.0, 1.05)[0]


def test_domain_area(disk, ellipse21):
    assert abs(disk.area() - np.pi) < 1e-12
    assert abs(ellipse21.area() - 2*np.pi) < 1e-12
