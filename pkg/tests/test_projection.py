import numpy as np
import pytest

from fwdapprox.basis import (
    BasisParams,
    cut,
    eval_g_n,
    eval_g_n_deriv,
    projector_norm_bound,
)
from fwdapprox.errors import DomainTooShort, NotSmoothEnough
from fwdapprox.projection import (
    CoeffState,
    c_kt_norm_sq,
    coefficient,
    coefficients_fft,
    commutator_apply,
    compute_C1,
    compute_C2,
    lambda_k,
    norm_alpha_span,
    power_iteration_pi_norm,
    project_pi,
    reconstruct,
    reconstruct_deriv,
)
from fwdapprox.space import Curve, norm_alpha
from fwdapprox.testcurves import smooth_bump

P = BasisParams(alpha=1.0, lam=0.5, horizon=1.0)


def basis_curve(n, x_max=1.0, n_points=2**12 + 1):
    x = np.linspace(0.0, x_max, n_points)
    return Curve(0.0, eval_g_n_deriv(P, n, x), x_max / (n_points - 1), x_max)


def test_coeff_state_validation_and_access():
    p2 = BasisParams(1.0, 0.5, 1.0, 2)
    s = CoeffState(1.0, np.arange(5, dtype=complex), p2)
    assert s.coeff(-2) == 0.0 + 0j
    assert s.coeff(2) == 4.0 + 0j
    assert s.coeff(7) == 0.0
    with pytest.raises(ValueError):
        CoeffState(0.0, np.zeros(3), p2)


def test_coeff_state_json_roundtrip():
    p2 = BasisParams(1.0, 0.5, 1.0, 2)
    s = CoeffState(1.5 + 0.0j, np.exp(1j * np.arange(5)), p2)
    t = CoeffState.from_json(s.to_json())
    assert t.params == s.params
    assert np.allclose(t.c, s.c)
    assert complex(t.c_star) == pytest.approx(complex(s.c_star))


def test_hermitian_defect():
    p1 = BasisParams(1.0, 0.5, 1.0, 1)
    real_state = CoeffState(1.0, np.array([1 - 1j, 0.5, 1 + 1j]), p1)
    assert real_state.hermitian_defect() < 1e-15
    bad = CoeffState(1.0, np.array([1 + 1j, 0.5, 1 + 1j]), p1)
    assert bad.hermitian_defect() > 1.0


def test_coefficient_biorthogonality():
    # extracting mode n from basis element g_m gives the Kronecker delta
    for m in (0, 2, -3):
        h = basis_curve(m)
        for n in range(-4, 5):
            c = coefficient(h, n, P)
            assert abs(c - (1.0 if n == m else 0.0)) < 1e-9


def test_fft_matches_scalar_quadrature():
    f = smooth_bump()
    s = coefficients_fft(f, 6, P)
    for n in (-6, -1, 0, 3):
        assert s.coeff(n) == pytest.approx(coefficient(f, n, P, n_points=2**12 + 1),
                                           abs=1e-12)
    assert complex(s.c_star) == pytest.approx(complex(f.value(0.0)))


def test_project_pi_replicates_derivative():
    f = smooth_bump()
    g = project_pi(f, P)
    x = np.array([0.3, 1.3])
    d = g.deriv(x)
    # second period carries the damping factor e^{-decay T}
    assert d[1] == pytest.approx(d[0] * np.exp(-P.decay), rel=1e-6)
    assert complex(g.value(0.0)) == pytest.approx(complex(f.value(0.0)))
    short = smooth_bump(x_max=0.5)
    with pytest.raises(DomainTooShort):
        project_pi(short, P)


def test_reconstruct_roundtrip_on_span():
    p4 = BasisParams(1.0, 0.5, 1.0, 4)
    rng = np.random.default_rng(3)
    c = rng.normal(size=9) + 1j * rng.normal(size=9)
    s = CoeffState(0.7 + 0j, c, p4)
    x = np.linspace(0, 1, 2**12 + 1)
    f = Curve(s.c_star, reconstruct_deriv(s, x), 1.0 / (x.size - 1), 1.0)
    t = lambda_k(f, 4, P)
    assert np.max(np.abs(t.c - s.c)) < 1e-9
    assert complex(t.c_star) == pytest.approx(complex(s.c_star))
    # values agree too
    xs = np.linspace(0, 1, 33)
    assert np.allclose(reconstruct(s, xs), f.value(xs), atol=1e-9)


def test_commutator_matches_closed_form():
    # the defect of truncation-then-shift on basis elements is g_n(t) times
    # the constant element, only for discarded modes
    t = 0.37
    for n, k in ((9, 4), (3, 4), (20, 16)):
        h = basis_curve(n)
        got = commutator_apply(h, k, t, P)
        expected = eval_g_n(P, n, t) if abs(n) > k else 0.0
        assert abs(got - expected) < 1e-10


def test_compute_C1_bounds_truncation_error():
    f = smooth_bump()
    C1 = compute_C1(f, P)
    assert C1 > 0.0
    big = coefficients_fft(f, 256, P, n_points=2**14 + 1)
    pb = BasisParams(1.0, 0.5, 1.0, 256)
    ns = pb.n_range()
    for k in (4, 16, 64):
        resid = CoeffState(0.0, np.where(np.abs(ns) > k, big.c, 0.0), pb)
        assert norm_alpha_span(resid) ** 2 <= C1 / k


def test_compute_C1_zero_for_constant_derivative():
    # f' constant: no curvature, only the boundary term remains
    f = Curve.from_deriv_fn(lambda x: np.full_like(x, 0.5), 1.0, x_max=1.0)
    C1 = compute_C1(f, P)
    w = np.exp(P.decay)
    expected = 0.5**2 * abs(w - 1.0) ** 2 / (np.pi**2 * P.damping_factor)
    assert C1 == pytest.approx(expected, rel=1e-6)


def test_compute_C1_rejects_rough_data():
    rng = np.random.default_rng(1)
    f = Curve(0.0, rng.normal(size=2**12 + 1), 1.0 / 2**12, 1.0)
    with pytest.raises(NotSmoothEnough):
        compute_C1(f, P)


def test_compute_C2_frozen_value():
    # T / (pi^2 (1 - e^{-2 lam T})) at T=1, lam=0.5
    assert compute_C2(P) == pytest.approx(0.16028775243460777, rel=1e-12)


def test_c_kt_bound_and_monotone_tail():
    C2 = compute_C2(P)
    for k in (8, 32):
        for t in (0.0, 0.5, 1.0):
            ce = c_kt_norm_sq(P, k, t)
            assert ce.norm_sq_bound <= C2 / k
    # larger k discards less
    a = c_kt_norm_sq(P, 8, 0.5).norm_sq_bound
    b = c_kt_norm_sq(P, 64, 0.5).norm_sq_bound
    assert b < a


def test_power_iteration_matches_projector_norm():
    est = power_iteration_pi_norm(P)
    assert est == pytest.approx(projector_norm_bound(P), rel=1e-4)


def test_norm_alpha_span_matches_direct_quadrature():
    p3 = BasisParams(1.0, 0.5, 1.0, 3)
    rng = np.random.default_rng(5)
    c = rng.normal(size=7) + 1j * rng.normal(size=7)
    s = CoeffState(0.3 + 0j, c, p3)
    # brute force: evaluate the span derivative far out and integrate
    x = np.linspace(0, 25, 2**16 + 1)
    d = reconstruct_deriv(s, x)
    val = np.trapezoid(np.abs(d) ** 2 * np.exp(x), x)
    direct = np.sqrt(abs(s.c_star) ** 2 + val)
    assert norm_alpha_span(s) == pytest.approx(direct, rel=1e-5)
