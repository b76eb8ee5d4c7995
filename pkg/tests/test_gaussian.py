import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tubekernels.errors import DimensionError, DomainError
from tubekernels.gaussian import (ComplexQuadratic, SplitDims, a_chi, a_chi_quadratic, diag_case_integrals,
                                  gauss_integral, sqrt_det_continued)
from tubekernels.symplectic import psi2, shear, unitary_embedding
from tubekernels.validator import hermite_tensor_quadrature, random_quadratic


@pytest.mark.parametrize("m", [1, 2, 5])
def test_standard_gaussian(m):
    assert gauss_integral(ComplexQuadratic(np.eye(m))) == pytest.approx((2 * np.pi) ** (m / 2), rel=1e-14)


def test_one_dimensional_exponential():
    assert gauss_integral(ComplexQuadratic(2 * np.eye(1))) == pytest.approx(math.sqrt(math.pi), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.2, 5.0), s=st.floats(-5.0, 5.0), br=st.floats(-1, 1), bi=st.floats(-1, 1))
def test_one_dimensional_against_quad(a, s, br, bi):
    q = ComplexQuadratic(np.array([[a + 1j * s]]), np.array([br + 1j * bi]), 0.1)

    def f(u, part):
        z = np.exp(q.evaluate(np.array([u])))
        return z.real if part == 0 else z.imag

    lim = 40 / math.sqrt(a)
    re = integrate.quad(f, -lim, lim, args=(0,), limit=400, epsabs=1e-13)[0]
    im = integrate.quad(f, -lim, lim, args=(1,), limit=400, epsabs=1e-13)[0]
    assert abs(gauss_integral(q) - (re + 1j * im)) <= 1e-8 * max(1.0, abs(re + 1j * im))


def test_branch_is_continuous_for_large_imaginary_part():
    # det^{1/2} of 1 + i s for s -> +-inf stays in the right half plane
    for s in (-1e3, -10.0, 10.0, 1e3):
        r = sqrt_det_continued(np.array([[1 + 1j * s]]))
        assert r.real > 0
        assert r ** 2 == pytest.approx(1 + 1j * s)


@pytest.mark.parametrize("seed", range(6))
def test_random_instances_against_tensor_quadrature(seed):
    rng = np.random.default_rng(seed)
    m = 1 + seed % 4
    q = random_quadratic(m, rng)
    assert abs(gauss_integral(q) - hermite_tensor_quadrature(q, 24)) <= 1e-8 * abs(gauss_integral(q))


def test_six_dimensional_instance():
    q = random_quadratic(6, np.random.default_rng(11))
    ref = hermite_tensor_quadrature(q, 14)
    assert abs(gauss_integral(q) - ref) <= 1e-8 * abs(ref)


def test_domain_errors():
    with pytest.raises(DomainError):
        gauss_integral(ComplexQuadratic(np.array([[1.0, 0.5], [0.0, 1.0]])))
    with pytest.raises(DomainError):
        gauss_integral(ComplexQuadratic(np.diag([1.0, -1.0])))
    with pytest.raises(DimensionError):
        gauss_integral(ComplexQuadratic(np.eye(2), np.zeros(3)))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_a_chi_identity_and_orthogonal(d):
    rng = np.random.default_rng(d)
    n = d - 1
    U = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))[0]
    for k in range(d):
        dims = SplitDims(d, k)
        assert a_chi(np.eye(2 * n), dims) == pytest.approx(math.pi ** n, rel=1e-12)
        assert a_chi(unitary_embedding(U), dims) == pytest.approx(math.pi ** n, rel=1e-12)


def test_a_chi_shear_against_direct_quadrature():
    B = shear(np.array([[0.7]]))
    dims = SplitDims(2, 0)
    # horizontal block only: exponent -|u|^2 / 2 - |B u|^2 / 2
    f = lambda y, x: math.exp(-0.5 * (x * x + y * y) - 0.5 * ((x + 0.7 * y) ** 2 + y * y))  # noqa: E731
    ref = integrate.dblquad(f, -15, 15, -15, 15, epsabs=1e-13, epsrel=1e-12)[0]
    assert abs(a_chi(B, dims) - ref) <= 1e-6 * ref


def test_a_chi_requires_symplectic():
    with pytest.raises(DomainError):
        a_chi(np.diag([2.0, 1.0]), SplitDims(2, 0))


def test_a_chi_quadratic_layout():
    dims = SplitDims(3, 1)
    M = a_chi_quadratic(np.eye(4), dims).M
    assert M[2, 2] == 3 and M[0, 0] == 1 and M[1, 1] == 2
    assert M[0, 2] == 1j and M[2, 0] == 1j


def test_split_roundtrip():
    dims = SplitDims(4, 2)
    w = np.arange(6.0)
    t, v, h = dims.split(w)
    np.testing.assert_array_equal(t, [3, 4])
    np.testing.assert_array_equal(v, [0, 1])
    np.testing.assert_array_equal(h, [2, 5])
    np.testing.assert_array_equal(dims.join(t, v, h), w)


def test_diag_integrals_at_zero():
    for d, k in [(2, 0), (2, 1), (3, 1), (4, 2)]:
        res = diag_case_integrals(SplitDims(d, k), np.zeros(2 * d - 2), np.zeros(2 * d - 2))
        assert res.horizontal == pytest.approx(math.pi ** (d - 1 - k))
        assert res.vertical_transverse == pytest.approx(math.pi ** k)
        assert res.max_discrepancy() < 1e-12


def test_diag_horizontal_equal_vectors():
    dims = SplitDims(3, 1)
    v = dims.join(t=[0.0], v=[0.4], h=[0.3, -0.8])
    res = diag_case_integrals(dims, v, v)
    assert res.horizontal == pytest.approx(math.pi)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_diag_integrals_match_engine(seed):
    rng = np.random.default_rng(seed)
    dims = SplitDims(3, 1)
    v1, v2 = 0.6 * rng.normal(size=(2, 4))
    res = diag_case_integrals(dims, v1, v2)
    assert res.max_discrepancy() <= 1e-10
    _, _, h1 = dims.split(v1)
    _, _, h2 = dims.split(v2)
    assert res.horizontal == pytest.approx(math.pi * np.exp(psi2(h1, h2)))
