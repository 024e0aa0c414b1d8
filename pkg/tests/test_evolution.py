import math

import numpy as np
import pytest

from memobs import (
    ExponentialKernel,
    ModalCache,
    SpectralBasis,
    SpectralField,
    ValidationError,
    ZeroKernel,
    decomposition_residual,
    propagate,
)

X_EXP21_LAM4_T1 = -0.035761146500884806  # roots -2, -3 at 40 digits


def test_cache_at_time_zero():
    cache = ModalCache()
    assert cache.value_and_sup(ZeroKernel(), 5.0, 0.0) == (1.0, 1.0)
    assert len(cache) == 0  # t = 0 never stores an entry


def test_cache_hits_and_policy_keys(cache, exp_kernel):
    c = ModalCache()
    v1 = c.value(exp_kernel, 4.0, 0.7)
    n1 = len(c)
    v2 = c.value(exp_kernel, 4.0, 0.7)
    assert v2 == v1 and len(c) == n1
    # a different step policy is a different entry, never a silent shadow
    c.value(exp_kernel, 4.0, 0.7, hlam_max=0.5)
    assert len(c) == n1 + 1


def test_cache_threads_match_sequential(exp_kernel):
    lams = np.array([1.0, 4.0, 9.0, 16.0, 25.0])
    seq = ModalCache().values(exp_kernel, lams, 0.8, threads=1)
    par = ModalCache().values(exp_kernel, lams, 0.8, threads=3)
    np.testing.assert_array_equal(seq, par)


def test_cache_store_round_trip(tmp_path, exp_kernel):
    path = str(tmp_path / "modal_cache.json")
    c = ModalCache(store_path=path)
    v = c.value_and_sup(exp_kernel, 9.0, 0.5)
    c.save()
    fresh = ModalCache(store_path=path)
    assert len(fresh) == len(c)
    assert fresh.value_and_sup(exp_kernel, 9.0, 0.5) == v


def test_cache_sup_dominates_endpoint(exp_kernel):
    val, sup = ModalCache().value_and_sup(exp_kernel, 4.0, 1.5)
    assert sup >= abs(val)
    assert sup <= 1.0 + 1e-12  # |x| starts at 1 and these modes decay


def test_propagate_zero_kernel_is_heat_decay(cache):
    basis = SpectralBasis(math.pi, 6)
    a = np.array([1.0, -2.0, 0.5, 0.0, 3.0, -1.0])
    out = propagate(SpectralField(basis, a), ZeroKernel(), 0.7, cache=cache)
    np.testing.assert_allclose(
        out.coefficients, a * np.exp(-0.7 * basis.eigenvalues), rtol=1e-9, atol=1e-12
    )


def test_propagate_matches_closed_form_mode():
    # L = pi/2 puts lambda_1 = 4; the frozen value is the two-root solution
    basis = SpectralBasis(math.pi / 2, 2)
    y0 = SpectralField(basis, [2.0, 0.0])
    out = propagate(y0, ExponentialKernel(2.0, -1.0), 1.0)
    assert out.coefficients[0] == pytest.approx(2.0 * X_EXP21_LAM4_T1, rel=1e-9)
    assert out.coefficients[1] == 0.0


def test_propagate_time_zero_copies():
    basis = SpectralBasis(1.0, 3)
    y0 = SpectralField(basis, [1.0, 2.0, 3.0])
    out = propagate(y0, ZeroKernel(), 0.0)
    np.testing.assert_array_equal(out.coefficients, y0.coefficients)
    out.coefficients[0] = -5.0
    assert y0.coefficients[0] == 1.0
    with pytest.raises(ValidationError):
        propagate(y0, ZeroKernel(), -0.1)


def test_decomposition_residual_decays(cache, exp_kernel):
    basis = SpectralBasis(math.pi, 16)
    table = decomposition_residual(exp_kernel, 1.0, basis, cache=cache)
    assert table.slope <= -0.8
    # residual lambda_k^2 x_k(1) + M(1) collapses toward zero up the spectrum
    assert abs(table.residuals[-1]) < abs(table.residuals[3])
    assert table.sup_lambda2_x > 0
    rows = table.rows
    assert len(rows) == 16 and len(rows[0]) == 4


def test_decomposition_residual_validation(exp_kernel):
    basis = SpectralBasis(math.pi, 16)
    with pytest.raises(ValidationError):
        decomposition_residual(exp_kernel, 0.0, basis)
    with pytest.raises(ValidationError):
        decomposition_residual(exp_kernel, 1.0, basis, ks=[1, 2, 3])
    with pytest.raises(ValidationError):
        # modes 8..11 span less than a decade in lambda
        decomposition_residual(exp_kernel, 1.0, basis, ks=[8, 9, 10, 11] * 2)
