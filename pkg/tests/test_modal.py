"""Modal Volterra solver against frozen independent references.

The exponential-kernel problems reduce to constant-coefficient second-order
ODEs, so every frozen value below comes from the characteristic roots
evaluated at 40 digits (mpmath), not from any code path under test.
"""

import math

import numpy as np
import pytest

from memobs import (
    ConstantKernel,
    ExponentialKernel,
    LinearKernel,
    StabilityError,
    UniformGrid,
    ValidationError,
    ZeroKernel,
    closed_form_exp,
    nodal_set_exp_closed,
    nodal_set_numeric,
    series_solution_grid,
    solve_modal_richardson,
    solve_modal_volterra,
)

# M(t) = 2 exp(-t), lam = 4: roots -2 and -3, x(t) = 2 exp(-3t) - exp(-2t)
X_EXP21_LAM4_T1 = -0.035761146500884806
X_EXP21_LAM4_T025 = 0.33820244576939599
ZERO_EXP21_LAM4 = math.log(2.0)

# M = -1, lam = 1: x'' + x' - x = 0, golden-ratio roots
X_CONSTM1_LAM1_T1 = 0.65626859497646680
X_CONSTM1_LAM1_T2 = 0.97981084922993895

# M = 4, lam = 1: damped oscillation, omega = sqrt(15)/2
X_EXP40_LAM1_T1 = -0.36314465771780584
ZEROS_EXP40_LAM1 = (0.68067221251729416, 2.3029836829067389, 3.9252951532961837)
SPACING_EXP40_LAM1 = 1.6223114703894448  # pi / omega

# M = 4, lam = 9: discriminant 65 > 0, single sign change
ZERO_EXP40_LAM9 = 0.35984324964770766

# M(t) = t: characteristic z**3 + lam z**2 + 1 = 0; at lam = 1 the complex
# pair has positive real part, so the mode oscillates with growing amplitude.
CUBIC_LAM1_REAL = -1.46557123187676803
CUBIC_LAM1_IMAG = 0.79255199251544785


def test_march_hits_frozen_exponential_values():
    traj = solve_modal_volterra(4.0, ExponentialKernel(2.0, -1.0), 1.0, 4096)
    assert traj.x[-1] == pytest.approx(X_EXP21_LAM4_T1, abs=2e-8)
    assert traj.x[1024] == pytest.approx(X_EXP21_LAM4_T025, abs=1e-7)


def test_richardson_reaches_rounding_level():
    t, x = solve_modal_richardson(4.0, ExponentialKernel(2.0, -1.0), 1.0, 2048)
    assert x[-1] == pytest.approx(X_EXP21_LAM4_T1, abs=1e-12)


def test_march_constant_kernel_frozen():
    traj = solve_modal_volterra(1.0, ConstantKernel(-1.0), 2.0, 8192)
    assert traj.x[4096] == pytest.approx(X_CONSTM1_LAM1_T1, abs=1e-7)
    assert traj.x[-1] == pytest.approx(X_CONSTM1_LAM1_T2, abs=1e-7)


def test_march_is_second_order():
    M = ExponentialKernel(4.0, 0.0)
    errs = []
    for n in (256, 512, 1024):
        traj = solve_modal_volterra(1.0, M, 1.0, n)
        errs.append(abs(traj.x[-1] - X_EXP40_LAM1_T1))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_zero_kernel_march_is_pade_exponential():
    # with no memory the step is the (1,1) Pade approximant of exp(-h lam)
    traj = solve_modal_volterra(2.0, ZeroKernel(), 1.0, 64)
    h = 1.0 / 64
    step = (1.0 - h) / (1.0 + h)
    np.testing.assert_allclose(traj.x, step ** np.arange(65), rtol=1e-13)


def test_stability_guard():
    with pytest.raises(StabilityError):
        solve_modal_volterra(100.0, ZeroKernel(), 1.0, 16)  # h lam = 6.25
    with pytest.raises(ValidationError):
        solve_modal_volterra(-1.0, ZeroKernel(), 1.0, 64)
    with pytest.raises(ValidationError):
        solve_modal_volterra(1.0, ZeroKernel(), 1.0, 4)


def test_closed_form_exponential_frozen():
    t = np.array([0.0, 0.25, 1.0])
    x = closed_form_exp(4.0, 2.0, -1.0, t)
    assert x[0] == 1.0
    assert x[1] == pytest.approx(X_EXP21_LAM4_T025, rel=1e-14)
    assert x[2] == pytest.approx(X_EXP21_LAM4_T1, rel=1e-14)
    assert closed_form_exp(1.0, 4.0, 0.0, 1.0) == pytest.approx(
        X_EXP40_LAM1_T1, rel=1e-14
    )


def test_series_matches_frozen_value():
    grid = UniformGrid(2048, 2.0)
    x = series_solution_grid(1.0, ConstantKernel(-1.0), grid)
    assert x[1024] == pytest.approx(X_CONSTM1_LAM1_T1, abs=5e-7)
    assert x[-1] == pytest.approx(X_CONSTM1_LAM1_T2, abs=5e-7)


def test_series_zero_kernel_is_exact_exponential():
    grid = UniformGrid(256, 2.0)
    x = series_solution_grid(3.0, ZeroKernel(), grid)
    np.testing.assert_allclose(x, np.exp(-3.0 * grid.nodes()), rtol=1e-13)


def test_nodal_closed_ladder_frozen():
    ns = nodal_set_exp_closed(1.0, 4.0, 0.0, 4.5)
    np.testing.assert_allclose(ns.zeros, ZEROS_EXP40_LAM1, rtol=1e-14)
    spac = np.diff(ns.zeros)
    np.testing.assert_allclose(spac, SPACING_EXP40_LAM1, rtol=1e-14)


def test_nodal_closed_double_root_and_real_roots():
    # lam = 4 is the double-root case: x = (1 - 2t) exp(-2t), zero at 1/2
    ns4 = nodal_set_exp_closed(4.0, 4.0, 0.0, 10.0)
    np.testing.assert_allclose(ns4.zeros, [0.5], rtol=1e-14)
    # lam = 9 has two distinct negative roots and one sign change
    ns9 = nodal_set_exp_closed(9.0, 4.0, 0.0, 10.0)
    np.testing.assert_allclose(ns9.zeros, [ZERO_EXP40_LAM9], rtol=1e-13)
    # decaying-memory case: single zero at ln 2
    ns2 = nodal_set_exp_closed(4.0, 2.0, -1.0, 5.0)
    np.testing.assert_allclose(ns2.zeros, [ZERO_EXP21_LAM4], rtol=1e-13)


def test_nodal_numeric_agrees_with_ladder():
    ns = nodal_set_numeric(1.0, ExponentialKernel(4.0, 0.0), 4.5)
    assert len(ns) == 3
    np.testing.assert_allclose(ns.zeros, ZEROS_EXP40_LAM1, atol=1e-9)


def test_nodal_numeric_empty_for_zero_kernel():
    # pure decay never crosses zero; keep the window short enough that the
    # tail stays above the 1e-9 * sup tangential floor
    ns = nodal_set_numeric(4.0, ZeroKernel(), 3.0)
    assert len(ns) == 0
    assert list(ns.zeros) == []


def test_nodal_numeric_flags_underflowed_tail_as_suspect():
    # on [0, 10] the decayed tail of exp(-4t) is numerically indistinguishable
    # from a tangential zero and must be reported as a suspect, not silently
    # dropped and not refined into a sign change
    ns = nodal_set_numeric(4.0, ZeroKernel(), 10.0)
    assert len(ns) == 1
    assert ns.flags[0] == "suspected-tangential"


def test_linear_kernel_grows_with_cubic_root_rate():
    """M(t) = t feeds energy back: the slow characteristic pair sits at
    Re z = +0.2328, so zeros recur every pi/Im z and the envelope grows."""
    T = 12.0
    traj = solve_modal_volterra(1.0, LinearKernel(), T, 8192)
    ns = nodal_set_numeric(1.0, LinearKernel(), T)
    spac = np.diff(ns.zeros)
    assert len(ns) >= 3
    # the first gap still feels the decaying real-root component; the later
    # gaps settle onto the asymptotic half-period pi / Im z
    np.testing.assert_allclose(spac[-1], math.pi / CUBIC_LAM1_IMAG, rtol=1e-3)
    # growing envelope: the tail maximum dominates the early maximum
    n = len(traj.x)
    assert np.abs(traj.x[3 * n // 4 :]).max() > 2.0 * np.abs(traj.x[: n // 4]).max()


def test_nodal_validation():
    with pytest.raises(ValidationError):
        nodal_set_numeric(0.0, ZeroKernel(), 1.0)
    with pytest.raises(ValidationError):
        nodal_set_exp_closed(1.0, -4.0, 0.0, 1.0)
