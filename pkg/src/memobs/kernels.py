"""Memory-kernel representations, convolution powers, and the series kernel.

A kernel M weights the history integral int_0^t M(t-s) y(s) ds added to the
heat equation.  Supported variants: Zero, Constant(value), Linear (M(t) = t),
Exponential(c, alpha) with M(t) = c exp(alpha t) and c > 0, and Tabulated
data interpolated by a natural cubic spline (twice continuously
differentiable, as the well-posedness assumption on M requires).

The resolvent-type series kernel is

    K_M(t, s) = sum_{j>=1} (s**j / j!) (-M)^{*j}(t - s),

where (-M)^{*j} is the j-fold convolution power of -M.  Powers are computed
by trapezoidal product integration on a uniform grid, and the series is
truncated once the sup norm of the added term drops below a tolerance.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import SeriesDivergenceError, ValidationError

MAX_SERIES_TERMS = 64


class MemoryKernel:
    """Base class for memory kernels; subclasses are immutable."""

    t_max = math.inf

    def __call__(self, t):
        raise NotImplementedError

    def spec_dict(self) -> dict:
        raise NotImplementedError

    def cache_key(self) -> str:
        blob = json.dumps(self.spec_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def __eq__(self, other) -> bool:
        return isinstance(other, MemoryKernel) and self.spec_dict() == other.spec_dict()

    def __hash__(self) -> int:
        return hash(self.cache_key())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec_dict()})"


class ZeroKernel(MemoryKernel):
    def __call__(self, t):
        tv = np.asarray(t, dtype=float)
        out = np.zeros_like(tv)
        return float(out) if np.isscalar(t) else out

    def spec_dict(self) -> dict:
        return {"kind": "zero"}


class ConstantKernel(MemoryKernel):
    def __init__(self, value: float):
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError("constant kernel value must be finite")
        self.value = value

    def __call__(self, t):
        tv = np.asarray(t, dtype=float)
        out = np.full_like(tv, self.value)
        return float(out) if np.isscalar(t) else out

    def spec_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}


class LinearKernel(MemoryKernel):
    """M(t) = t."""

    def __call__(self, t):
        tv = np.asarray(t, dtype=float)
        return float(tv) if np.isscalar(t) else tv.copy()

    def spec_dict(self) -> dict:
        return {"kind": "linear"}


class ExponentialKernel(MemoryKernel):
    """M(t) = c exp(alpha t) with c > 0."""

    def __init__(self, c: float, alpha: float):
        c = float(c)
        alpha = float(alpha)
        if not math.isfinite(c) or c <= 0:
            raise ValidationError("exponential kernel requires c > 0")
        if not math.isfinite(alpha):
            raise ValidationError("alpha must be finite")
        self.c = c
        self.alpha = alpha

    def __call__(self, t):
        tv = np.asarray(t, dtype=float)
        out = self.c * np.exp(self.alpha * tv)
        return float(out) if np.isscalar(t) else out

    def spec_dict(self) -> dict:
        return {"kind": "exponential", "c": self.c, "alpha": self.alpha}


class TabulatedKernel(MemoryKernel):
    """Sampled kernel values joined by a natural cubic spline."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValidationError("times and values must be 1-D arrays of equal length")
        if times.size < 4:
            raise ValidationError("tabulated kernel needs at least 4 samples")
        if times[0] != 0.0:
            raise ValidationError("tabulated grid must start at t = 0")
        if not np.all(np.diff(times) > 0):
            raise ValidationError("tabulated grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError("tabulated values must be finite")
        self.times = times
        self.values = values
        self.t_max = float(times[-1])
        self._spline = CubicSpline(times, values, bc_type="natural")

    def __call__(self, t):
        tv = np.asarray(t, dtype=float)
        if np.any(tv < -1e-12) or np.any(tv > self.t_max * (1 + 1e-12) + 1e-12):
            raise ValidationError(
                f"evaluation outside the tabulated range [0, {self.t_max}]"
            )
        out = self._spline(np.clip(tv, 0.0, self.t_max))
        return float(out) if np.isscalar(t) else out

    def spec_dict(self) -> dict:
        return {
            "kind": "tabulated",
            "times": [float(x) for x in self.times],
            "values": [float(x) for x in self.values],
        }


_KINDS = {
    "zero": lambda d: ZeroKernel(),
    "constant": lambda d: ConstantKernel(d["value"]),
    "linear": lambda d: LinearKernel(),
    "exponential": lambda d: ExponentialKernel(d["c"], d["alpha"]),
    "tabulated": lambda d: TabulatedKernel(d["times"], d["values"]),
}

_KIND_FIELDS = {
    "zero": set(),
    "constant": {"value"},
    "linear": set(),
    "exponential": {"c", "alpha"},
    "tabulated": {"times", "values"},
}


def kernel_from_spec(spec: dict) -> MemoryKernel:
    """Build a kernel from its JSON specification, e.g. {"kind": "linear"}."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError('kernel spec must be an object with a "kind" entry')
    kind = spec["kind"]
    if kind not in _KINDS:
        raise ValidationError(f"unknown kernel kind {kind!r}")
    extra = set(spec) - _KIND_FIELDS[kind] - {"kind"}
    if extra:
        raise ValidationError(f"unknown kernel fields for {kind!r}: {sorted(extra)}")
    missing = _KIND_FIELDS[kind] - set(spec)
    if missing:
        raise ValidationError(f"kernel {kind!r} missing fields: {sorted(missing)}")
    try:
        return _KINDS[kind](spec)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad kernel spec: {exc}") from exc


def eval_kernel(M: MemoryKernel, t):
    """Evaluate M(t) for t >= 0 (and t <= t_max for tabulated kernels)."""
    tv = np.asarray(t, dtype=float)
    if np.any(tv < -1e-12):
        raise ValidationError("kernel argument must be nonnegative")
    return M(t)


@dataclass(frozen=True)
class UniformGrid:
    """Uniform time grid 0 = t_0 < ... < t_n = T."""

    n_steps: int
    T: float

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError("n_steps must be a positive integer")
        if not math.isfinite(self.T) or self.T <= 0:
            raise ValidationError("grid horizon T must be positive")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "T", float(self.T))

    @property
    def h(self) -> float:
        return self.T / self.n_steps

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)


@dataclass
class KernelGridFunction:
    """Function samples on a uniform grid; 1-D in t or 2-D in (t, s)."""

    grid: UniformGrid
    values: np.ndarray
    terms_used: int | None = None
    converged: bool | None = None

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def T(self) -> float:
        return self.grid.T


def _kernel_samples(M: MemoryKernel, grid: UniformGrid) -> np.ndarray:
    if grid.T > M.t_max * (1 + 1e-12):
        raise ValidationError(
            f"grid horizon {grid.T} exceeds the kernel range [0, {M.t_max}]"
        )
    return np.asarray(M(grid.nodes()), dtype=float)


def convolution_power(M: MemoryKernel, j: int, grid: UniformGrid) -> KernelGridFunction:
    """Sample (-M)^{*j} on the grid.

    The first power is -M at the nodes; each further power applies the
    trapezoidal product integral (f*g)(tau_i) = h (sum_r f_{i-r} g_r
    - (f_i g_0 + f_0 g_i)/2), which is second-order accurate.
    """
    if int(j) != j or j < 1:
        raise ValidationError("convolution power index must be a positive integer")
    f = -_kernel_samples(M, grid)
    cur = f.copy()
    for _ in range(int(j) - 1):
        cur = _conv_step(f, cur, grid.h)
    return KernelGridFunction(grid, cur)


def _conv_step(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    n1 = f.shape[0]
    full = np.convolve(f, g)[:n1]
    return h * (full - 0.5 * (f * g[0] + f[0] * g))


def kernel_series_K(
    M: MemoryKernel,
    grid: UniformGrid,
    tol: float = 1e-12,
    max_terms: int = MAX_SERIES_TERMS,
) -> KernelGridFunction:
    """Partial sums of K_M(t, s) on the grid triangle t >= s.

    Terms are added until a rigorous bound on the next term's sup norm,
    max_j |s_j**m / m!| * max_i |(-M)^{*m}(tau_i)|, falls below ``tol``.  If
    ``max_terms`` terms do not reach the tolerance the result carries
    ``converged=False``; the series is entire in s for smooth kernels, so
    non-convergence signals an overly coarse grid or an extreme kernel.
    """
    if tol <= 0:
        raise ValidationError("series tolerance must be positive")
    n = grid.n_steps
    h = grid.h
    s_nodes = grid.nodes()
    f = -_kernel_samples(M, grid)

    idx = np.arange(n + 1)
    D = idx[:, None] - idx[None, :]
    lower = D >= 0
    Dc = np.where(lower, D, 0)

    K = np.zeros((n + 1, n + 1))
    conv = f.copy()
    s_pow = s_nodes.copy()  # s**m / m! at m = 1
    converged = False
    terms = 0
    for m in range(1, max_terms + 1):
        term_bound = float(np.max(np.abs(s_pow)) * np.max(np.abs(conv)))
        K += s_pow[None, :] * np.where(lower, conv[Dc], 0.0)
        terms = m
        if term_bound <= tol:
            converged = True
            break
        conv = _conv_step(f, conv, h)
        s_pow = s_pow * s_nodes / (m + 1)
    return KernelGridFunction(grid, K, terms_used=terms, converged=converged)


def require_converged(series: KernelGridFunction) -> KernelGridFunction:
    if series.converged is False:
        raise SeriesDivergenceError(
            f"kernel series did not converge within {series.terms_used} terms"
        )
    return series
