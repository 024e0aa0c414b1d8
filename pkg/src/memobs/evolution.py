"""Propagation of spectral fields and the kernel-decomposition residual.

For initial coefficients a_k the solution of the memory equation at time t
has coefficients a_k x_k(t), where x_k solves the modal Volterra problem with
lam = lambda_k.  For fixed t > 0 the solution map behaves like
-M(t) A^{-2} plus a remainder one power of lambda smaller, so
lambda_k^2 x_k(t) + M(t) should decay like 1/lambda_k; the residual table
measures exactly that.

Modal endpoint values are expensive at large lambda, so they are cached.
Every cache entry records the full resolution policy and is obtained from a
Richardson pair (n and 2n steps), which cancels the leading h^2 error of the
product-trapezoidal march.
"""

from __future__ import annotations

import json
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kernels import MemoryKernel
from .modal import solve_modal_richardson
from .spectral import SpectralBasis, SpectralField

DEFAULT_HLAM_MAX = 0.25
DEFAULT_N_MIN = 1024


class ModalCache:
    """Cache of modal endpoint values keyed by kernel, lam, time, and policy.

    Values are pairs (x(t), sup |x| on [0, t]) from Richardson-extrapolated
    solves with n = max(n_min, ceil(t lam / hlam_max)) steps.  An optional
    backing file persists entries across runs; keys embed exact float hex so a
    loaded entry can never silently shadow a different configuration.
    """

    def __init__(
        self,
        store_path: str | None = None,
        hlam_max: float = DEFAULT_HLAM_MAX,
        n_min: int = DEFAULT_N_MIN,
    ):
        if hlam_max <= 0 or hlam_max > 2:
            raise ValidationError("hlam_max must lie in (0, 2]")
        if int(n_min) != n_min or n_min < 8:
            raise ValidationError("n_min must be an integer >= 8")
        self.hlam_max = float(hlam_max)
        self.n_min = int(n_min)
        self.store_path = store_path
        self._data: dict[str, tuple[float, float]] = {}
        self._lock = threading.Lock()
        if store_path is not None and os.path.exists(store_path):
            with open(store_path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
            self._data = {k: (float(v[0]), float(v[1])) for k, v in raw.items()}

    def save(self) -> None:
        if self.store_path is None:
            raise ValidationError("cache has no backing store path")
        with self._lock:
            payload = {k: list(v) for k, v in sorted(self._data.items())}
        with open(self.store_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    def __len__(self) -> int:
        return len(self._data)

    def _key(self, M, lam, t, n_min, hlam_max) -> str:
        return "|".join(
            (
                M.cache_key(),
                float(lam).hex(),
                float(t).hex(),
                str(n_min),
                float(hlam_max).hex(),
            )
        )

    def _policy(self, n_min, hlam_max) -> tuple[int, float]:
        n_min = self.n_min if n_min is None else int(n_min)
        hlam_max = self.hlam_max if hlam_max is None else float(hlam_max)
        return n_min, hlam_max

    def value_and_sup(
        self, M: MemoryKernel, lam: float, t: float, n_min=None, hlam_max=None
    ) -> tuple[float, float]:
        lam = float(lam)
        t = float(t)
        if t < 0:
            raise ValidationError("time must be nonnegative")
        if t == 0.0:
            return 1.0, 1.0
        n_min, hlam_max = self._policy(n_min, hlam_max)
        key = self._key(M, lam, t, n_min, hlam_max)
        with self._lock:
            hit = self._data.get(key)
        if hit is not None:
            return hit
        n = max(n_min, math.ceil(t * lam / hlam_max))
        _, x = solve_modal_richardson(lam, M, t, n)
        entry = (float(x[-1]), float(np.max(np.abs(x))))
        with self._lock:
            self._data[key] = entry
        return entry

    def value(self, M, lam, t, n_min=None, hlam_max=None) -> float:
        return self.value_and_sup(M, lam, t, n_min, hlam_max)[0]

    def values(
        self, M: MemoryKernel, lams, t: float, threads: int = 1, n_min=None, hlam_max=None
    ) -> np.ndarray:
        """Modal values x(t) for each lam in ``lams``, in order."""
        lams = list(lams)
        if threads > 1 and len(lams) > 1:
            with ThreadPoolExecutor(max_workers=int(threads)) as pool:
                out = list(
                    pool.map(lambda l: self.value(M, l, t, n_min, hlam_max), lams)
                )
        else:
            out = [self.value(M, l, t, n_min, hlam_max) for l in lams]
        return np.asarray(out)


def propagate(
    y0: SpectralField,
    M: MemoryKernel,
    t: float,
    cache: ModalCache | None = None,
    threads: int = 1,
) -> SpectralField:
    """Coefficient-wise evolution a_k -> a_k x_k(t); t = 0 returns y0's data."""
    t = float(t)
    if t < 0:
        raise ValidationError("time must be nonnegative")
    if t == 0.0:
        return SpectralField(y0.basis, y0.coefficients)
    if cache is None:
        cache = ModalCache()
    xs = cache.values(M, y0.basis.eigenvalues, t, threads=threads)
    return SpectralField(y0.basis, y0.coefficients * xs)


@dataclass
class ResidualTable:
    """Residuals r_k = lambda_k^2 x_k(t) + M(t) with their fitted decay."""

    t: float
    ks: np.ndarray
    lams: np.ndarray
    x_values: np.ndarray
    residuals: np.ndarray
    slope: float
    sup_lambda2_x: float

    @property
    def rows(self):
        return list(
            zip(
                self.ks.tolist(),
                self.lams.tolist(),
                self.x_values.tolist(),
                self.residuals.tolist(),
            )
        )


def decomposition_residual(
    M: MemoryKernel,
    t: float,
    basis: SpectralBasis,
    ks=None,
    cache: ModalCache | None = None,
    threads: int = 1,
    hlam_max: float = 0.125,
) -> ResidualTable:
    """Table of lambda_k^2 x_k(t) + M(t) and the log-log decay slope.

    The slope certifies the 1/lambda remainder when it is at most -0.8;
    sup_k lambda_k^2 |x_k(t)| is reported as the numeric smoothing bound.
    Residual magnitudes can sit many orders below lambda_k^2 x_k, so the
    modal values use a tighter step policy (hlam_max) than the default cache.
    """
    t = float(t)
    if t <= 1e-9:
        raise ValidationError("t is below the resolvable step of the modal solve")
    if ks is None:
        ks = np.arange(1, basis.K + 1)
    else:
        ks = np.asarray(list(ks), dtype=int)
    if ks.size < 8:
        raise ValidationError("need at least 8 modes for a decay fit")
    lams = basis.eigenvalues[ks - 1]
    if lams.max() / lams.min() < 10.0:
        raise ValidationError("mode range must span at least a decade in lambda")
    if cache is None:
        cache = ModalCache()
    xs = cache.values(M, lams, t, threads=threads, hlam_max=hlam_max)
    Mt = float(M(t))
    residuals = lams**2 * xs + Mt
    nz = np.abs(residuals) > 0
    if np.count_nonzero(nz) >= 2:
        slope = float(
            np.polyfit(np.log(lams[nz]), np.log(np.abs(residuals[nz])), 1)[0]
        )
    else:
        slope = -math.inf
    return ResidualTable(
        t=t,
        ks=ks,
        lams=lams,
        x_values=xs,
        residuals=residuals,
        slope=slope,
        sup_lambda2_x=float(np.max(np.abs(lams**2 * xs))),
    )
