"""Dirichlet spectral basis on an interval and Sobolev-scale coefficient fields.

The domain is Omega = (0, L) with the Dirichlet Laplacian eigenpairs

    lambda_k = (k pi / L)**2,      e_k(x) = sqrt(2/L) sin(k pi x / L),

for 1 <= k <= K.  A field is a coefficient vector a_1..a_K against e_k, and
its H^s norm is sqrt(sum a_k**2 lambda_k**s) for any real s.  Overlap
integrals of eigenfunctions over interval unions are evaluated from the
closed-form antiderivatives of sine products, so no quadrature error enters
the observability algebra built on top of them.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ValidationError
from .regions import ObservationRegion


class SpectralBasis:
    """Truncated sine basis on (0, L).

    Parameters
    ----------
    L : float
        Interval length, positive.
    K : int
        Truncation level; modes 1..K are retained.
    """

    def __init__(self, L: float, K: int):
        L = float(L)
        if not math.isfinite(L) or L <= 0:
            raise ValidationError("L must be a positive finite real")
        if int(K) != K or K < 1:
            raise ValidationError("K must be a positive integer")
        self.L = L
        self.K = int(K)
        k = np.arange(1, self.K + 1)
        self.eigenvalues = (k * np.pi / L) ** 2

    def eigenfunction(self, k: int):
        """Callable evaluating e_k on [0, L]."""
        self._check_index(k)
        L = self.L
        amp = math.sqrt(2.0 / L)

        def e_k(x):
            xv = np.asarray(x, dtype=float)
            if np.any(xv < -1e-12) or np.any(xv > L + 1e-12):
                raise ValidationError(f"argument outside [0, {L}]")
            out = amp * np.sin(k * np.pi * xv / L)
            return float(out) if np.isscalar(x) else out

        return e_k

    def modes_at(self, x) -> np.ndarray:
        """Matrix of e_k(x_i), shape (len(x), K)."""
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xv < -1e-12) or np.any(xv > self.L + 1e-12):
            raise ValidationError(f"argument outside [0, {self.L}]")
        k = np.arange(1, self.K + 1)
        return math.sqrt(2.0 / self.L) * np.sin(np.outer(xv, k) * np.pi / self.L)

    def _check_index(self, k: int) -> None:
        if int(k) != k or not 1 <= k <= self.K:
            raise ValidationError(f"mode index {k} outside 1..{self.K}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpectralBasis)
            and self.L == other.L
            and self.K == other.K
        )

    def __hash__(self) -> int:
        return hash((self.L, self.K))

    def __repr__(self) -> str:
        return f"SpectralBasis(L={self.L!r}, K={self.K})"


def eigenpair(basis: SpectralBasis, k: int):
    """Return (lambda_k, e_k evaluator) for 1 <= k <= K."""
    basis._check_index(k)
    return float(basis.eigenvalues[k - 1]), basis.eigenfunction(k)


class SpectralField:
    """Coefficient vector against the sine basis."""

    def __init__(self, basis: SpectralBasis, coefficients):
        coeffs = np.asarray(coefficients, dtype=float).copy()
        if coeffs.shape != (basis.K,):
            raise ValidationError(
                f"expected {basis.K} coefficients, got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("coefficients must be finite")
        self.basis = basis
        self.coefficients = coeffs

    def hs_norm(self, s: float) -> float:
        return hs_norm(self, s)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if self.basis != other.basis:
            raise ValidationError("fields live on different bases")
        return SpectralField(self.basis, self.coefficients + other.coefficients)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        if self.basis != other.basis:
            raise ValidationError("fields live on different bases")
        return SpectralField(self.basis, self.coefficients - other.coefficients)

    def __rmul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.basis, float(scalar) * self.coefficients)

    def to_json(self) -> dict:
        return {
            "L": self.basis.L,
            "K": self.basis.K,
            "coeffs": [float(a) for a in self.coefficients],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data) -> "SpectralField":
        if isinstance(data, str):
            data = json.loads(data)
        unknown = set(data) - {"L", "K", "coeffs"}
        if unknown:
            raise ValidationError(f"unknown field entries: {sorted(unknown)}")
        try:
            basis = SpectralBasis(data["L"], data["K"])
            return cls(basis, data["coeffs"])
        except KeyError as exc:
            raise ValidationError(f"field JSON missing {exc}") from exc

    def __repr__(self) -> str:
        return f"SpectralField(K={self.basis.K}, L={self.basis.L!r})"


def hs_norm(field: SpectralField, s: float) -> float:
    """H^s norm sqrt(sum a_k**2 lambda_k**s)."""
    a = field.coefficients
    lam = field.basis.eigenvalues
    return float(np.sqrt(np.sum(a * a * lam ** float(s))))


def eval_field(field: SpectralField, x):
    """Evaluate sum_k a_k e_k(x) for x in [0, L]."""
    mat = field.basis.modes_at(x)
    out = mat @ field.coefficients
    return float(out[0]) if np.isscalar(x) else out


def overlap_matrix(basis: SpectralBasis, region: ObservationRegion) -> np.ndarray:
    """Gram matrix G_kl = integral over the region of e_k e_l dx.

    Uses the exact antiderivatives of sin(k pi x/L) sin(l pi x/L); for the full
    interval the result is the identity.  An empty region gives the zero
    matrix.  Symmetric positive semidefinite with eigenvalues in [0, 1].
    """
    if not isinstance(region, ObservationRegion):
        region = ObservationRegion(region)
    K, L = basis.K, basis.L
    k = np.arange(1, K + 1)
    kk = k[:, None].astype(float)
    ll = k[None, :].astype(float)
    dif = kk - ll
    ssum = kk + ll
    # Avoid 0/0 on the diagonal; it is overwritten below.
    dif_safe = np.where(dif == 0.0, 1.0, dif)

    def anti(x: float) -> np.ndarray:
        off = np.sin(dif * np.pi * x / L) / (dif_safe * np.pi)
        out = off - np.sin(ssum * np.pi * x / L) / (ssum * np.pi)
        diag = x / L - np.sin(2.0 * k * np.pi * x / L) / (2.0 * k * np.pi)
        np.fill_diagonal(out, diag)
        return out

    G = np.zeros((K, K))
    for it in region.intervals:
        if it.a < -1e-12 or it.b > L + 1e-12:
            raise ValidationError(
                f"interval [{it.a}, {it.b}] not inside the domain [0, {L}]"
            )
        a = min(max(it.a, 0.0), L)
        b = min(max(it.b, 0.0), L)
        G += anti(b) - anti(a)
    return G
