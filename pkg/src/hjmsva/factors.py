"""Split a single-factor forward-vol surface over correlated factors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .svapprox import ForwardVolSurface

PSD_TOL = 1e-10


class NotPositiveSemiDefiniteError(ValueError):
    pass


def cholesky(rho) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == rho`` for PSD ``rho``.

    Pivots within ``PSD_TOL`` below zero are treated as zero, which lets
    singular matrices such as perfectly correlated pairs through.
    """
    a = np.asarray(rho, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("correlation matrix must be square")
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if pivot < -PSD_TOL:
            raise NotPositiveSemiDefiniteError(
                f"matrix is not positive semi-definite (pivot {pivot:.3g} at {j})"
            )
        if pivot <= PSD_TOL:
            continue  # column j stays zero
        d = math.sqrt(pivot)
        L[j, j] = d
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
    # a zeroed pivot leaves the rest of its column unconstrained; check the fit
    if not np.allclose(L @ L.T, a, rtol=0.0, atol=1e-8):
        raise NotPositiveSemiDefiniteError("matrix is not positive semi-definite")
    return L


def check_correlation(rho) -> np.ndarray:
    rho = np.array(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("correlation matrix must be square")
    if not np.all(np.isfinite(rho)):
        raise ValueError("correlation matrix must be finite")
    if not np.allclose(rho, rho.T, rtol=0.0, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    if not np.all(np.diag(rho) == 1.0):
        raise ValueError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(rho) > 1.0):
        raise ValueError("correlations must lie in [-1, 1]")
    cholesky(rho)
    return rho


@dataclass(frozen=True)
class FactorSet:
    """Factor weights ``a_m``, mean reversions ``kappa_m`` and correlation ``rho``."""

    weights: tuple[float, ...]
    mean_reversions: tuple[float, ...]
    correlation: np.ndarray = None
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        k = tuple(float(x) for x in self.mean_reversions)
        if not w:
            raise ValueError("at least one factor is required")
        if len(w) != len(k):
            raise ValueError("weights and mean_reversions differ in length")
        if any(not (math.isfinite(x) and x > 0) for x in w):
            raise ValueError("factor weights must be strictly positive")
        if any(not (math.isfinite(x) and x >= 0) for x in k):
            raise ValueError("mean reversions must be non-negative")
        rho = np.eye(len(w)) if self.correlation is None else check_correlation(self.correlation)
        if rho.shape[0] != len(w):
            raise ValueError(f"correlation is {rho.shape[0]}x{rho.shape[0]} for {len(w)} factors")
        rho.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mean_reversions", k)
        object.__setattr__(self, "correlation", rho)
        object.__setattr__(self, "chol", cholesky(rho))

    @property
    def n_factors(self) -> int:
        return len(self.weights)

    def __eq__(self, other):
        if not isinstance(other, FactorSet):
            return NotImplemented
        return (self.weights == other.weights and self.mean_reversions == other.mean_reversions
                and np.array_equal(self.correlation, other.correlation))

    __hash__ = None


def loading(fset: FactorSet, m: int, t, T):
    """Shape ``a_m * exp(-kappa_m * (T - t))`` of factor ``m``."""
    t = np.asarray(t, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T < t):
        raise ValueError("loading requires T >= t")
    out = fset.weights[m] * np.exp(-fset.mean_reversions[m] * (T - t))
    return float(out) if out.ndim == 0 else out


@dataclass
class FactorVolSurface:
    """Per-factor forward-vol grids, ``values[m, i, j] = sigma_m(t_i, t_j)``."""

    values: np.ndarray
    known: np.ndarray
    correlation: np.ndarray
    dt: float = 0.25

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.known = np.asarray(self.known, dtype=bool)
        self.correlation = np.asarray(self.correlation, dtype=float)
        n, m, m2 = self.values.shape
        if m != m2 or self.known.shape != (m, m):
            raise ValueError("factor grids must be square and match the mask")
        if self.correlation.shape != (n, n):
            raise ValueError("correlation does not match the number of factors")
        if np.any(self.values < 0):
            raise ValueError("factor vols must be non-negative")

    @property
    def n_factors(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def aggregate_variance(self) -> np.ndarray:
        """``sum_{m,n} rho_mn sigma_m sigma_n`` per cell."""
        return np.einsum("mij,mn,nij->ij", self.values, self.correlation, self.values)

    @classmethod
    def single(cls, fvs: ForwardVolSurface) -> "FactorVolSurface":
        return cls(fvs.values[None], fvs.known, np.eye(1), fvs.dt)


def decompose(fvs: ForwardVolSurface, fset: FactorSet) -> FactorVolSurface:
    """Scale factor loadings cell by cell so the aggregate vol matches ``fvs``.

    ``sigma_m = sigma * lambda_m / g`` with ``g = sqrt(lambda' rho lambda)``.
    """
    t = fvs.dt * np.arange(fvs.size)
    tau = np.maximum(t[None, :] - t[:, None], 0.0)
    lam = np.stack([fset.weights[m] * np.exp(-fset.mean_reversions[m] * tau)
                    for m in range(fset.n_factors)])
    g2 = np.einsum("mij,mn,nij->ij", lam, fset.correlation, lam)
    upper = np.triu(np.ones_like(g2, dtype=bool))
    scale = np.sum(lam * lam, axis=0)
    if np.any(g2[upper] <= 1e-14 * scale[upper]):
        raise ValueError("degenerate factor set: combined loading vanishes")
    g = np.sqrt(np.where(upper, g2, 1.0))
    vals = np.where(upper, fvs.values, 0.0)[None] * lam / g
    return FactorVolSurface(vals, fvs.known.copy(), np.array(fset.correlation), fvs.dt)
