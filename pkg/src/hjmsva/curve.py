"""Discount curve, swap schedules and ATM swap-rate arithmetic.

All rates inside the package are per-period on a fixed quarterly grid
(``dt = 0.25`` by default): a fixed leg pays ``r_s`` per period with no
separate accrual factor. Annualized figures appear only at I/O boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_DT = 0.25
_ALIGN_TOL = 1e-9


def grid_index(x: float, dt: float) -> int:
    """Return ``k`` such that ``x == k * dt``, or raise if ``x`` is off-grid."""
    k = int(round(x / dt))
    if abs(k * dt - x) > _ALIGN_TOL * max(1.0, abs(x)):
        raise ValueError(f"{x!r} is not a multiple of dt={dt!r}")
    return k


@dataclass(frozen=True)
class DiscountCurve:
    """Zero-coupon discount factors ``B(0, T)`` with log-linear interpolation.

    Parameters
    ----------
    maturities : array_like
        Strictly increasing pillar maturities in years. A pillar at 0 is
        optional; if absent it is implied with discount factor 1.
    discount_factors : array_like
        Strictly positive discount factors at the pillars.
    dt : float
        Simulation/payment grid step in years.
    """

    maturities: np.ndarray
    discount_factors: np.ndarray
    dt: float = DEFAULT_DT
    _log_df: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.maturities, dtype=float).ravel()
        b = np.asarray(self.discount_factors, dtype=float).ravel()
        if t.shape != b.shape:
            raise ValueError("maturities and discount_factors differ in length")
        if t.size == 0:
            raise ValueError("no pillars")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(b))):
            raise ValueError("pillars must be finite")
        if np.any(b <= 0):
            raise ValueError("discount factors must be strictly positive")
        if t[0] < 0:
            raise ValueError("pillar maturities must be non-negative")
        if np.any(np.diff(t) <= 0):
            raise ValueError("pillar maturities must be strictly increasing")
        if t[0] == 0.0:
            if b[0] != 1.0:
                raise ValueError("discount factor at maturity 0 must equal 1")
        else:
            t = np.concatenate(([0.0], t))
            b = np.concatenate(([1.0], b))
        t.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "maturities", t)
        object.__setattr__(self, "discount_factors", b)
        object.__setattr__(self, "_log_df", np.log(b))

    @classmethod
    def flat(cls, rate: float, horizon: float, dt: float = DEFAULT_DT) -> "DiscountCurve":
        """Curve with a flat continuously-compounded ``rate`` out to ``horizon``."""
        n = grid_index(horizon, dt)
        t = dt * np.arange(n + 1)
        return cls(t, np.exp(-rate * t), dt=dt)

    @property
    def last_maturity(self) -> float:
        return float(self.maturities[-1])

    def discount(self, T):
        """Discount factor ``B(0, T)``; accepts scalars or arrays."""
        T_arr = np.asarray(T, dtype=float)
        if np.any(T_arr < 0) or np.any(T_arr > self.last_maturity * (1 + 1e-12)):
            raise ValueError(
                f"maturity outside curve range [0, {self.last_maturity}]: {T!r}"
            )
        out = np.exp(np.interp(T_arr, self.maturities, self._log_df))
        # exact at pillars
        idx = np.searchsorted(self.maturities, T_arr)
        idx = np.clip(idx, 0, len(self.maturities) - 1)
        hit = self.maturities[idx] == T_arr
        out = np.where(hit, self.discount_factors[idx], out)
        return float(out) if out.ndim == 0 else out

    def grid_discounts(self, n: int) -> np.ndarray:
        """``B(0, k*dt)`` for ``k = 0..n``."""
        return self.discount(self.dt * np.arange(n + 1))


def discount(curve: DiscountCurve, T):
    return curve.discount(T)


def forward_grid(curve: DiscountCurve, horizon: float) -> np.ndarray:
    """Discrete initial forwards ``f(0, t_j)`` for ``t_j < horizon``.

    ``f(0, t_j) = -(ln B(0, t_{j+1}) - ln B(0, t_j)) / dt`` so that
    ``exp(-sum_{j<k} f(0, t_j) dt)`` reproduces ``B(0, t_k)``.
    """
    n = grid_index(horizon, curve.dt)
    log_b = np.log(curve.grid_discounts(n))
    return -np.diff(log_b) / curve.dt


@dataclass(frozen=True)
class SwapSchedule:
    """Quarterly-paying swap starting at ``expiry`` and running for ``tenor``."""

    expiry: float
    tenor: float
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if self.expiry < 0:
            raise ValueError(f"expiry must be non-negative, got {self.expiry!r}")
        grid_index(self.expiry, self.dt)
        if grid_index(self.tenor, self.dt) < 1:
            raise ValueError(f"tenor must span at least one period, got {self.tenor!r}")

    @property
    def expiry_index(self) -> int:
        return grid_index(self.expiry, self.dt)

    @property
    def n_payments(self) -> int:
        return grid_index(self.tenor, self.dt)

    @property
    def end_index(self) -> int:
        return self.expiry_index + self.n_payments

    @property
    def payment_times(self) -> np.ndarray:
        return self.dt * np.arange(self.expiry_index + 1, self.end_index + 1)


def annuity(curve: DiscountCurve, sched: SwapSchedule) -> float:
    """Sum of payment-date discount factors (no accrual factor)."""
    return float(np.sum(curve.discount(sched.payment_times)))


def atm_rate(curve: DiscountCurve, sched: SwapSchedule) -> float:
    """Per-period ATM swap rate ``(B(0,T_e) - B(0,T_N)) / sum_n B(0,T_n)``."""
    pay = sched.payment_times
    if pay.size == 0:
        raise ValueError("empty swap schedule")
    b = curve.discount(pay)
    return float((curve.discount(sched.expiry) - b[-1]) / np.sum(b))
