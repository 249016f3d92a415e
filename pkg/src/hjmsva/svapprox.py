"""Small-volatility approximation of ATM swaption prices.

To first order in the forward volatility the discounted swap PV at expiry is
Gaussian with zero mean at the money. Its variance is ``int_0^T v(t)^2 dt``
where, for forward vols ``sigma(t, tau)``,

    v(t) = r_s * sum_n B(0,T_n) int_t^{T_n} sigma
           - B(0,T_e) int_t^{T_e} sigma + B(0,T_N) int_t^{T_N} sigma.

Both integrals are discretized with the left-point rule on the ``dt`` grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import DiscountCurve, SwapSchedule, annuity, atm_rate

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class ForwardVolSurface:
    """Triangular grid of normal forward vols ``sigma(t_i, t_j)``, ``j >= i``.

    ``values[i, j]`` is the absolute (rate per sqrt-year) vol seen at ``t_i``
    for the forward starting at ``t_j``. Cells with ``j < i`` are unused and
    kept at zero. ``known`` flags the cells that hold a calibrated value.
    """

    values: np.ndarray
    known: np.ndarray
    dt: float = 0.25

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        self.known = np.array(self.known, dtype=bool)
        m = self.values.shape[0]
        if self.values.shape != (m, m) or self.known.shape != (m, m):
            raise ValueError("surface values and mask must be square and equal-shaped")
        lower = np.tril(np.ones((m, m), dtype=bool), k=-1)
        if np.any(self.known & lower):
            raise ValueError("cells below the diagonal cannot be known")
        vals = self.values[self.known]
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("surface vols must be finite and non-negative")
        self.values[~self.known] = 0.0

    @classmethod
    def empty(cls, size: int, dt: float = 0.25) -> "ForwardVolSurface":
        return cls(np.zeros((size, size)), np.zeros((size, size), dtype=bool), dt)

    @classmethod
    def flat(cls, sigma: float, size: int, dt: float = 0.25) -> "ForwardVolSurface":
        upper = np.triu(np.ones((size, size), dtype=bool))
        return cls(np.where(upper, sigma, 0.0), upper, dt)

    @classmethod
    def from_function(cls, fn, size: int, dt: float = 0.25) -> "ForwardVolSurface":
        """Populate every cell with ``fn(t_i, t_j)``."""
        t = dt * np.arange(size)
        ti, tj = np.meshgrid(t, t, indexing="ij")
        upper = tj >= ti
        vals = np.where(upper, np.vectorize(fn)(ti, tj), 0.0)
        return cls(vals, upper, dt)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def missing_cells(self, rows: int, cols: int, offset: int = 0) -> list[tuple[int, int]]:
        """Unknown cells ``(i, j)`` with ``i < rows``, ``i + offset <= j < cols``."""
        out = []
        for i in range(min(rows, cols)):
            for j in range(i + offset, cols):
                if i >= self.size or j >= self.size or not self.known[i, j]:
                    out.append((i, j))
        return out


def _check_grid(curve: DiscountCurve, sched: SwapSchedule):
    if not math.isclose(curve.dt, sched.dt):
        raise ValueError(f"schedule dt {sched.dt} differs from curve dt {curve.dt}")
    if sched.end_index * sched.dt > curve.last_maturity * (1 + 1e-12):
        raise ValueError(
            f"swap ending at {sched.expiry + sched.tenor}y exceeds curve range "
            f"{curve.last_maturity}y"
        )


def coefficients(curve: DiscountCurve, sched: SwapSchedule, strike: float | None = None) -> np.ndarray:
    """Weights ``c(j)`` of ``sigma(t_i, t_j)`` in ``v(t_i)`` for ``j < end_index``.

    The weight does not depend on the observation row ``i``; it only matters
    that ``j >= i``. ``strike`` is the per-period fixed rate and defaults to
    the ATM rate.
    """
    _check_grid(curve, sched)
    dt = curve.dt
    e, end = sched.expiry_index, sched.end_index
    r_s = atm_rate(curve, sched) if strike is None else strike
    b_pay = curve.discount(sched.payment_times)
    # tail[j] = sum_{n: T_n > t_j} B(0, T_n); payments sit at t_{e+1}..t_end
    tail = np.empty(end)
    tail[:e] = b_pay.sum()
    tail[e:] = np.cumsum(b_pay[::-1])[::-1]
    j = np.arange(end)
    c = r_s * tail - curve.discount(sched.expiry) * (j < e) + b_pay[-1]
    return dt * c


def coefficient(curve: DiscountCurve, sched: SwapSchedule, i: int, j: int,
                strike: float | None = None) -> float:
    """Weight of the single cell ``sigma(t_i, t_j)`` in ``v(t_i)``."""
    if not (0 <= i < sched.expiry_index and i <= j < sched.end_index):
        raise IndexError(
            f"cell ({i}, {j}) outside the region of swaption "
            f"{sched.expiry}y x {sched.tenor}y"
        )
    return float(coefficients(curve, sched, strike)[j])


def vol_profile(curve: DiscountCurve, fvs: ForwardVolSurface, sched: SwapSchedule,
                strike: float | None = None) -> np.ndarray:
    """Swap PV vol ``v(t_i)`` for ``i = 0..E-1``."""
    e, end = sched.expiry_index, sched.end_index
    missing = fvs.missing_cells(e, end)
    if missing:
        shown = ", ".join(map(str, missing[:8]))
        more = f" (+{len(missing) - 8} more)" if len(missing) > 8 else ""
        raise ValueError(f"surface lacks cells {shown}{more}")
    c = coefficients(curve, sched, strike)
    block = np.triu(fvs.values[:e, :end])
    return block @ c


def integrated_variance(profile, dt: float = 0.25) -> float:
    """Left-point ``sum_i v(t_i)^2 dt``."""
    v = np.asarray(profile, dtype=float)
    return float(np.sum(v * v) * dt)


def atm_price(variance: float) -> float:
    """``E[max(X, 0)]`` for ``X ~ N(0, variance)``; payer and receiver coincide."""
    if variance < 0:
        raise ValueError(f"negative variance {variance!r}")
    return math.sqrt(variance) / _SQRT_2PI


def pv_annuity(curve: DiscountCurve, sched: SwapSchedule) -> float:
    """Accrual-weighted annuity ``dt * sum_n B(0,T_n)``; maps rate vol to PV vol."""
    _check_grid(curve, sched)
    return curve.dt * annuity(curve, sched)


def quote_to_pv_target(curve: DiscountCurve, sched: SwapSchedule, quote_vol: float) -> float:
    """PV variance ``(D * quote_vol)^2 * T_e`` implied by an annualized normal vol."""
    if quote_vol < 0:
        raise ValueError(f"negative quote vol {quote_vol!r}")
    d = pv_annuity(curve, sched)
    return (d * quote_vol) ** 2 * sched.expiry


def normal_vol_from_variance(curve: DiscountCurve, sched: SwapSchedule, variance: float) -> float:
    """Inverse of :func:`quote_to_pv_target`."""
    if variance < 0:
        raise ValueError(f"negative variance {variance!r}")
    if sched.expiry == 0:
        return 0.0
    return math.sqrt(variance / sched.expiry) / pv_annuity(curve, sched)


def normal_vol_from_price(curve: DiscountCurve, sched: SwapSchedule, price: float) -> float:
    """Annualized normal vol whose ATM price equals ``price``."""
    if price < 0:
        raise ValueError(f"negative price {price!r}")
    return normal_vol_from_variance(curve, sched, 2.0 * math.pi * price * price)


def sva_variance(curve: DiscountCurve, fvs: ForwardVolSurface, sched: SwapSchedule) -> float:
    return integrated_variance(vol_profile(curve, fvs, sched), curve.dt)


def sva_price(curve: DiscountCurve, fvs: ForwardVolSurface, sched: SwapSchedule) -> float:
    """ATM swaption PV under the small-volatility approximation."""
    return atm_price(sva_variance(curve, fvs, sched))


def sva_normal_vol(curve: DiscountCurve, fvs: ForwardVolSurface, sched: SwapSchedule) -> float:
    """Annualized ATM normal vol implied by the surface."""
    return normal_vol_from_variance(curve, sched, sva_variance(curve, fvs, sched))
