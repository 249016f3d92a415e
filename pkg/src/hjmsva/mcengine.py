"""Discrete-time multi-factor HJM Monte Carlo.

Forwards live on the ``dt`` grid: ``f(t_i, t_k)`` is the rate over
``[t_k, t_{k+1})`` seen at ``t_i``. Bonds and the money-market account use the
left-point rule,

    B(t_i, t_j) = exp(-sum_{k=i}^{j-1} f(t_i, t_k) dt),
    discount(t_i) = exp(-sum_{n<i} f(t_n, t_n) dt),

and one step moves ``f(t_i, t_k) -> f(t_{i+1}, t_k)`` for ``k > i`` by
``alpha(t_i, t_k) dt + sum_m sigma_m(t_i, t_k) dW_m``. The drift is chosen so
that every one-step discounted bond ratio has expectation exactly 1 under
Gaussian increments.

Paths are generated in fixed-size blocks. Every (block, factor) pair owns an
independent Philox stream derived from the seed, so results do not depend on
how blocks are scheduled, and factor ``m`` sees the same normals whatever the
number of factors (common random numbers across factor counts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .curve import DiscountCurve, SwapSchedule, forward_grid, grid_index
from .factors import FactorVolSurface, cholesky


class CoverageError(ValueError):
    """Surface lacks cells the simulation needs."""


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    horizon: float
    seed: int = 0
    antithetic: bool = False
    block_size: int = 8192
    max_maturity: float | None = None
    zero_drift: bool = False  # debug only: drops the martingale drift

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths must be at least 2")
        if self.block_size < 2:
            raise ValueError("block_size must be at least 2")
        if self.antithetic and (self.n_paths % 2 or self.block_size % 2):
            raise ValueError("antithetic sampling needs even n_paths and block_size")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if self.max_maturity is not None and self.max_maturity < self.horizon:
            raise ValueError("max_maturity must not be before horizon")


@dataclass(frozen=True)
class PriceEstimate:
    mean: float | np.ndarray
    std_error: float | np.ndarray
    n_paths: int


@dataclass
class PathSet:
    """Simulated short rates plus forward curves at the observed steps.

    ``forwards[i][:, j - i]`` holds ``f(t_i, t_j)``. ``pairs`` lists antithetic
    partners (row indices) when the set was sampled antithetically.
    """

    dt: float
    short_rates: np.ndarray
    forwards: dict[int, np.ndarray]
    pairs: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.short_rates.shape[0]

    @property
    def n_steps(self) -> int:
        return self.short_rates.shape[1]

    def discount(self, i: int) -> np.ndarray:
        """Money-market discount ``exp(-sum_{n<i} f(t_n, t_n) dt)`` per path."""
        if i > self.n_steps:
            raise ValueError(f"step {i} beyond simulated horizon ({self.n_steps})")
        return np.exp(-self.short_rates[:, :i].sum(axis=1) * self.dt)

    def bond(self, i: int, j: int) -> np.ndarray:
        """``B(t_i, t_j)`` per path; needs step ``i`` to have been observed."""
        if j < i:
            raise ValueError("bond maturity before observation time")
        if i not in self.forwards:
            raise ValueError(f"step {i} was not observed")
        f = self.forwards[i]
        if j - i > f.shape[1]:
            raise ValueError(f"maturity index {j} beyond simulated forwards")
        return np.exp(-f[:, : j - i].sum(axis=1) * self.dt)

    def initial_discount(self, j: int) -> float:
        return float(np.exp(-self.forwards[0][0, :j].sum() * self.dt))


def integrated_loading(fsurf: FactorVolSurface, i: int, j: int) -> np.ndarray:
    """``sum_{k=i}^{j-1} sigma_m(t_i, t_k) dt`` for every factor ``m``."""
    if j < i:
        raise ValueError("integrated_loading requires i <= j")
    return fsurf.values[:, i, i:j].sum(axis=1) * fsurf.dt


def step_loading(fsurf: FactorVolSurface, i: int, j: int) -> np.ndarray:
    """Exposure of the one-step bond ratio ``t_i -> t_{i+1}`` for maturity ``t_j``.

    Same as :func:`integrated_loading` without the ``k = i`` cell: ``f(., t_i)``
    is fixed into the short rate at ``t_i`` and never moves again.
    """
    if j < i:
        raise ValueError("step_loading requires i <= j")
    return fsurf.values[:, i, i + 1:j].sum(axis=1) * fsurf.dt


def _drift_row(vols: np.ndarray, rho: np.ndarray, dt: float) -> np.ndarray:
    """Drift for maturities ``k = i+1..M-1`` given ``vols[m, k-i-1]``."""
    n_f, width = vols.shape
    J = np.zeros((n_f, width + 1))
    np.cumsum(vols * dt, axis=1, out=J[:, 1:])
    D = 0.5 * np.einsum("mj,mn,nj->j", J, rho, J)
    return np.diff(D) / dt


def discrete_drift(fsurf: FactorVolSurface, i: int, n_maturities: int | None = None) -> np.ndarray:
    """Martingale drift ``alpha(t_i, t_k)`` for ``k = i..M-1``.

    With ``D(j) = 1/2 sum_{m,n} rho_mn J_m(i,j) J_n(i,j)`` over the step
    loadings ``J``, ``alpha(t_i, t_k) = (D(k+1) - D(k)) / dt``. The ``k = i``
    entry is zero because that forward no longer evolves.
    """
    M = fsurf.size if n_maturities is None else n_maturities
    out = np.zeros(M - i)
    out[1:] = _drift_row(fsurf.values[:, i, i + 1:M], fsurf.correlation, fsurf.dt)
    return out


def _required_cells(fsurf: FactorVolSurface, n_steps: int, M: int):
    missing = []
    for i in range(n_steps):
        row = fsurf.known[i, i + 1:M] if i < fsurf.size else np.zeros(0, bool)
        if row.size < M - i - 1 or not row.all():
            bad = [j for j in range(i + 1, M) if j >= fsurf.size or not fsurf.known[i, j]]
            missing.extend((i, j) for j in bad)
    return missing


def _streams(seed: int, block: int, n_factors: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block, m))))
            for m in range(n_factors)]


class _Engine:
    """Per-step vols, drifts and Cholesky factor shared by all blocks."""

    def __init__(self, curve: DiscountCurve, fsurf: FactorVolSurface, cfg: SimConfig):
        if not math.isclose(curve.dt, fsurf.dt):
            raise ValueError(f"curve dt {curve.dt} differs from surface dt {fsurf.dt}")
        dt = fsurf.dt
        self.dt = dt
        self.cfg = cfg
        self.n_steps = grid_index(cfg.horizon, dt)
        max_mat = cfg.horizon if cfg.max_maturity is None else cfg.max_maturity
        self.M = max(grid_index(max_mat, dt), self.n_steps)
        missing = _required_cells(fsurf, self.n_steps, self.M)
        if missing:
            shown = ", ".join(map(str, missing[:8]))
            raise CoverageError(f"surface lacks {len(missing)} cells needed for simulation: {shown}")
        self.f0 = forward_grid(curve, self.M * dt)
        self.chol = cholesky(fsurf.correlation)
        self.n_factors = fsurf.n_factors
        self.vols = [fsurf.values[:, i, i + 1:self.M].copy() for i in range(self.n_steps)]
        if cfg.zero_drift:
            self.drifts = [np.zeros(self.M - i - 1) for i in range(self.n_steps)]
        else:
            self.drifts = [_drift_row(v, fsurf.correlation, dt) for v in self.vols]

    def normals(self, block: int, n: int) -> np.ndarray:
        """Standard normals shaped ``(n_steps, n, n_factors)``."""
        half = n // 2 if self.cfg.antithetic else n
        z = np.empty((self.n_steps, half, self.n_factors))
        for m, gen in enumerate(_streams(self.cfg.seed, block, self.n_factors)):
            z[:, :, m] = gen.standard_normal((self.n_steps, half))
        if self.cfg.antithetic:
            z = np.concatenate([z, -z], axis=1)
        return z

    def run_block(self, block: int, n: int, observe) -> PathSet:
        dt, M = self.dt, self.M
        z = self.normals(block, n)
        sqdt = math.sqrt(dt)
        f = np.tile(self.f0, (n, 1))
        short = np.empty((n, self.n_steps))
        forwards = {}
        for i in range(self.n_steps):
            if i in observe:
                forwards[i] = f[:, i:].copy()
            short[:, i] = f[:, i]
            dw = sqdt * (z[i] @ self.chol.T)
            f[:, i + 1:] += self.drifts[i] * dt + dw @ self.vols[i]
        if self.n_steps in observe:
            forwards[self.n_steps] = f[:, self.n_steps:].copy()
        pairs = None
        if self.cfg.antithetic:
            h = n // 2
            pairs = np.stack([np.arange(h), np.arange(h, n)], axis=1)
        return PathSet(dt, short, forwards, pairs)

    def blocks(self, observe) -> Iterator[PathSet]:
        observe = set(range(self.n_steps + 1)) if observe is None else set(observe) | {0}
        bad = [i for i in observe if not 0 <= i <= self.n_steps]
        if bad:
            raise ValueError(f"observation steps {sorted(bad)} outside [0, {self.n_steps}]")
        size = self.cfg.block_size
        for b, start in enumerate(range(0, self.cfg.n_paths, size)):
            yield self.run_block(b, min(size, self.cfg.n_paths - start), observe)


def simulate_blocks(curve: DiscountCurve, fsurf: FactorVolSurface, cfg: SimConfig,
                    observe=None) -> Iterator[PathSet]:
    """Yield path blocks in a fixed order; memory stays bounded by one block."""
    return _Engine(curve, fsurf, cfg).blocks(observe)


def simulate(curve: DiscountCurve, fsurf: FactorVolSurface, cfg: SimConfig, observe=None) -> PathSet:
    """Simulate all paths at once; ``observe`` limits which steps keep forwards."""
    parts = list(simulate_blocks(curve, fsurf, cfg, observe))
    offsets = np.cumsum([0] + [p.n_paths for p in parts[:-1]])
    pairs = None
    if cfg.antithetic:
        pairs = np.concatenate([p.pairs + o for p, o in zip(parts, offsets)])
    forwards = {i: np.concatenate([p.forwards[i] for p in parts]) for i in parts[0].forwards}
    return PathSet(parts[0].dt, np.concatenate([p.short_rates for p in parts]), forwards, pairs)


class _Accumulator:
    """Order-dependent but deterministic merge of per-block means and M2."""

    def __init__(self):
        self.n = 0
        self.mean = None
        self.m2 = None
        self.n_paths = 0

    def add(self, y: np.ndarray, n_paths: int):
        nb = y.shape[0]
        mb = y.mean(axis=0)
        m2b = ((y - mb) ** 2).sum(axis=0)
        if self.n == 0:
            self.mean, self.m2 = mb, m2b
        else:
            delta = mb - self.mean
            tot = self.n + nb
            self.mean = self.mean + delta * nb / tot
            self.m2 = self.m2 + m2b + delta ** 2 * self.n * nb / tot
        self.n += nb
        self.n_paths += n_paths

    def result(self) -> PriceEstimate:
        se = np.sqrt(self.m2 / (self.n - 1) / self.n) if self.n > 1 else np.zeros_like(self.mean)
        mean, se = self.mean, se
        if np.ndim(mean) == 0:
            mean, se = float(mean), float(se)
        return PriceEstimate(mean, se, self.n_paths)


def _units(values: np.ndarray, pairs: np.ndarray | None) -> np.ndarray:
    """Independent sampling units: pair averages under antithetic sampling."""
    if pairs is None:
        return values
    return 0.5 * (values[pairs[:, 0]] + values[pairs[:, 1]])


def summarize(values, paths: PathSet) -> PriceEstimate:
    """Mean and standard error of per-path ``values`` (first axis = paths)."""
    acc = _Accumulator()
    acc.add(_units(np.asarray(values, dtype=float), paths.pairs), paths.n_paths)
    return acc.result()


def monte_carlo(curve: DiscountCurve, fsurf: FactorVolSurface, cfg: SimConfig,
                functional: Callable[[PathSet], np.ndarray], observe=None) -> PriceEstimate:
    """Estimate ``E[functional(paths)]`` block by block with a fixed-order reduction."""
    acc = _Accumulator()
    for block in simulate_blocks(curve, fsurf, cfg, observe):
        acc.add(_units(np.asarray(functional(block), dtype=float), block.pairs), block.n_paths)
    return acc.result()


def discounted_bond_values(paths: PathSet, i: int, j: int) -> np.ndarray:
    return paths.discount(i) * paths.bond(i, j)


@dataclass(frozen=True)
class MartingaleCheck:
    time: float
    maturity: float
    estimate: PriceEstimate
    reference: float

    @property
    def ratio(self) -> float:
        return self.estimate.mean / self.reference

    @property
    def ratio_se(self) -> float:
        return self.estimate.std_error / self.reference

    def passed(self, n_se: float = 3.0, roundoff: float = 1e-12) -> bool:
        """``|ratio - 1| <= n_se * SE``, with ``roundoff`` covering deterministic cases."""
        return abs(self.ratio - 1.0) <= n_se * self.ratio_se + roundoff


def bond_martingale_check(paths: PathSet, T: float, t: float | None = None) -> MartingaleCheck:
    """Compare ``E[discount(t) B(t, T)]`` with ``B(0, T)``; ``t`` defaults to ``T``."""
    j = grid_index(T, paths.dt)
    i = j if t is None else grid_index(t, paths.dt)
    if i > j:
        raise ValueError("observation time after bond maturity")
    est = summarize(discounted_bond_values(paths, i, j), paths)
    return MartingaleCheck(i * paths.dt, j * paths.dt, est, paths.initial_discount(j))


def swaption_values(paths: PathSet, sched: SwapSchedule, strike: float | None = None,
                    side: str = "payer") -> np.ndarray:
    """Per-path discounted swaption payoffs.

    ``strike`` is the per-period fixed rate; ``None`` means ATM on the initial
    curve. At expiry the fixed-rate receiver's swap is worth
    ``r_s sum_n B(T_e, T_n) - 1 + B(T_e, T_N)``; the payer's is its negative.
    """
    if side not in ("payer", "receiver"):
        raise ValueError(f"side must be 'payer' or 'receiver', got {side!r}")
    if not math.isclose(sched.dt, paths.dt):
        raise ValueError("schedule not aligned with the simulation grid")
    e, end = sched.expiry_index, sched.end_index
    if strike is None:
        b0 = np.exp(-np.concatenate(([0.0], np.cumsum(paths.forwards[0][0, :end]))) * paths.dt)
        strike = (b0[e] - b0[end]) / b0[e + 1:end + 1].sum()
    if e not in paths.forwards:
        raise ValueError(f"expiry step {e} was not observed")
    f = paths.forwards[e]
    if f.shape[1] < end - e:
        raise ValueError("simulated maturities do not cover the swap")
    logb = np.cumsum(f[:, : end - e], axis=1) * paths.dt
    bonds = np.exp(-logb)  # B(T_e, t_{e+1}) .. B(T_e, t_end)
    receiver_value = strike * bonds.sum(axis=1) - 1.0 + bonds[:, -1]
    value = receiver_value if side == "receiver" else -receiver_value
    return paths.discount(e) * np.maximum(value, 0.0)


def price_swaption(paths: PathSet, sched: SwapSchedule, strike: float | None = None,
                   side: str = "payer") -> PriceEstimate:
    return summarize(swaption_values(paths, sched, strike, side), paths)
