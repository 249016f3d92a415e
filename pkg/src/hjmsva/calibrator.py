"""Sequential bootstrap of the forward-vol surface from ATM normal vol quotes.

Each quote covers the cells ``{(i, j): i < E, i <= j < E + N}``. Cells already
fixed by earlier quotes are held; the remaining ones share a single unknown
``sigma`` so the quote's PV variance becomes ``A sigma^2 + 2 B sigma + C``,
which is solved in closed form.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .curve import DEFAULT_DT, DiscountCurve, SwapSchedule, grid_index
from .svapprox import ForwardVolSurface, coefficients, quote_to_pv_target

NO_UNKNOWNS_THRESHOLD = 1e-14


class Status(str, enum.Enum):
    EXACT = "exact"
    CLAMPED = "clamped-discriminant"
    FLOORED = "floored-zero"
    SKIPPED = "skipped-no-unknowns"


@dataclass(frozen=True, order=True)
class SwaptionQuote:
    expiry: float
    tenor: float
    vol: float  # annualized normal rate vol, absolute units

    def schedule(self, dt: float = DEFAULT_DT) -> SwapSchedule:
        return SwapSchedule(self.expiry, self.tenor, dt)


@dataclass(frozen=True)
class QuoteGrid:
    """ATM quotes ordered by expiry then tenor."""

    quotes: tuple[SwaptionQuote, ...]
    dt: float = DEFAULT_DT

    def __post_init__(self):
        quotes = tuple(self.quotes)
        object.__setattr__(self, "quotes", quotes)
        seen = set()
        for q in quotes:
            key = (grid_index(q.expiry, self.dt), grid_index(q.tenor, self.dt))
            if key[0] < 1:
                raise ValueError(f"expiry must be at least one period: {q}")
            if key[1] < 1:
                raise ValueError(f"tenor must be at least one period: {q}")
            if key in seen:
                raise ValueError(f"duplicate quote {q.expiry}y x {q.tenor}y")
            seen.add(key)
            if not (math.isfinite(q.vol) and q.vol >= 0):
                raise ValueError(f"vol must be finite and non-negative: {q}")

    @classmethod
    def from_quotes(cls, quotes, dt: float = DEFAULT_DT) -> "QuoteGrid":
        """Build a grid, sorting quotes into bootstrap order."""
        return cls(tuple(sorted(quotes, key=lambda q: (q.expiry, q.tenor))), dt)

    def is_sorted(self) -> bool:
        keys = [(q.expiry, q.tenor) for q in self.quotes]
        return keys == sorted(keys)

    def __len__(self):
        return len(self.quotes)

    def __iter__(self):
        return iter(self.quotes)

    @property
    def grid_size(self) -> int:
        """Number of maturity cells needed to cover every quote."""
        return max((q.schedule(self.dt).end_index for q in self.quotes), default=0)


@dataclass(frozen=True)
class QuoteRecord:
    quote: SwaptionQuote
    sigma: float
    A: float
    B: float
    C: float
    target: float
    residual: float
    status: Status


REPORT_HEADER = ("expiry", "tenor", "market_vol", "solved_sigma", "A", "B", "C",
                 "target", "residual", "status")


@dataclass
class CalibrationReport:
    records: list[QuoteRecord]
    surface: ForwardVolSurface
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max((r.residual for r in self.records), default=0.0)

    @property
    def clamp_count(self) -> int:
        return sum(r.status in (Status.CLAMPED, Status.FLOORED) for r in self.records)

    def status_counts(self) -> dict[str, int]:
        out = {s.value: 0 for s in Status}
        for r in self.records:
            out[r.status.value] += 1
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.records:
            nums = (r.quote.expiry, r.quote.tenor, r.quote.vol, r.sigma, r.A, r.B, r.C,
                    r.target, r.residual)
            w.writerow([repr(float(x)) for x in nums] + [r.status.value])
        return buf.getvalue()


def split_profile(curve: DiscountCurve, fvs: ForwardVolSurface, sched: SwapSchedule):
    """Split ``v(t_i)`` into a known part ``K`` and a unit-vol unknown part ``U``.

    With every unknown cell set to ``s`` the profile is ``K + s * U``.
    """
    e, end = sched.expiry_index, sched.end_index
    if end > fvs.size:
        raise ValueError(f"quote region ({e} x {end}) outside surface grid of size {fvs.size}")
    c = coefficients(curve, sched)
    region = np.triu(np.ones((e, end), dtype=bool))
    known = fvs.known[:e, :end] & region
    unknown = region & ~known
    K = np.where(known, fvs.values[:e, :end], 0.0) @ c
    U = unknown.astype(float) @ c
    return K, U


def assemble_quadratic(K, U, dt: float = DEFAULT_DT):
    """Coefficients with ``sum_i (K_i + s U_i)^2 dt == A s^2 + 2 B s + C``."""
    K = np.asarray(K, dtype=float)
    U = np.asarray(U, dtype=float)
    if K.shape != U.shape:
        raise ValueError("K and U must have the same length")
    return float(U @ U * dt), float(K @ U * dt), float(K @ K * dt)


def solve_vol(A: float, B: float, C: float, target: float) -> tuple[float, Status]:
    """Non-negative root of ``A s^2 + 2 B s + C = target``.

    A negative discriminant clamps to the vertex ``max(-B/A, 0)``; a negative
    root is floored at zero.
    """
    if not A > 0:
        raise ValueError(f"quadratic needs A > 0, got {A!r}")
    rhs = target - C
    disc = B * B + A * rhs
    if disc < 0:
        return max(-B / A, 0.0), Status.CLAMPED
    root = math.sqrt(disc)
    # avoid cancellation in -B + sqrt(disc) when B > 0
    s = rhs / (B + root) if B > 0 else (root - B) / A
    if s < 0:
        return 0.0, Status.FLOORED
    return s, Status.EXACT


def bootstrap(curve: DiscountCurve, quotes: QuoteGrid, grid_size: int | None = None,
              initial: ForwardVolSurface | None = None) -> CalibrationReport:
    """Calibrate the forward-vol surface quote by quote.

    ``initial`` optionally supplies cells that are already fixed; they are
    held like cells solved by earlier quotes.
    """
    if not quotes.is_sorted():
        raise ValueError("quotes must be sorted by expiry then tenor")
    dt = quotes.dt
    if not math.isclose(dt, curve.dt):
        raise ValueError(f"quote dt {dt} differs from curve dt {curve.dt}")
    size = quotes.grid_size if grid_size is None else grid_size
    if initial is not None:
        size = max(size, initial.size)
    if size < quotes.grid_size:
        raise ValueError(f"grid size {size} smaller than quote coverage {quotes.grid_size}")
    fvs = ForwardVolSurface.empty(size, dt)
    if initial is not None:
        m = initial.size
        fvs.values[:m, :m] = initial.values
        fvs.known[:m, :m] = initial.known
    records = []
    for q in quotes:
        sched = q.schedule(dt)
        e, end = sched.expiry_index, sched.end_index
        target = quote_to_pv_target(curve, sched, q.vol)
        K, U = split_profile(curve, fvs, sched)
        A, B, C = assemble_quadratic(K, U, dt)
        if A < NO_UNKNOWNS_THRESHOLD:
            records.append(QuoteRecord(q, math.nan, A, B, C, target, abs(C - target), Status.SKIPPED))
            continue
        s, status = solve_vol(A, B, C, target)
        new = np.triu(np.ones((e, end), dtype=bool)) & ~fvs.known[:e, :end]
        fvs.values[:e, :end][new] = s
        fvs.known[:e, :end][new] = True
        residual = abs(A * s * s + 2 * B * s + C - target)
        records.append(QuoteRecord(q, s, A, B, C, target, residual, status))
    return CalibrationReport(records, fvs)
