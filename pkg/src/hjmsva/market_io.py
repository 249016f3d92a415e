"""Readers and writers for curves, quotes, surfaces and model configuration.

Curve and quote files are UTF-8 CSV with a fixed header. The model
configuration is an INI file::

    [model]
    dt = 0.25

    [factor.1]              ; one block per factor, numbered from 1
    weight = 1.0
    mean_reversion = 0.0

    [factor.2]
    weight = 0.5
    mean_reversion = 0.3

    [correlation]           ; row-major, N*N entries, commas or whitespace
    matrix = 1.0 0.4
             0.4 1.0

    [monte_carlo]
    n_paths = 100000
    seed = 0
    antithetic = false
    block_size = 8192

    [validate]
    max_maturity = 10.0     ; years of bond maturities checked
    n_se = 3.0              ; tolerance in standard errors

Every section and key is optional. Without factor blocks the model is a
single factor with weight 1 and no mean reversion; without a correlation
section factors are uncorrelated.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibrator import QuoteGrid, SwaptionQuote
from .curve import DEFAULT_DT, DiscountCurve, grid_index
from .factors import FactorSet, NotPositiveSemiDefiniteError, check_correlation
from .mcengine import SimConfig
from .svapprox import ForwardVolSurface

CURVE_HEADER = ("maturity_years", "discount_factor")
QUOTE_HEADER = ("expiry_years", "tenor_years", "normal_vol_bp")
SURFACE_HEADER = ("t_i", "T_j", "sigma")
BP = 1e-4


class InputError(ValueError):
    """Malformed or invalid input file; ``location`` names the line or key."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def _rows(path, header):
    text = Path(path).read_text(encoding="utf-8-sig")
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = [(n, r) for n, r in enumerate(reader, start=1) if any(c.strip() for c in r)]
    if not rows:
        return []
    n, first = rows[0]
    if tuple(c.strip() for c in first) != header:
        raise InputError(f"expected header {','.join(header)}", f"{path}:{n}")
    return rows[1:]


def _floats(path, n, row, width):
    if len(row) != width:
        raise InputError(f"expected {width} fields, got {len(row)}", f"{path}:{n}")
    try:
        vals = [float(c) for c in row]
    except ValueError as exc:
        raise InputError(f"malformed number ({exc})", f"{path}:{n}") from None
    if not all(math.isfinite(v) for v in vals):
        raise InputError("non-finite number", f"{path}:{n}")
    return vals


def load_curve(path, dt: float = DEFAULT_DT) -> DiscountCurve:
    """Read ``maturity_years,discount_factor`` pillars."""
    mats, dfs = [], []
    for n, row in _rows(path, CURVE_HEADER):
        t, b = _floats(path, n, row, 2)
        if b <= 0:
            raise InputError(f"discount factor must be positive, got {b}", f"{path}:{n}")
        if t < 0:
            raise InputError(f"maturity must be non-negative, got {t}", f"{path}:{n}")
        if mats and t <= mats[-1]:
            raise InputError("maturities must be strictly increasing", f"{path}:{n}")
        if t == 0 and b != 1.0:
            raise InputError("discount factor at maturity 0 must be 1", f"{path}:{n}")
        mats.append(t)
        dfs.append(b)
    if not mats:
        raise InputError("no pillars", str(path))
    return DiscountCurve(np.array(mats), np.array(dfs), dt=dt)


def dump_curve(curve: DiscountCurve) -> str:
    lines = [",".join(CURVE_HEADER)]
    lines += [f"{t!r},{b!r}" for t, b in zip(curve.maturities.tolist(), curve.discount_factors.tolist())]
    return "\n".join(lines) + "\n"


def load_quotes(path, dt: float = DEFAULT_DT) -> QuoteGrid:
    """Read ``expiry_years,tenor_years,normal_vol_bp`` quotes, sorted for bootstrap."""
    quotes, seen = [], {}
    for n, row in _rows(path, QUOTE_HEADER):
        e, t, vol_bp = _floats(path, n, row, 3)
        try:
            key = (grid_index(e, dt), grid_index(t, dt))
        except ValueError as exc:
            raise InputError(f"misaligned with dt={dt}: {exc}", f"{path}:{n}") from None
        if key[0] < 1 or key[1] < 1:
            raise InputError("expiry and tenor must be at least one period", f"{path}:{n}")
        if vol_bp < 0:
            raise InputError(f"negative vol {vol_bp}", f"{path}:{n}")
        if key in seen:
            raise InputError(f"duplicate quote {e}y x {t}y (first at line {seen[key]})", f"{path}:{n}")
        seen[key] = n
        quotes.append(SwaptionQuote(key[0] * dt, key[1] * dt, vol_bp * BP))
    return QuoteGrid.from_quotes(quotes, dt)


def dump_quotes(quotes: QuoteGrid) -> str:
    lines = [",".join(QUOTE_HEADER)]
    lines += [f"{q.expiry!r},{q.tenor!r},{q.vol / BP!r}" for q in quotes]
    return "\n".join(lines) + "\n"


def dump_surface(fvs: ForwardVolSurface) -> str:
    """Known cells as ``t_i,T_j,sigma`` rows."""
    lines = [",".join(SURFACE_HEADER)]
    for i, j in zip(*np.nonzero(fvs.known)):
        i, j = int(i), int(j)
        lines.append(f"{i * fvs.dt!r},{j * fvs.dt!r},{float(fvs.values[i, j])!r}")
    return "\n".join(lines) + "\n"


def load_surface(path, dt: float = DEFAULT_DT) -> ForwardVolSurface:
    cells = []
    for n, row in _rows(path, SURFACE_HEADER):
        t, T, s = _floats(path, n, row, 3)
        try:
            i, j = grid_index(t, dt), grid_index(T, dt)
        except ValueError as exc:
            raise InputError(f"misaligned with dt={dt}: {exc}", f"{path}:{n}") from None
        if i < 0 or j < i:
            raise InputError("cell must satisfy 0 <= t_i <= T_j", f"{path}:{n}")
        if s < 0:
            raise InputError(f"negative vol {s}", f"{path}:{n}")
        cells.append((n, i, j, s))
    if not cells:
        raise InputError("no surface cells", str(path))
    size = max(j for _, _, j, _ in cells) + 1
    fvs = ForwardVolSurface.empty(size, dt)
    for n, i, j, s in cells:
        if fvs.known[i, j]:
            raise InputError(f"duplicate cell ({t_fmt(i, dt)}, {t_fmt(j, dt)})", f"{path}:{n}")
        fvs.values[i, j] = s
        fvs.known[i, j] = True
    return fvs


def t_fmt(k: int, dt: float) -> str:
    return f"{k * dt:g}"


@dataclass(frozen=True)
class ModelConfig:
    dt: float = DEFAULT_DT
    factors: FactorSet = field(default_factory=lambda: FactorSet((1.0,), (0.0,)))
    n_paths: int = 100_000
    seed: int = 0
    antithetic: bool = False
    block_size: int = 8192
    max_maturity: float = 10.0
    n_se: float = 3.0

    def sim_config(self, horizon: float, max_maturity: float | None = None, **overrides) -> SimConfig:
        kw = dict(n_paths=self.n_paths, horizon=horizon, seed=self.seed,
                  antithetic=self.antithetic, block_size=self.block_size,
                  max_maturity=max_maturity)
        kw.update(overrides)
        return SimConfig(**kw)


_SCHEMA = {
    "model": {"dt"},
    "correlation": {"matrix"},
    "monte_carlo": {"n_paths", "seed", "antithetic", "block_size"},
    "validate": {"max_maturity", "n_se"},
}
_FACTOR_KEYS = {"weight", "mean_reversion"}
_FACTOR_RE = re.compile(r"factor\.(\d+)$")


def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        if conv is bool:
            return cp.getboolean(section, key)
        return conv(raw)
    except ValueError:
        raise InputError(f"invalid value {raw!r}", f"{section}.{key}") from None


def parse_config(text: str, source: str = "<config>") -> ModelConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise InputError(str(exc).splitlines()[0], source) from None
    factors = {}
    for sec in cp.sections():
        m = _FACTOR_RE.match(sec)
        allowed = _FACTOR_KEYS if m else _SCHEMA.get(sec)
        if allowed is None:
            raise InputError("unknown section", sec)
        for key in cp[sec]:
            if key not in allowed:
                raise InputError("unknown key", f"{sec}.{key}")
        if m:
            factors[int(m.group(1))] = sec
    if factors and sorted(factors) != list(range(1, len(factors) + 1)):
        raise InputError("factor blocks must be numbered 1..N without gaps", "factor")

    dt = _get(cp, "model", "dt", float, DEFAULT_DT)
    if not (math.isfinite(dt) and dt > 0):
        raise InputError("dt must be positive", "model.dt")

    weights, kappas = [], []
    for k in sorted(factors):
        sec = factors[k]
        w = _get(cp, sec, "weight", float, 1.0)
        kap = _get(cp, sec, "mean_reversion", float, 0.0)
        if not (math.isfinite(w) and w > 0):
            raise InputError("weight must be positive", f"{sec}.weight")
        if not (math.isfinite(kap) and kap >= 0):
            raise InputError("mean_reversion must be non-negative", f"{sec}.mean_reversion")
        weights.append(w)
        kappas.append(kap)
    if not weights:
        weights, kappas = [1.0], [0.0]

    rho = None
    if cp.has_option("correlation", "matrix"):
        raw = cp.get("correlation", "matrix")
        try:
            vals = [float(x) for x in re.split(r"[\s,]+", raw.strip()) if x]
        except ValueError:
            raise InputError("malformed number", "correlation.matrix") from None
        n = len(weights)
        if len(vals) != n * n:
            raise InputError(f"expected {n * n} entries for {n} factors, got {len(vals)}",
                             "correlation.matrix")
        rho = np.array(vals).reshape(n, n)
        try:
            check_correlation(rho)
        except NotPositiveSemiDefiniteError:
            raise InputError("matrix is not positive semi-definite", "correlation.matrix") from None
        except ValueError as exc:
            raise InputError(str(exc), "correlation.matrix") from None

    n_paths = _get(cp, "monte_carlo", "n_paths", int, 100_000)
    if n_paths < 2:
        raise InputError("n_paths must be at least 2", "monte_carlo.n_paths")
    seed = _get(cp, "monte_carlo", "seed", int, 0)
    if seed < 0:
        raise InputError("seed must be non-negative", "monte_carlo.seed")
    antithetic = _get(cp, "monte_carlo", "antithetic", bool, False)
    block_size = _get(cp, "monte_carlo", "block_size", int, 8192)
    if block_size < 2:
        raise InputError("block_size must be at least 2", "monte_carlo.block_size")
    if antithetic and (n_paths % 2 or block_size % 2):
        raise InputError("antithetic sampling needs even n_paths and block_size", "monte_carlo.antithetic")
    max_mat = _get(cp, "validate", "max_maturity", float, 10.0)
    if not (math.isfinite(max_mat) and max_mat > 0):
        raise InputError("max_maturity must be positive", "validate.max_maturity")
    n_se = _get(cp, "validate", "n_se", float, 3.0)
    if not (math.isfinite(n_se) and n_se > 0):
        raise InputError("n_se must be positive", "validate.n_se")

    return ModelConfig(dt=dt, factors=FactorSet(tuple(weights), tuple(kappas), rho),
                       n_paths=n_paths, seed=seed, antithetic=antithetic,
                       block_size=block_size, max_maturity=max_mat, n_se=n_se)


def load_config(path) -> ModelConfig:
    return parse_config(Path(path).read_text(encoding="utf-8-sig"), str(path))


def dump_config(cfg: ModelConfig) -> str:
    fs = cfg.factors
    out = ["[model]", f"dt = {cfg.dt!r}", ""]
    for m, (w, k) in enumerate(zip(fs.weights, fs.mean_reversions), start=1):
        out += [f"[factor.{m}]", f"weight = {w!r}", f"mean_reversion = {k!r}", ""]
    rows = [" ".join(repr(x) for x in row) for row in fs.correlation.tolist()]
    out += ["[correlation]", "matrix = " + "\n    ".join(rows), ""]
    out += ["[monte_carlo]", f"n_paths = {cfg.n_paths}", f"seed = {cfg.seed}",
            f"antithetic = {str(cfg.antithetic).lower()}", f"block_size = {cfg.block_size}", ""]
    out += ["[validate]", f"max_maturity = {cfg.max_maturity!r}", f"n_se = {cfg.n_se!r}"]
    return "\n".join(out) + "\n"
