import numpy as np
import pytest

from conftest import random_correlation
from hjmsva.calibrator import QuoteGrid, SwaptionQuote
from hjmsva.factors import FactorSet
from hjmsva.market_io import (
    InputError,
    ModelConfig,
    dump_config,
    dump_curve,
    dump_quotes,
    dump_surface,
    load_curve,
    load_quotes,
    load_surface,
    parse_config,
)
from hjmsva.svapprox import ForwardVolSurface


@pytest.fixture
def write(tmp_path):
    def _write(text, name="f.csv", newline="\n"):
        p = tmp_path / name
        p.write_bytes(text.replace("\n", newline).encode("utf-8"))
        return p
    return _write


def test_load_curve_two_pillars(write):
    c = load_curve(write("maturity_years,discount_factor\n1.0,0.98\n2.0,0.94\n"))
    assert c.discount(1.0) == 0.98 and c.discount(2.0) == 0.94
    assert c.discount(0.0) == 1.0


@pytest.mark.parametrize("body, line", [
    ("1.0,-0.5\n", 2),
    ("1.0,0.98\n1.0,0.97\n", 3),
    ("1.0,0.98\n0.5,0.99\n", 3),
    ("1.0,abc\n", 2),
    ("1.0\n", 2),
])
def test_load_curve_errors_carry_line(write, body, line):
    p = write("maturity_years,discount_factor\n" + body)
    with pytest.raises(InputError) as exc:
        load_curve(p)
    assert exc.value.location == f"{p}:{line}"


def test_load_curve_empty(write):
    with pytest.raises(InputError, match="no pillars"):
        load_curve(write(""))
    with pytest.raises(InputError, match="no pillars"):
        load_curve(write("maturity_years,discount_factor\n"))


def test_load_curve_bad_header(write):
    with pytest.raises(InputError, match="header"):
        load_curve(write("t,df\n1.0,0.98\n"))


def test_load_quotes_converts_bp(write):
    g = load_quotes(write("expiry_years,tenor_years,normal_vol_bp\n0.25,1.0,80\n"))
    assert len(g) == 1
    q = g.quotes[0]
    assert (q.expiry, q.tenor) == (0.25, 1.0)
    assert q.vol == pytest.approx(0.0080, rel=1e-15)


def test_load_quotes_sorts(write):
    g = load_quotes(write("expiry_years,tenor_years,normal_vol_bp\n1.0,2.0,70\n0.5,5.0,90\n1.0,1.0,75\n"))
    assert [(q.expiry, q.tenor) for q in g] == [(0.5, 5.0), (1.0, 1.0), (1.0, 2.0)]


@pytest.mark.parametrize("body, line, pattern", [
    ("0.25,1.0,80\n0.25,1.0,81\n", 3, "duplicate"),
    ("0.30,1.0,80\n", 2, "misaligned"),
    ("0.25,1.1,80\n", 2, "misaligned"),
    ("0.25,1.0,-1\n", 2, "negative"),
    ("0.0,1.0,80\n", 2, "one period"),
    ("0.25,1.0,nan\n", 2, "non-finite"),
])
def test_load_quotes_errors(write, body, line, pattern):
    p = write("expiry_years,tenor_years,normal_vol_bp\n" + body)
    with pytest.raises(InputError, match=pattern) as exc:
        load_quotes(p)
    assert exc.value.location == f"{p}:{line}"


@pytest.mark.parametrize("newline", ["\n", "\r\n"])
def test_csv_round_trips(write, newline):
    curve_text = "maturity_years,discount_factor\n0.5,0.99\n1.0,0.98\n2.0,0.9512294245007140\n"
    c = load_curve(write(curve_text, "c.csv", newline))
    c2 = load_curve(write(dump_curve(c), "c2.csv"))
    np.testing.assert_array_equal(c2.maturities, c.maturities)
    np.testing.assert_array_equal(c2.discount_factors, c.discount_factors)

    quote_text = "expiry_years,tenor_years,normal_vol_bp\n0.25,1.0,80.5\n2.0,10.0,91.25\n"
    g = load_quotes(write(quote_text, "q.csv", newline))
    g2 = load_quotes(write(dump_quotes(g), "q2.csv"))
    assert g2.quotes == g.quotes


def test_surface_round_trip(write):
    rng = np.random.default_rng(3)
    known = np.triu(rng.random((10, 10)) < 0.6)
    known[9, 9] = True
    fvs = ForwardVolSurface(np.triu(rng.uniform(0, 0.02, (10, 10))), known)
    back = load_surface(write(dump_surface(fvs)))
    np.testing.assert_array_equal(back.known, fvs.known)
    np.testing.assert_array_equal(back.values, fvs.values)


@pytest.mark.parametrize("body, pattern", [
    ("0.5,0.25,0.01\n", "t_i <= T_j"),
    ("0.0,0.25,0.01\n0.0,0.25,0.02\n", "duplicate"),
    ("0.0,0.3,0.01\n", "misaligned"),
    ("0.0,0.25,-0.01\n", "negative"),
])
def test_load_surface_errors(write, body, pattern):
    with pytest.raises(InputError, match=pattern):
        load_surface(write("t_i,T_j,sigma\n" + body))


def test_minimal_config_defaults():
    cfg = parse_config("[factor.1]\nweight = 1.0\nmean_reversion = 0.0\n")
    assert cfg == ModelConfig()
    assert cfg.factors == FactorSet((1.0,), (0.0,))
    assert parse_config("") == ModelConfig()


@pytest.mark.parametrize("text, key", [
    ("[factor.1]\n[factor.2]\n[correlation]\nmatrix = 1 1.5 1.5 1\n", "correlation.matrix"),
    ("[factor.1]\n[factor.2]\n[factor.3]\n[correlation]\nmatrix = 1 .9 -.9 .9 1 .9 -.9 .9 1\n",
     "correlation.matrix"),
    ("[factor.1]\n[correlation]\nmatrix = 1 0 0 1\n", "correlation.matrix"),
    ("[model]\ndt = -1\n", "model.dt"),
    ("[model]\ndt = abc\n", "model.dt"),
    ("[model]\nsteps = 4\n", "model.steps"),
    ("[factor.1]\nweight = 0\n", "factor.1.weight"),
    ("[factor.1]\nmean_reversion = -0.1\n", "factor.1.mean_reversion"),
    ("[monte_carlo]\nn_paths = 1\n", "monte_carlo.n_paths"),
    ("[monte_carlo]\nantithetic = maybe\n", "monte_carlo.antithetic"),
    ("[monte_carlo]\nn_paths = 101\nantithetic = true\n", "monte_carlo.antithetic"),
    ("[validate]\nn_se = 0\n", "validate.n_se"),
    ("[plots]\n", "plots"),
    ("[factor.2]\n", "factor"),
])
def test_config_errors_name_key(text, key):
    with pytest.raises(InputError) as exc:
        parse_config(text)
    assert exc.value.location == key


def test_three_factor_config_round_trip():
    rho = random_correlation(np.random.default_rng(4), 3)
    cfg = ModelConfig(dt=0.25, factors=FactorSet((1.0, 0.6, 0.3), (0.0, 0.3, 1.0), rho),
                      n_paths=4000, seed=17, antithetic=True, block_size=1000,
                      max_maturity=5.0, n_se=4.0)
    back = parse_config(dump_config(cfg))
    assert back == cfg
    assert parse_config(dump_config(back)) == back


def test_config_inline_comments_and_commas():
    cfg = parse_config(
        "[factor.1]\nweight = 1 ; main\n[factor.2]\nweight = 0.5\nmean_reversion = 0.3\n"
        "[correlation]\nmatrix = 1.0, 0.4,\n  0.4, 1.0\n"
    )
    np.testing.assert_array_equal(cfg.factors.correlation, [[1.0, 0.4], [0.4, 1.0]])


def test_sim_config_overrides():
    sim = ModelConfig(n_paths=10, seed=3).sim_config(2.0, 5.0, zero_drift=True)
    assert (sim.n_paths, sim.seed, sim.horizon, sim.max_maturity, sim.zero_drift) == (10, 3, 2.0, 5.0, True)
