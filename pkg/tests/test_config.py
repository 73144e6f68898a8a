from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_logistic.config import ConfigError, LambdaExpr, RunConfig, parse_config


def test_minimal_config_fills_defaults():
    cfg = parse_config("[domain]\nx0 = 0\nx1 = 1\n[problem]\nlambda = 20\n")
    prob = cfg["problem"]
    assert prob["lambda"] == LambdaExpr(0.0, 20.0)
    assert (prob["gamma"], prob["p"], prob["n"]) == (1.0, 2.0, 255)
    assert cfg["kernel"]["kind"] == "constant" and cfg["kernel"]["c"] == 1.0
    assert cfg["flow"]["alpha"] == (0.0,)


def test_empty_text_is_defaults():
    assert parse_config("") == RunConfig.defaults()


def test_negative_gamma_names_hypothesis():
    with pytest.raises(ConfigError) as info:
        parse_config("[problem]\ngamma = -1\n")
    (msg,) = info.value.errors
    assert "line 2" in msg and "gamma > 0" in msg


def test_all_errors_reported():
    text = "[problem]\ngamma = -1\np = 0.5\n[nowhere]\nk = 1\n[flow]\nalpha = abc\nstray line\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    errs = info.value.errors
    assert len(errs) == 5
    for line in ("line 2", "line 3", "line 4", "line 7", "line 8"):
        assert any(e.startswith(line) for e in errs)


def test_unknown_key_and_type_mismatch():
    with pytest.raises(ConfigError, match="unknown key 'bogus'"):
        parse_config("[run]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="integer"):
        parse_config("[problem]\nn = 12.5\n")
    with pytest.raises(ConfigError, match="one of"):
        parse_config("[kernel]\nkind = triangle\n")


def test_cross_field_checks():
    with pytest.raises(ConfigError, match="rotational"):
        parse_config("[flow]\nkind = rotational\n")
    with pytest.raises(ConfigError, match="2 component"):
        parse_config("[domain]\nkind = rectangle\n[problem]\nn = 31\n[flow]\nalpha = 1\n")
    with pytest.raises(ConfigError, match="cap"):
        parse_config("[problem]\nn = 100000\n")


def test_overrides():
    cfg = parse_config("[problem]\np = 1.5\n", ["problem.p=1.25", "flow.alpha = 2"])
    assert cfg["problem"]["p"] == 1.25 and cfg["flow"]["alpha"] == (2.0,)
    with pytest.raises(ConfigError, match="--set"):
        parse_config("", ["nonsense"])
    with pytest.raises(ConfigError, match="gamma"):
        parse_config("", ["problem.gamma=0"])


@pytest.mark.parametrize("text,scale,offset", [
    ("2*lambda1", 2.0, 0.0), ("lambda1 - 0.5", 1.0, -0.5), ("lambda1+1", 1.0, 1.0),
    ("0.5 * lambda1 + 2", 0.5, 2.0), ("19.7", 0.0, 19.7), ("-3", 0.0, -3.0),
])
def test_lambda_expressions(text, scale, offset):
    e = LambdaExpr.parse(text)
    assert (e.scale, e.offset) == (scale, offset)
    assert e.resolve(10.0) == pytest.approx(scale * 10 + offset)
    assert LambdaExpr.parse(str(e)) == e


def test_mid_expression():
    e = LambdaExpr.parse("mid")
    assert e.resolve(10.0, 11.0) == 10.5
    with pytest.raises(ValueError):
        e.resolve(10.0)
    with pytest.raises(ConfigError, match="mid"):
        parse_config("[problem]\nlambda = mid\n")
    with pytest.raises(ValueError):
        LambdaExpr.parse("lambda2")


finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)


@given(
    seed=st.integers(0, 2**31),
    gamma=st.floats(1e-3, 10),
    p=st.floats(1, 5),
    alpha=st.lists(finite, min_size=1, max_size=1),
    scale=finite,
    offset=finite,
    output=st.text(st.characters(min_codepoint=48, max_codepoint=122), min_size=1, max_size=12),
    values=st.lists(finite, min_size=1, max_size=6),
)
def test_round_trip(seed, gamma, p, alpha, scale, offset, output, values):
    cfg = RunConfig.defaults()
    cfg["run"]["seed"] = seed
    cfg["run"]["output"] = output
    cfg["problem"]["gamma"] = gamma
    cfg["problem"]["p"] = p
    cfg["problem"]["lambda"] = LambdaExpr(scale, offset)
    cfg["flow"]["alpha"] = tuple(alpha)
    cfg["alpha-scan"]["values"] = tuple(values)
    assert parse_config(cfg.serialize()) == cfg


def test_comment_characters_inside_values_survive():
    cfg = RunConfig.defaults()
    cfg["run"]["output"] = "a;b#c=d"
    assert parse_config("# note\n; note\n" + cfg.serialize()) == cfg


def test_acceptance_config_parses():
    from pathlib import Path

    text = (Path(__file__).parents[1] / "configs" / "acceptance.ini").read_text()
    cfg = parse_config(text)
    assert cfg["flow"]["alpha"] == (1.0,)
    assert parse_config(cfg.serialize()) == cfg
