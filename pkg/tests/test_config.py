import json

import numpy as np
import pytest

from divrr.config import (
    RefineConfig,
    RunConfig,
    derive_streams,
    dump_config,
    keyed_uniform,
    load_config,
    stream_seed,
)
from divrr.errors import DuplicateLabel, ParseError, ValidationError


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("")
    assert load_config(p) == RunConfig()
    p.write_text("{}")
    assert load_config(p) == RunConfig()


def test_round_trip(tmp_path):
    cfg = RunConfig(step_budget=12, seed=5, refine=RefineConfig(tau_reg=0.3))
    p = tmp_path / "c.json"
    dump_config(cfg, p)
    assert load_config(p) == cfg


def test_empty_band_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"refine": {"tau_rot": 0.9, "tau_mem": 0.8}}))
    with pytest.raises(ValidationError) as exc:
        load_config(p)
    assert exc.value.field == "refine.tau_rot"


def test_unknown_key_is_named(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"refine": {"tau_men": 0.8}}))
    with pytest.raises(ValidationError) as exc:
        load_config(p)
    assert "tau_men" in str(exc.value)


def test_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_config(p)


@pytest.mark.parametrize(
    "kw",
    [
        {"view_budget": 4},
        {"view_budget": 0},
        {"sensing_budget": 0},
        {"fov_degrees": 0.0},
        {"tau_mem": 1.2},
    ],
)
def test_refine_bounds(kw):
    with pytest.raises(ValidationError):
        RefineConfig(**kw)


def test_seed_bounds():
    with pytest.raises(ValidationError):
        RunConfig(seed=-1)
    with pytest.raises(ValidationError):
        RunConfig(seed=2**64)


def test_streams_repeatable():
    a = derive_streams(9, ["noise", "policy"])
    b = derive_streams(9, ["noise", "policy"])
    assert np.array_equal(a["noise"].random(64), b["noise"].random(64))


def test_streams_independent_prefixes():
    s = derive_streams(9, ["noise", "policy"])
    assert not np.array_equal(s["noise"].integers(0, 2**63, 64), s["policy"].integers(0, 2**63, 64))


def test_adding_label_leaves_others_alone():
    a = derive_streams(9, ["noise"])["noise"].random(32)
    b = derive_streams(9, ["noise", "extra"])["noise"].random(32)
    assert np.array_equal(a, b)


def test_duplicate_label():
    with pytest.raises(DuplicateLabel):
        derive_streams(1, ["a", "a"])


def test_stream_seed_depends_on_both_parts():
    assert stream_seed(1, "x") != stream_seed(2, "x")
    assert stream_seed(1, "x") != stream_seed(1, "y")


def test_keyed_uniform_range():
    vals = [keyed_uniform(3, "k", i) for i in range(1000)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert 0.45 < sum(vals) / len(vals) < 0.55
