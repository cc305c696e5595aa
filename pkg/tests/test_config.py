import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpeprecoding.config import (
    CovarianceSpec,
    PowerAllocation,
    SystemConfig,
    class_power,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    uniform_power,
    validate_config,
)
from tpeprecoding.errors import ConfigError


def base_cfg(**kw):
    d = dict(M=128, K=32, P=1.0, sigma2=1.0, tau=0.1, J=3)
    d.update(kw)
    return SystemConfig(**d)


def test_reference_setup_is_valid():
    cfg = base_cfg()
    out_cfg, alloc = validate_config(cfg, uniform_power(1.0, 32))
    assert out_cfg is cfg
    assert alloc.p == (1 / 32,) * 32


@pytest.mark.parametrize("kw, msg", [
    (dict(tau=1.2), "tau"),
    (dict(tau=-0.1), "tau"),
    (dict(P=0.0), "P"),
    (dict(sigma2=-1.0), "sigma2"),
    (dict(J=0), "J"),
    (dict(M=0), "M"),
])
def test_rejects_out_of_range(kw, msg):
    with pytest.raises(ConfigError, match=msg):
        validate_config(base_cfg(**kw))


def test_rejects_zero_power_weight():
    p = [1 / 32] * 32
    p[5] = 0.0
    with pytest.raises(ConfigError, match="nonpositive power weight p\\[5\\]"):
        validate_config(base_cfg(), PowerAllocation(tuple(p)))


def test_rejects_allocation_size_mismatch():
    with pytest.raises(ConfigError):
        validate_config(base_cfg(), uniform_power(1.0, 8))


def test_scale_guard_catches_non_vanishing_weights():
    p = (1.0,) * 31 + (500.0,)
    with pytest.raises(ConfigError, match="O\\(1/K\\)"):
        validate_config(base_cfg(), PowerAllocation(p))


def test_rejects_bad_correlation():
    with pytest.raises(ConfigError):
        validate_config(base_cfg(covariance=CovarianceSpec("exponential", 1.0)))


def test_validate_is_idempotent():
    cfg = base_cfg()
    once = validate_config(cfg)
    twice = validate_config(*once)
    assert once == twice


@pytest.mark.parametrize("P, K, expected", [
    (1.0, 4, (0.25,) * 4),
    (2.0, 1, (2.0,)),
])
def test_uniform_power_values(P, K, expected):
    assert uniform_power(P, K).p == expected


def test_uniform_power_thirty_two_users():
    a = uniform_power(1.0, 32)
    assert a.p[0] == 1 / 32
    assert a.trace == pytest.approx(1.0, abs=1e-15)


@given(P=st.floats(1e-3, 1e3), K=st.integers(1, 512))
def test_uniform_trace_equals_budget(P, K):
    assert math.isclose(uniform_power(P, K).trace, P, rel_tol=1e-14)


def test_class_power_four_classes():
    a = class_power((1, 2, 3, 4), 64)
    assert a.classes.count(0) == 16 and a.classes.count(3) == 16
    assert a.p[0] == 1 / 64 and a.p[-1] == 4 / 64
    assert a.trace == pytest.approx(2.5)


def test_class_power_contiguous():
    assert class_power((1, 2), 4).p == (0.25, 0.25, 0.5, 0.5)


def test_single_unit_class_matches_uniform():
    assert class_power((1,), 8).p == uniform_power(1.0, 8).p


def test_class_power_divisibility():
    with pytest.raises(ConfigError):
        class_power((1, 2), 3)


def test_rho_and_snr():
    cfg = base_cfg(P=10.0, sigma2=2.0)
    assert cfg.rho == 5.0
    assert base_cfg().with_snr_db(20).P == pytest.approx(100.0)


def test_json_round_trip(tmp_path):
    doc = {"M": 256, "K": 64, "snr_db": 20, "tau": 0.1, "J": 3,
           "covariance": {"kind": "exponential", "a": 0.1},
           "power": {"kind": "classes", "weights": [1, 2, 3, 4]}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    cfg = config_from_dict(load_config(path))
    assert cfg.P == pytest.approx(100.0)
    assert cfg.allocation().class_weights == (1, 2, 3, 4)
    again = config_from_dict(config_to_dict(cfg))
    assert again.allocation().p == cfg.allocation().p
    assert again.covariance == cfg.covariance


def test_json_missing_key():
    with pytest.raises(ConfigError, match="'K'"):
        config_from_dict({"M": 4})


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
