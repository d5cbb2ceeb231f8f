import copy

import numpy as np
import pytest

from iapi.config import LQR_SCALAR, PAPER_EXAMPLE, load_config, validate_config
from iapi.errors import ConfigError


def test_bundled_configs_validate():
    for doc in (PAPER_EXAMPLE, LQR_SCALAR):
        cfg = validate_config(doc)
        assert cfg.fingerprint
        pi_config = cfg.build()
        assert pi_config.model.state_dim == doc["state_dim"]


def test_unknown_top_level_key_rejected():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["surprise"] = 1
    with pytest.raises(ConfigError, match="surprise"):
        validate_config(doc)


def test_unknown_nested_key_rejected():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["pi"] = dict(doc["pi"], warp_factor=9)
    with pytest.raises(ConfigError, match="warp_factor"):
        validate_config(doc)


def test_missing_required_key():
    doc = copy.deepcopy(LQR_SCALAR)
    del doc["R"]
    with pytest.raises(ConfigError, match="R"):
        validate_config(doc)


def test_bad_expression_reports_path():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["f"] = ["sin("]
    with pytest.raises(ConfigError, match=r"f\[0\]"):
        validate_config(doc)


def test_dimension_mismatch_in_g():
    doc = copy.deepcopy(PAPER_EXAMPLE)
    doc["g"] = [["0"]]  # needs two rows
    with pytest.raises(ConfigError, match="g must be"):
        validate_config(doc)


def test_variable_out_of_range_in_expression():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["Q"] = "x2^2"
    with pytest.raises(ConfigError, match="Q"):
        validate_config(doc)


def test_enlarge_mode_requires_upsilon():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["pi"] = dict(doc["pi"], region_mode="enlarge")
    with pytest.raises(ConfigError, match="upsilon"):
        validate_config(doc)


def test_negative_spacing_rejected():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["pi"] = dict(doc["pi"], spacing=-0.1)
    with pytest.raises(ConfigError, match="spacing"):
        validate_config(doc)


def test_indefinite_weight_rejected():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["R"] = [[-1.0]]
    with pytest.raises(ConfigError):
        validate_config(doc).build()


def test_nonvanishing_initial_policy_rejected():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["mu0"] = ["x1 + 1"]
    with pytest.raises(ConfigError):
        validate_config(doc).build()


def test_indefinite_state_cost_rejected():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["Q"] = "x1^3"  # negative for x1 < 0
    with pytest.raises(ConfigError, match="positive"):
        validate_config(doc).build()


def test_min_degree_one_rejected():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["basis"] = {"monomials": {"min_degree": 1, "max_degree": 2}}
    with pytest.raises(ConfigError):
        validate_config(doc)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")


def test_load_config_bad_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "state_dim": 2,\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_fingerprint_invariant_to_key_order(tmp_path):
    doc = copy.deepcopy(LQR_SCALAR)
    shuffled = {k: doc[k] for k in reversed(list(doc))}
    assert validate_config(doc).fingerprint == validate_config(shuffled).fingerprint


def test_fingerprint_changes_with_content():
    doc = copy.deepcopy(LQR_SCALAR)
    doc["pi"] = dict(doc["pi"], epsilon=doc["pi"]["epsilon"] * 2)
    assert validate_config(doc).fingerprint != validate_config(LQR_SCALAR).fingerprint


def test_ball_region_config():
    doc = copy.deepcopy(PAPER_EXAMPLE)
    doc["omega0"] = {"ball": {"radius": 1.0, "norm": "inf"}}
    pi_config = validate_config(doc).build()
    lower, upper = pi_config.initial_region.bounding_box()
    assert np.allclose(lower, [-1.0, -1.0])
    assert np.allclose(upper, [1.0, 1.0])
