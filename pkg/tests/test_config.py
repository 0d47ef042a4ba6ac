import json

import pytest

from ricci_lab.config.run_config import (ConfigError, FlowRunConfig, SolveConfig, SweepConfig, UndefinedVariable,
                                         VerifyConfig, config_as_dict, load_config)
from ricci_lab.flow import FlowMode
from ricci_lab.geometry import ProfileFamily


def test_defaults():
    config = load_config(FlowRunConfig)
    assert config.profile.family is ProfileFamily.ROUND
    assert config.flow.mode is FlowMode.NORMALIZED


def test_json_document_with_overrides(tmp_path):
    path = tmp_path / "flow.json"
    path.write_text(json.dumps({"profile": {"family": "perturbed", "eps": 0.3, "n": 41},
                                "flow": {"t_end": 1.0, "dt": 1e-4}}))
    config = load_config(FlowRunConfig, path, {"profile": {"n": 61, "k": None}, "flow": {"mode": "unnormalized"}})
    assert config.profile.family is ProfileFamily.PERTURBED
    assert config.profile.n == 61
    assert config.profile.eps == 0.3
    assert config.flow.mode is FlowMode.UNNORMALIZED
    assert config.flow.dt == 1e-4 and config.flow.t_end == 1.0


def test_yaml_document(tmp_path):
    path = tmp_path / "sweep.yaml"
    path.write_text("a_values: [0.3, -0.1]\nshoot:\n  step: 0.001\n")
    config = load_config(SweepConfig, path)
    assert config.values() == [-0.1, 0.3]
    assert config.shoot.step == 1e-3


def test_sweep_range():
    assert load_config(SweepConfig).values() == [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5]


@pytest.mark.parametrize("config_class, overrides", [
    (FlowRunConfig, {"profile": {"n": 60}}),
    (FlowRunConfig, {"profile": {"eps": 0.95}}),
    (FlowRunConfig, {"flow": {"dt": -1.0}}),
    (FlowRunConfig, {"flow": {"mode": "sideways"}}),
    (SolveConfig, {"a_lo": 1.0, "a_hi": -1.0}),
    (SweepConfig, {"a_min": 1.0, "a_max": 0.0}),
    (VerifyConfig, {"order_grids": [251]}),
])
def test_invalid_values(config_class, overrides):
    with pytest.raises(ConfigError):
        load_config(config_class, overrides=overrides)


def test_unknown_variables(tmp_path):
    path = tmp_path / "flow.yaml"
    path.write_text("flow:\n  dtt: 0.1\n")
    with pytest.raises(UndefinedVariable):
        load_config(FlowRunConfig, path)
    with pytest.raises(UndefinedVariable):
        load_config(SolveConfig, overrides={"bracket": [0, 1]})


def test_document_must_be_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(SolveConfig, path)


def test_malformed_document(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"a_lo\": [")
    with pytest.raises(ConfigError):
        load_config(SolveConfig, path)


def test_missing_document(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(SolveConfig, tmp_path / "absent.yaml")


def test_config_as_dict():
    document = config_as_dict(load_config(FlowRunConfig))
    assert document["profile"]["family"] == "round"
    assert document["flow"]["mode"] == "normalized"
    json.dumps(document)
