import pytest
import yaml

from bilqctrl.config import NumericSettings, RunConfig, build_config, load_run_config
from bilqctrl.exceptions import SystemFileError, ValidationError


def test_numeric_defaults():
    numerics = NumericSettings()
    assert numerics.steps_per_period == 64
    assert numerics.scan_points == 401
    assert (numerics.min_n, numerics.max_n) == (16, 64)
    assert numerics.gap_tol == 1e-9


def test_ladder_order_enforced():
    with pytest.raises(ValidationError, match="min_n"):
        build_config({"subcommand": "cost-sweep", "numerics": {"min_n": 128, "max_n": 64}})


def test_unknown_fields_rejected():
    with pytest.raises(ValidationError, match="invalid run config"):
        build_config({"subcommand": "model", "colour": "blue"})
    with pytest.raises(ValidationError, match="subcommand"):
        build_config({"subcommand": "fit"})
    with pytest.raises(ValidationError, match="scan_points"):
        build_config({"subcommand": "synthesize", "numerics": {"scan_points": 10}})


def test_canonical_round_trip():
    config = RunConfig(subcommand="synthesize", system="molecule:6", seed=3,
                       params={"shape": "duty", "eta": 0.4, "n": [4, 8]})
    text = config.to_canonical()
    assert RunConfig.from_canonical(text) == config
    assert text == RunConfig.from_canonical(text).to_canonical()
    assert " " not in text


def test_with_params_merges():
    config = RunConfig(subcommand="synthesize", params={"n": [4]})
    updated = config.with_params(eta=0.1)
    assert updated.params == {"n": [4], "eta": 0.1}
    assert config.params == {"n": [4]}


def test_load_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({
        "subcommand": "cost-sweep",
        "system": "molecule:10",
        "numerics": {"min_n": 16, "max_n": 32},
        "params": {"etas": [0.4, 0.2]},
    }))
    config = load_run_config(path)
    assert config.numerics.max_n == 32
    assert config.params["etas"] == [0.4, 0.2]


def test_load_manifest(tmp_path):
    config = RunConfig(subcommand="transitions", system="molecule:8")
    path = tmp_path / "manifest.json"
    path.write_text('{"config": ' + config.to_canonical() + ', "seed": 42}')
    assert load_run_config(path) == config


def test_shipped_configs_load():
    from pathlib import Path
    configs = Path(__file__).parent.parent / "configs"
    for path in sorted(configs.glob("*.yaml")):
        assert isinstance(load_run_config(path), RunConfig)


def test_bad_yaml_reports_location(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("subcommand: model\nparams: [1, 2\n")
    with pytest.raises(SystemFileError) as info:
        load_run_config(path)
    assert info.value.path == str(path)
    assert info.value.line is not None

    path.write_text("- just\n- a list\n")
    with pytest.raises(SystemFileError, match="mapping"):
        load_run_config(path)
