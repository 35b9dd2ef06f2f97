import pytest
import tomli

from twowave.config import RunConfig, config_from_dict, dumps, load_config, template
from twowave.errors import DataFileError, ValidationError


def test_template_round_trip(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(template())
    cfg = load_config(path)
    assert cfg.to_dict() == RunConfig().validate().to_dict()


def test_dumps_round_trip():
    cfg = RunConfig(experiment="sweep", seed=7)
    cfg.sweep.values = [1.05, 1.3]
    back = config_from_dict(tomli.loads(dumps(cfg)))
    assert back.to_dict() == cfg.to_dict()


def test_ints_promote_to_floats():
    cfg = config_from_dict({"grid": {"r_max": 15}, "params": {"dim": 5}})
    assert cfg.grid.r_max == 15.0 and isinstance(cfg.params.dim, float)


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"grid": {"n_pts": 10}},
    {"grid": {"n_points": 10.5}},
    {"evolution": {"adaptive": 1}},
    {"experiment": "nope"},
    {"solver": {"method": "newton"}},
    {"initial": {"family": "square"}},
    {"seed": -1},
    {"seed": 2**64},
    {"solver": {"guess": [1.0]}},
    {"experiment": "sweep", "sweep": {"values": []}},
    {"params": {"m1": -1.0}},
    {"evolution": {"dt0": 0.0}},
    {"grid": "big"},
])
def test_invalid_configs(data):
    with pytest.raises(ValidationError):
        config_from_dict(data)


def test_load_errors(tmp_path):
    with pytest.raises(DataFileError):
        load_config(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid\nn_points = 3")
    with pytest.raises(ValidationError):
        load_config(bad)
