import json

import pytest

from pairweight.config import (
    config_schema,
    default_config,
    load_config,
    load_datasets,
    parse_config,
    validate_config,
)
from pairweight.errors import ConfigError

from conftest import tiny_config, write_config


def test_defaults_filled():
    doc = validate_config({"data": {"synthetic": {"classes": 3, "per_class": 4, "dim": 2}},
                           "output_dir": "o"})
    assert doc["lr"] == 1e-5 and doc["epochs"] == 1
    assert doc["sampler"] == {"mode": "pk", "P": 16, "K": 5, "batch_size": 80}
    assert doc["weighting"]["variant"] == "exponential"
    assert doc["data"]["synthetic"]["noise"] == 0.5


@pytest.mark.parametrize("patch, field", [
    ({"loss.mode": "cosface"}, "loss.mode"),
    ({"lr": -1}, "lr"),
    ({"sampler.P": 1}, "sampler.P"),
    ({"weighting.colour": "red"}, "weighting.colour"),
])
def test_schema_violations_name_the_field(tmp_path, patch, field):
    with pytest.raises(ConfigError) as info:
        validate_config(tiny_config(tmp_path, **patch))
    assert info.value.field == field


def test_missing_required_field():
    with pytest.raises(ConfigError) as info:
        validate_config({"data": {"synthetic": {"classes": 3, "per_class": 4, "dim": 2}}})
    assert info.value.field == "output_dir"


def test_semantic_errors_name_the_field(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config(tiny_config(tmp_path, **{"loss.mode": "triplet", "loss.mining": "thresholds"}))
    assert info.value.field == "loss.mining"
    with pytest.raises(ConfigError) as info:
        parse_config(tiny_config(tmp_path, **{"loss.m1": 0.9, "loss.m2": 0.5}))
    assert info.value.field == "loss"


def test_parse_builds_train_config(tmp_path):
    run = parse_config(tiny_config(tmp_path))
    assert run.train.sampler.size == 12
    assert run.train.model.hidden_dims == (16,)
    assert run.train.objective.scheme.beta == 2.0
    assert run.output_dir == tmp_path


def test_relative_paths_resolve_against_config(tmp_path):
    sub = tmp_path / "cfg"
    sub.mkdir()
    doc = tiny_config("out")
    doc["data"] = {"path": "train.csv", "test_path": "/abs/test.csv"}
    run = load_config(write_config(sub / "c.json", doc))
    assert run.data["path"] == str(sub / "train.csv")
    assert run.data["test_path"] == "/abs/test.csv"
    assert run.output_dir == sub / "out"


def test_invalid_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.field == "<root>"


def test_load_datasets_split(tmp_path):
    train, test = load_datasets(parse_config(tiny_config(tmp_path)).data)
    assert train.classes.size == 3 and test.classes.size == 3


def test_default_config_is_valid():
    run = parse_config(default_config())
    assert run.train.objective.mining == "ms"


def test_schema_copy_in_docs_matches_package():
    from pathlib import Path
    docs = Path(__file__).resolve().parents[1] / "docs" / "config_schema.json"
    if not docs.exists():
        pytest.skip("docs copy not present")
    assert json.loads(docs.read_text()) == config_schema()
