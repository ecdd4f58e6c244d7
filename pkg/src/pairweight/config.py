"""JSON run configuration: schema validation and conversion to the typed configs."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .data import gen_synthetic_clusters, load_csv_dataset
from .errors import ConfigError, PairWeightError
from .evaluation import zero_shot_split
from .losses import LossConfig
from .mining import SamplerConfig
from .objective import Objective
from .trainer import ModelConfig, TrainConfig
from .weighting import WeightScheme


@lru_cache(maxsize=1)
def config_schema() -> dict:
    return json.loads(resources.files("pairweight").joinpath("config_schema.json").read_text())


def _fill_defaults(schema, doc):
    """Return a copy of ``doc`` with every schema default filled in, recursively."""
    out = dict(doc)
    for key, sub in schema.get("properties", {}).items():
        if key not in out and "default" in sub:
            out[key] = sub["default"]
        if sub.get("type") == "object" and "properties" in sub:
            if key in out:
                out[key] = _fill_defaults(sub, out[key])
            elif "required" not in sub:
                out[key] = _fill_defaults(sub, {})
    return out


def _field_name(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "required":
        missing = err.message.split("'")[1]
        path = f"{path}.{missing}" if path else missing
    elif err.validator == "additionalProperties" and "'" in err.message:
        extra = err.message.split("'")[1]
        path = f"{path}.{extra}" if path else extra
    return path or "<root>"


def validate_config(doc) -> dict:
    """Validate against the published schema; returns the document with defaults."""
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        name = _field_name(err)
        raise ConfigError(err.message, field=name)
    return _fill_defaults(config_schema(), doc)


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig
    data: dict
    output_dir: Path
    raw: dict

    def with_objective(self, objective: Objective) -> "RunConfig":
        return replace(self, train=replace(self.train, objective=objective))


def _build(section, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except PairWeightError as exc:
        raise ConfigError(str(exc), field=section) from None


def parse_config(doc, base_dir=None) -> RunConfig:
    doc = validate_config(doc)
    s, mdl, lo, w = doc["sampler"], doc["model"], doc["loss"], doc["weighting"]
    sampler = _build("sampler", lambda: SamplerConfig(s["mode"], s["P"], s["K"], s["batch_size"],
                                                      seed=doc["seed"]))
    scheme = _build("weighting", lambda: WeightScheme(w["variant"], w["p"], w["q"], w["alpha"],
                                                      w["beta"], w["normalize"], w["norm_scope"]))
    loss = _build("loss", lambda: LossConfig(lo["m1"], lo["m2"], lo["m"], lo["epsilon"],
                                             lo["ms_plus_one"]))
    try:
        objective = Objective(lo["mode"], lo["mining"], scheme, loss)
    except ConfigError as exc:
        name = {"loss_mode": "loss.mode", "mining": "loss.mining"}.get(exc.field, exc.field)
        raise ConfigError(exc.detail, field=name) from None
    model = ModelConfig(tuple(mdl["hidden_dims"]), mdl["head_dim"], mdl["fusion"],
                        dict(mdl["lr_scale"]))
    train = TrainConfig(sampler, objective, model, doc["epochs"], doc["steps_per_epoch"],
                        doc["lr"], doc["seed"], doc["freeze_layers_for_epochs"],
                        tuple(doc["eval_ks"]))
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    data = dict(doc["data"])
    for key in ("path", "test_path"):
        if key in data:
            data[key] = str((base / data[key]) if not Path(data[key]).is_absolute() else data[key])
    out = Path(doc["output_dir"])
    return RunConfig(train, data, out if out.is_absolute() else base / out, doc)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})", field="<root>") from None
    return parse_config(doc, base_dir=path.parent)


def load_datasets(data: dict):
    """(train, test): an explicit test file, or a class-disjoint split of one dataset."""
    if "synthetic" in data:
        sy = data["synthetic"]
        full = gen_synthetic_clusters(sy["classes"], sy["per_class"], sy["dim"],
                                      sy.get("center_scale", 1.0), sy.get("noise", 0.5),
                                      sy.get("seed", 0), sy.get("intrinsic_dim"))
    else:
        full = load_csv_dataset(data["path"])
    if "test_path" in data:
        return full, load_csv_dataset(data["test_path"])
    return zero_shot_split(full, data.get("train_class_fraction", 0.6667),
                           data.get("split_seed", 0))


def default_config(output_dir="out") -> dict:
    """Small synthetic run used by ``compare-ms`` when no config is given."""
    return {
        "data": {"synthetic": {"classes": 12, "per_class": 40, "dim": 32, "center_scale": 1.0,
                               "noise": 0.4, "seed": 0, "intrinsic_dim": 4}, "train_class_fraction": 0.6667},
        "output_dir": output_dir,
        "seed": 0,
        "epochs": 5,
        "steps_per_epoch": 40,
        "lr": 1e-3,
        "sampler": {"P": 4, "K": 5},
        "model": {"hidden_dims": [64], "head_dim": 16},
        "loss": {"mode": "pair", "mining": "ms", "m1": 0.0, "m2": 1.0, "m": 1.0, "epsilon": 0.1},
        "weighting": {"variant": "exponential", "alpha": 2.0, "beta": 50.0, "normalize": True},
    }

