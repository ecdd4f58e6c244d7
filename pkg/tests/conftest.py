import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(name, passed, detail)`` then assert."""
    def record(name, passed, detail=""):
        _ACCEPTANCE.append((name, bool(passed), detail))
        assert passed, f"{name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit(rng, n, d):
    z = rng.normal(size=(n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def pk_labels(P, K):
    return np.repeat(np.arange(P), K)


def tiny_config(out_dir, **overrides):
    """Fast synthetic training run (a few seconds at most)."""
    doc = {
        "data": {"synthetic": {"classes": 6, "per_class": 10, "dim": 8, "noise": 0.4,
                               "intrinsic_dim": 3, "seed": 1}, "train_class_fraction": 0.5},
        "output_dir": str(out_dir),
        "seed": 3,
        "epochs": 2,
        "steps_per_epoch": 5,
        "lr": 1e-3,
        "sampler": {"P": 3, "K": 4},
        "model": {"hidden_dims": [16], "head_dim": 6},
        "loss": {"mode": "pair", "mining": "thresholds", "m2": 0.8},
        "weighting": {"variant": "exponential", "beta": 2.0},
        "eval_ks": [1, 2, 4],
    }
    for dotted, value in overrides.items():
        *path, last = dotted.split(".")
        node = doc
        for key in path:
            node = node.setdefault(key, {})
        node[last] = value
    return doc


def write_config(path, doc):
    import json
    path.write_text(json.dumps(doc))
    return path
