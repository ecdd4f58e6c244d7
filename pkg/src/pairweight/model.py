"""A small ReLU embedder with hand-written backward pass, Adam, and finite differences."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CacheMismatch, ParseError, ShapeMismatch

CHECKPOINT_FORMAT = "pairweight-mlp/1"


@dataclass
class ForwardCache:
    owner: int
    inputs: np.ndarray
    pre: list      # trunk pre-activations
    acts: list     # trunk outputs after ReLU


class MlpEmbedder:
    """Trunk of Linear+ReLU layers with linear projection heads.

    With ``fusion`` every trunk layer gets a head and the embedding is the
    concatenation of all head outputs (width ``len(hidden_dims) * head_dim``);
    otherwise only the last layer has a head. With no hidden layers the single
    head acts on the input directly.

    Parameters live in ``self.params`` keyed ``trunk.<l>.weight`` /
    ``head.<l>.bias`` etc.; weights are stored (fan_in, fan_out).
    """

    def __init__(self, input_dim, hidden_dims=(64,), head_dim=16, fusion=False, seed=0,
                 lr_scale=None):
        self.input_dim = int(input_dim)
        self.hidden_dims = [int(h) for h in hidden_dims]
        self.head_dim = int(head_dim)
        self.fusion = bool(fusion)
        self.seed = int(seed)
        self.lr_scale = dict(lr_scale or {})
        self.params = {}
        rng = np.random.default_rng(self.seed)
        dims = [self.input_dim] + self.hidden_dims
        for l in range(len(self.hidden_dims)):
            self._init_linear(rng, f"trunk.{l}", dims[l], dims[l + 1])
        for l in self.head_levels:
            self._init_linear(rng, f"head.{l}", dims[l + 1] if self.hidden_dims else dims[0],
                              self.head_dim)

    def _init_linear(self, rng, name, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        self.params[f"{name}.weight"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        self.params[f"{name}.bias"] = np.zeros(fan_out)

    @property
    def head_levels(self):
        depth = max(len(self.hidden_dims), 1)
        return list(range(depth)) if self.fusion else [depth - 1]

    @property
    def output_dim(self):
        return self.head_dim * len(self.head_levels)

    def num_params(self, prefix=""):
        return sum(v.size for k, v in self.params.items() if k.startswith(prefix))

    def scale_for(self, name):
        """Learning-rate multiplier for a parameter; longest matching prefix wins."""
        best, scale = -1, 1.0
        for prefix, s in self.lr_scale.items():
            if name.startswith(prefix) and len(prefix) > best:
                best, scale = len(prefix), float(s)
        return scale

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeMismatch(f"expected inputs (B, {self.input_dim}), got {x.shape}")
        pre, acts = [], []
        h = x
        for l in range(len(self.hidden_dims)):
            z = h @ self.params[f"trunk.{l}.weight"] + self.params[f"trunk.{l}.bias"]
            h = np.maximum(z, 0.0)
            pre.append(z)
            acts.append(h)
        feats = acts if acts else [x]
        outs = [feats[l] @ self.params[f"head.{l}.weight"] + self.params[f"head.{l}.bias"]
                for l in self.head_levels]
        out = outs[0] if len(outs) == 1 else np.concatenate(outs, axis=1)
        return out, ForwardCache(id(self), x, pre, acts)

    def backward(self, cache: ForwardCache, grad_out):
        """Reverse-mode gradients of all parameters given ∂L/∂output."""
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if cache.owner != id(self):
            raise CacheMismatch("cache was produced by a different model")
        if grad_out.shape != (cache.inputs.shape[0], self.output_dim):
            raise CacheMismatch(f"gradient shape {grad_out.shape} does not match the cached "
                                f"forward pass ({cache.inputs.shape[0]}, {self.output_dim})")
        grads = {}
        feats = cache.acts if cache.acts else [cache.inputs]
        feat_grads = [np.zeros_like(f) for f in feats]
        for slot, l in enumerate(self.head_levels):
            g = grad_out[:, slot * self.head_dim:(slot + 1) * self.head_dim]
            grads[f"head.{l}.weight"] = feats[l].T @ g
            grads[f"head.{l}.bias"] = g.sum(axis=0)
            feat_grads[l] += g @ self.params[f"head.{l}.weight"].T
        upstream = None
        for l in reversed(range(len(self.hidden_dims))):
            g = feat_grads[l] if upstream is None else feat_grads[l] + upstream
            g = g * (cache.pre[l] > 0)
            below = cache.inputs if l == 0 else cache.acts[l - 1]
            grads[f"trunk.{l}.weight"] = below.T @ g
            grads[f"trunk.{l}.bias"] = g.sum(axis=0)
            upstream = g @ self.params[f"trunk.{l}.weight"].T
        return {k: grads[k] for k in self.params}

    def copy(self):
        clone = MlpEmbedder.__new__(MlpEmbedder)
        clone.__dict__.update({k: v for k, v in self.__dict__.items() if k != "params"})
        clone.lr_scale = dict(self.lr_scale)
        clone.hidden_dims = list(self.hidden_dims)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def embed(self, x):
        return self.forward(x)[0]

    # -- checkpoints -------------------------------------------------------

    def to_json(self) -> str:
        """JSON checkpoint text; parameters flattened row-major at 17 significant digits."""
        doc = {
            "format": CHECKPOINT_FORMAT,
            "input_dim": self.input_dim,
            "hidden_dims": self.hidden_dims,
            "head_dim": self.head_dim,
            "fusion": self.fusion,
            "seed": self.seed,
            "lr_scale": self.lr_scale,
            "params": {},
        }
        blobs = {}
        for n, (name, value) in enumerate(self.params.items()):
            token = f"@@param{n}@@"
            blobs[f'"{token}"'] = "[" + ", ".join(f"{v:.17g}" for v in value.ravel()) + "]"
            doc["params"][name] = {"shape": list(value.shape), "values": token}
        text = json.dumps(doc, indent=1)
        for token, blob in blobs.items():
            text = text.replace(token, blob)
        return text + "\n"

    @classmethod
    def from_json(cls, text) -> "MlpEmbedder":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"checkpoint is not valid JSON: {exc.msg}", exc.lineno) from None
        if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
            raise ParseError(f"not a {CHECKPOINT_FORMAT} checkpoint")
        model = cls(doc["input_dim"], doc["hidden_dims"], doc["head_dim"], doc["fusion"],
                    doc["seed"], doc.get("lr_scale"))
        for name, entry in doc["params"].items():
            if name not in model.params:
                raise ParseError(f"unexpected parameter {name!r} in checkpoint")
            value = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
            if value.shape != model.params[name].shape:
                raise ShapeMismatch(f"{name}: checkpoint shape {value.shape} != model shape")
            model.params[name] = value
        return model

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


class Adam:
    """Adam with bias correction; one moment pair per named parameter."""

    def __init__(self, lr=1e-5, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads, lr_scale=None, frozen=()):
        """Update ``params`` in place.

        ``lr_scale`` maps a parameter name to its learning-rate multiplier;
        names in ``frozen`` are skipped entirely (moments untouched).
        """
        for k, g in grads.items():
            if params[k].shape != g.shape:
                raise ShapeMismatch(f"{k}: gradient {g.shape} vs parameter {params[k].shape}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k in frozen:
                continue
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            lr = self.lr * (lr_scale(k) if lr_scale else 1.0)
            params[k] -= lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
        return params


def adam_step(state: Adam, params, grads):
    return state.step(params, grads)


def finite_diff_gradient(loss_fn, x, h=1e-5):
    """Central differences (f(x+h) - f(x-h)) / 2h for every coordinate.

    ``x`` is an array or a dict of arrays; ``loss_fn`` receives the same
    structure (perturbed copies) and must return a scalar.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    if isinstance(x, dict):
        work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in x.items()}
        out = {}
        for name, arr in work.items():
            out[name] = _fd_array(lambda: loss_fn(work), arr, h)
        return out
    arr = np.array(x, dtype=np.float64, copy=True)
    return _fd_array(lambda: loss_fn(arr), arr, h)


def _fd_array(evaluate, arr, h):
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + h
        up = evaluate()
        flat[idx] = orig - h
        down = evaluate()
        flat[idx] = orig
        gflat[idx] = (up - down) / (2.0 * h)
    return grad
