"""Kernel backend selection.

The compiled extension ``_kernels_c`` is used when it imports; otherwise the
numpy fallback is. Set ``PAIRWEIGHT_KERNELS`` to ``python`` or ``compiled``
to force one (``compiled`` raises if the extension is missing).
"""
import importlib
import os

_NAMES = {"python": "pairweight._kernels_py", "compiled": "pairweight._kernels_c"}


def load_backend(name):
    """Import and return the kernel module for ``name`` (python | compiled)."""
    try:
        return importlib.import_module(_NAMES[name])
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}") from None


def available_backends():
    found = ["python"]
    try:
        load_backend("compiled")
        found.append("compiled")
    except ImportError:
        pass
    return found


def _select():
    choice = os.environ.get("PAIRWEIGHT_KERNELS", "auto").lower()
    if choice in _NAMES:
        return choice, load_backend(choice)
    try:
        return "compiled", load_backend("compiled")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _impl = _select()

pairwise_distances = _impl.pairwise_distances
distance_backward = _impl.distance_backward
weighted_pair_loss = _impl.weighted_pair_loss
weighted_triplet_loss = _impl.weighted_triplet_loss
first_hit_rank = _impl.first_hit_rank
