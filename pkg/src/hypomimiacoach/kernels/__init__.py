"""Kernel backend selection.

The compiled Cython backend is used when its extension built; otherwise the
pure-numpy reference backend takes over. Set HC_PURE_PYTHON=1 to force the
fallback (used by tests and the benchmark to compare backends).
"""

from __future__ import annotations

import os

from . import reference

_impl = reference
if not os.environ.get("HC_PURE_PYTHON"):
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = reference


def backend_name() -> str:
    return _impl.NAME


def get_backend(name: str):
    """Fetch a backend by name ('python' or 'compiled'); ImportError if unbuilt."""
    if name == "python":
        return reference
    if name == "compiled":
        from . import _fast

        return _fast
    raise ValueError(f"unknown backend {name!r}")


PROB_CLAMP = reference.PROB_CLAMP

knn_adjacency = _impl.knn_adjacency
knn_adjacency_batch = _impl.knn_adjacency_batch
node_features_batch = _impl.node_features_batch
forward_batch = _impl.forward_batch
loss_and_grads = _impl.loss_and_grads
