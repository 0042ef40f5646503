"""Style/content subspace disentanglement over token feature matrices.

Submodules are imported lazily so the CLI can apply the DICE_THREADS cap
before any BLAS runtime loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "aec",
    "align",
    "cli",
    "config",
    "edit",
    "errors",
    "evaluation",
    "subspace",
    "synthlab",
    "tensor_io",
)

__all__ = list(_SUBMODULES)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
