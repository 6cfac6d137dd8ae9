"""Hot loops for contact sampling and barrier assembly.

The compiled extension is used when it has been built; otherwise the numpy
implementation is imported. Set ``MORTARCONTACT_BACKEND=python`` to force
the fallback.
"""
import importlib
import os

from . import _pykernels

__all__ = ["backend", "get_backend", "available_backends"]


def _load_compiled():
    try:
        return importlib.import_module("._ckernels", __name__)
    except ImportError:
        return None


_compiled = _load_compiled()


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def get_backend(name="auto"):
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    if name == "auto":
        return _compiled if _compiled is not None else _pykernels
    raise ValueError(f"unknown kernel backend {name!r}")


backend = get_backend(os.environ.get("MORTARCONTACT_BACKEND", "auto"))
