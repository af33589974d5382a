"""Kernel selection.

The compiled kernels are used when the extension was built; otherwise, or
when ``DELAYLAB_PURE_PYTHON`` is set to a non-empty value other than "0",
the pure-Python loops are used.  Both produce identical numbers.
"""
import os

from . import _pykernels as python_kernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None


def _want_pure():
    return os.environ.get("DELAYLAB_PURE_PYTHON", "") not in ("", "0")


def get_kernels(name=None):
    """Return the kernel module for ``name`` ('cython' / 'python' / None=auto)."""
    if name is None:
        name = "python" if _want_pure() or compiled_kernels is None else "cython"
    if name == "python":
        return python_kernels
    if name == "cython":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not available; build the extension "
                              "with `pip install -e . --no-build-isolation`")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")


def backend_name(name=None):
    return "python" if get_kernels(name) is python_kernels else "cython"


def available_backends():
    return ["python"] + (["cython"] if compiled_kernels is not None else [])
