"""Backend selection for the hot stepping kernels.

The compiled Cython core is used when it has been built; otherwise the
pure-numpy reference implementation takes over.  Both produce bit-identical
trajectories (same draw sequence, same float comparisons), so the choice only
affects speed.  Set ``LOOKAHEAD_TRAFFIC_KERNELS=python`` or ``=compiled`` to
force a backend; the default is ``auto``.
"""
from __future__ import annotations

import os

from . import _ref

try:
    from . import _core
except ImportError:  # extension not built in this environment
    _core = None

_ENV_VAR = "LOOKAHEAD_TRAFFIC_KERNELS"
_requested = os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto"

if _requested == "auto":
    _impl = _core if _core is not None else _ref
elif _requested == "compiled":
    if _core is None:
        raise ImportError(
            f"{_ENV_VAR}=compiled but the compiled kernels are not built; "
            "install the package (pip install -e .) or unset the variable"
        )
    _impl = _core
elif _requested == "python":
    _impl = _ref
else:
    raise RuntimeError(
        f"unrecognised {_ENV_VAR}={_requested!r}; use auto, compiled or python"
    )

BACKEND: str = "compiled" if _impl is _core else "python"

uniforms = _impl.uniforms
lookahead_counts = _impl.lookahead_counts
metropolis_advance = _impl.metropolis_advance
kmc_single = _impl.kmc_single
kmc_advance = _impl.kmc_advance


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _core is not None else ("python",)


def get_backend(name: str):
    """Return the kernel module for ``name`` (for benchmarks/parity tests)."""
    if name == "python":
        return _ref
    if name == "compiled":
        if _core is None:
            raise ValueError("compiled kernels are not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")
