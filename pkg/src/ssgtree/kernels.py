"""Backend selector for the permutation kernels.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension is missing or ``SSGTREE_PURE=1`` is set.  Everything downstream
imports kernel functions from here only.
"""

import os

if os.environ.get("SSGTREE_PURE") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND

compose = _impl.compose
invert = _impl.invert
is_identity = _impl.is_identity
perm_power = _impl.perm_power
sift = _impl.sift
trace = _impl.trace
bfs_closure = _impl.bfs_closure
enumerate_elements = _impl.enumerate_elements


def identity(n):
    return tuple(range(n))
