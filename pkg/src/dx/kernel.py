"""Kernel backend selection and shared search helpers.

The compiled extension `dx._kernel_c` is preferred when it has been
built; `dx._kernel` is the pure-Python fallback.  Setting the
environment variable DX_PURE_PYTHON=1 forces the fallback, which is
useful for benchmarking and debugging.
"""

from __future__ import annotations

import os

from dx import _kernel as _py_kernel

try:
    from dx import _kernel_c as _c_kernel
except ImportError:
    _c_kernel = None

if _c_kernel is not None and not os.environ.get("DX_PURE_PYTHON"):
    _active = _c_kernel
    KERNEL_BACKEND = "c"
else:
    _active = _py_kernel
    KERNEL_BACKEND = "python"


def backends():
    """Name -> find_hom for every importable backend."""
    out = {"python": _py_kernel.find_hom}
    if _c_kernel is not None:
        out["c"] = _c_kernel.find_hom
    return out


def set_backend(name):
    """Switch the active backend ('python' or 'c'); returns previous name."""
    global _active, KERNEL_BACKEND
    prev = KERNEL_BACKEND
    if name == "python":
        _active = _py_kernel
    elif name == "c":
        if _c_kernel is None:
            raise ValueError("compiled kernel is not available")
        _active = _c_kernel
    else:
        raise ValueError(f"unknown kernel backend: {name!r}")
    KERNEL_BACKEND = name
    return prev


def find_hom(pattern, target, nvars, injective=False, allowed=None):
    return _active.find_hom(pattern, target, nvars, injective, allowed)


def order_pattern(pattern):
    """Reorder pattern facts most-constrained-first.

    Greedy: repeatedly pick the fact with the most arguments that are
    already fixed or bound by previously picked facts (ties broken by
    original position, so the result is deterministic).  This keeps the
    backtracking search shallow on chain- and star-shaped patterns.
    """
    remaining = list(enumerate(pattern))
    ordered = []
    seen = set()
    while remaining:
        best = None
        best_score = None
        for idx, (orig, (rel, args)) in enumerate(remaining):
            known = sum(1 for a in args if a >= 0 or a in seen)
            score = (-known, orig)
            if best_score is None or score < best_score:
                best_score = score
                best = idx
        orig, fact = remaining.pop(best)
        ordered.append(fact)
        for a in fact[1]:
            if a < 0:
                seen.add(a)
    return ordered
