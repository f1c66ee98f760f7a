"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``ftnlab._minsum``, Cython) is used when it was
built; otherwise the vectorized numpy implementation in
``ftnlab._minsum_py`` is selected at import. Set ``FTNLAB_PURE_PYTHON=1`` to
force the fallback.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from . import _minsum_py

log = logging.getLogger(__name__)

__all__ = ["TannerGraph", "minsum_decode", "BACKEND", "backends"]


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Edge lists of a parity-check matrix in both check-major and variable-major order.

    Edges are numbered in check-major order. ``var_edges[var_ptr[v]:var_ptr[v+1]]``
    lists the edges incident to variable ``v``.
    """

    n: int
    m: int
    check_ptr: np.ndarray
    edge_var: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray

    @classmethod
    def from_dense(cls, h: np.ndarray) -> "TannerGraph":
        m, n = h.shape
        rows, cols = np.nonzero(h)  # row-major, so edges are check-major
        check_ptr = np.zeros(m + 1, dtype=np.int32)
        np.cumsum(np.bincount(rows, minlength=m), out=check_ptr[1:])
        order = np.argsort(cols, kind="stable")
        var_ptr = np.zeros(n + 1, dtype=np.int32)
        np.cumsum(np.bincount(cols, minlength=n), out=var_ptr[1:])
        return cls(n=n, m=m, check_ptr=check_ptr, edge_var=cols.astype(np.int32),
                   var_ptr=var_ptr, var_edges=order.astype(np.int32))

    @property
    def n_edges(self) -> int:
        return len(self.edge_var)


def _load_compiled():
    if os.environ.get("FTNLAB_PURE_PYTHON", "").strip() not in ("", "0"):
        return None
    try:
        from . import _minsum
    except ImportError:
        log.debug("compiled kernels unavailable; using numpy fallback")
        return None
    return _minsum


_compiled = _load_compiled()
BACKEND = "cython" if _compiled is not None else "python"


def backends() -> dict:
    """Available implementations keyed by name (for tests and benchmarks)."""
    out = {"python": _minsum_py.minsum_decode}
    if _compiled is not None:
        out["cython"] = _compiled.minsum_decode
    return out


def minsum_decode(llrs: np.ndarray, graph: TannerGraph, alpha: float, max_iter: int, backend: str | None = None):
    """Normalized min-sum flooding decoder over a batch of LLR rows.

    Returns ``(hard bits uint8 (B, n), converged uint8 (B,), iterations int32 (B,),
    posterior float64 (B, n))``.
    """
    impl = backends()[backend or BACKEND]
    return impl(np.ascontiguousarray(llrs, dtype=np.float64), graph.check_ptr, graph.edge_var,
                graph.var_ptr, graph.var_edges, float(alpha), int(max_iter))
