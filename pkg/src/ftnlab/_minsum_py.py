"""Vectorized numpy normalized min-sum decoder (fallback for the compiled kernel).

Arithmetic order matches ``_minsum.pyx`` so both backends agree bit for bit
on decisions and to rounding on posteriors.
"""

import numpy as np


def _padded(ptr, idx, fill):
    counts = np.diff(ptr)
    width = int(counts.max()) if len(counts) else 0
    out = np.full((len(counts), width), fill, dtype=np.int64)
    pos = np.arange(width)[None, :] < counts[:, None]
    out[pos] = idx
    return out, pos


def minsum_decode(llrs, check_ptr, edge_var, var_ptr, var_edges, alpha, max_iter):
    batch, n = llrs.shape
    n_edges = len(edge_var)
    check_idx, check_valid = _padded(check_ptr, np.arange(n_edges), n_edges)
    var_idx, _ = _padded(var_ptr, var_edges, n_edges)

    hard = (llrs < 0).astype(np.uint8)
    post = llrs.copy()
    converged = np.zeros(batch, dtype=np.uint8)
    iterations = np.full(batch, max_iter, dtype=np.int32)

    v2c = llrs[:, edge_var].copy()
    c2v = np.zeros((batch, n_edges))
    active = np.arange(batch)
    for it in range(1, max_iter + 1):
        msgs = np.concatenate([v2c[active], np.zeros((len(active), 1))], axis=1)[:, check_idx]
        mags = np.abs(msgs)
        mags[:, ~check_valid] = np.inf
        neg = msgs < 0
        arg = mags.argmin(axis=-1)
        min1 = np.take_along_axis(mags, arg[..., None], axis=-1)[..., 0]
        np.put_along_axis(mags, arg[..., None], np.inf, axis=-1)
        min2 = mags.min(axis=-1)
        parity = (neg & check_valid).sum(axis=-1) % 2
        pos = np.arange(check_idx.shape[1])[None, None, :]
        out_mag = np.where(pos == arg[..., None], min2[..., None], min1[..., None])
        sign = np.where(neg != (parity[..., None] == 1), -1.0, 1.0)
        vals = alpha * sign * out_mag

        c2v_act = np.empty((len(active), n_edges))
        c2v_act[:, check_idx[check_valid]] = vals[:, check_valid]
        c2v[active] = c2v_act

        ext = np.concatenate([c2v_act, np.zeros((len(active), 1))], axis=1)
        p = llrs[active] + ext[:, var_idx].sum(axis=-1)
        h = (p < 0).astype(np.uint8)
        post[active] = p
        hard[active] = h

        hh = np.concatenate([h[:, edge_var], np.zeros((len(active), 1), dtype=np.uint8)], axis=1)
        syn = np.bitwise_xor.reduce(hh[:, check_idx] * check_valid, axis=-1)
        ok = ~syn.any(axis=-1) & ~(p == 0).any(axis=-1)
        done = active[ok]
        converged[done] = 1
        iterations[done] = it

        keep = ~ok
        active = active[keep]
        if len(active) == 0:
            break
        v2c[active] = p[keep][:, edge_var] - c2v_act[keep]
    return hard, converged, iterations, post
