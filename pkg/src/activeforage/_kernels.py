"""Hot inner loops: labeled-neighbor statistics and lookahead scoring.

Two interchangeable backends produce identical results:

* ``numba`` (default when importable) — JIT loops plus an incremental
  neighbor-list update used by the simulation engine.
* ``numpy`` — vectorized fallback that recomputes statistics from
  scratch; selected with ``ACTIVEFORAGE_KERNELS=numpy``.

``benchmarks/kernel_bench.py`` times both. All tie-breaking is by
ascending point id; labeled columns are always passed in ascending-id
order so a stable sort realizes the tie rule.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("ACTIVEFORAGE_KERNELS", "auto").strip().lower()
if _env not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"ACTIVEFORAGE_KERNELS={_env!r}: expected 'numba', 'numpy', or 'auto'"
    )

_HAVE_NUMBA = False
if _env in ("auto", "numba"):
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _env == "numba":
            raise
BACKEND = "numba" if _HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# distance matrices (BLAS-backed, shared by both backends)
# ---------------------------------------------------------------------------


def cosine_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine distance 1 - a.b for unit (or zero) vectors."""
    d = a @ b.T
    np.subtract(1.0, d, out=d)
    return d


def sq_euclid_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared euclidean distance between 2-D coordinates.

    Direct difference form (no a^2+b^2-2ab trick) so every code path
    produces bit-identical distances; used for rank order only.
    """
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    return dx * dx + dy * dy


# ---------------------------------------------------------------------------
# top-k labeled-neighbor statistics
# ---------------------------------------------------------------------------


def _topk_label_stats_numpy(dists, labels, k):
    """Per query row: positives among the k nearest labeled columns,
    and the k-th neighbor's (distance, column).

    Columns must be in ascending point-id order; the stable sort then
    breaks distance ties toward the smaller id.
    """
    m = dists.shape[1]
    kk = min(k, m)
    order = np.argsort(dists, axis=1, kind="stable")[:, :kk]
    pos = labels[order].sum(axis=1)
    kth_col = order[:, -1]
    kth_d = np.take_along_axis(dists, kth_col[:, None], axis=1)[:, 0]
    return pos.astype(np.int64), kth_d, kth_col.astype(np.int64)


def _topk_label_stats_loop(dists, labels, k):
    nq, m = dists.shape
    kk = k if k < m else m
    pos = np.zeros(nq, np.int64)
    kth_d = np.empty(nq, np.float64)
    kth_col = np.empty(nq, np.int64)
    best_d = np.empty(kk, np.float64)
    best_c = np.empty(kk, np.int64)
    for i in range(nq):
        cnt = 0
        for j in range(m):
            d = dists[i, j]
            if cnt < kk:
                t = cnt
                while t > 0 and best_d[t - 1] > d:
                    best_d[t] = best_d[t - 1]
                    best_c[t] = best_c[t - 1]
                    t -= 1
                best_d[t] = d
                best_c[t] = j
                cnt += 1
            elif d < best_d[kk - 1]:
                t = kk - 1
                while t > 0 and best_d[t - 1] > d:
                    best_d[t] = best_d[t - 1]
                    best_c[t] = best_c[t - 1]
                    t -= 1
                best_d[t] = d
                best_c[t] = j
        p = 0
        for t in range(kk):
            p += labels[best_c[t]]
        pos[i] = p
        kth_d[i] = best_d[kk - 1]
        kth_col[i] = best_c[kk - 1]
    return pos, kth_d, kth_col


# ---------------------------------------------------------------------------
# incremental sorted neighbor lists (numba engine only)
# ---------------------------------------------------------------------------


def _insert_labeled_loop(nbr_d, nbr_id, nbr_lab, cnt, pos, dvec, new_id, new_lab, k):
    """Fold one newly labeled point into every row's sorted k-list.

    Lists are ordered by (distance, id); ``pos`` tracks the positive
    count over the current list. Mutates all state arrays in place.
    """
    n = dvec.shape[0]
    for i in range(n):
        c = cnt[i]
        d = dvec[i]
        if c == k:
            last_d = nbr_d[i, k - 1]
            if d > last_d or (d == last_d and new_id > nbr_id[i, k - 1]):
                continue
            pos[i] += new_lab - nbr_lab[i, k - 1]
            t = k - 1
        else:
            pos[i] += new_lab
            cnt[i] = c + 1
            t = c
        while t > 0 and (
            nbr_d[i, t - 1] > d or (nbr_d[i, t - 1] == d and nbr_id[i, t - 1] > new_id)
        ):
            nbr_d[i, t] = nbr_d[i, t - 1]
            nbr_id[i, t] = nbr_id[i, t - 1]
            nbr_lab[i, t] = nbr_lab[i, t - 1]
            t -= 1
        nbr_d[i, t] = d
        nbr_id[i, t] = new_id
        nbr_lab[i, t] = new_lab


# ---------------------------------------------------------------------------
# lookahead conditioning scores
# ---------------------------------------------------------------------------
#
# For each candidate x and hypothetical label y, every pool point's
# posterior after adding (x, y) is determined by whether x enters its
# neighbor list (evicting the current k-th when full). Posteriors then
# take at most (k+2)*(k+1) distinct values on a (text count, location
# count) grid, so summing the top (T-1) values reduces to a histogram
# walk over bins pre-sorted by fused value. Candidates only move pool
# points whose neighbor list they actually enter, so each candidate
# edits a copy of the step-wide base histogram; while the labeled set
# is smaller than k every point joins unconditionally and the histogram
# is a pure index shift (no distances needed at all).


def _ens_scores_loop(
    pool_p,
    pos_t, kd_t, kid_t, kl_t, deg_t,
    pos_l, kd_l, kid_l, kl_l,
    dist_t, px, py, cx, cy,
    cand_rows, cand_ids,
    m, k_t, k_l,
    bin_vals, bin_flat, w_t, w_l,
    topcount,
):
    nu = pool_p.shape[0]
    nc = cand_rows.shape[0]
    nbins = bin_vals.shape[0]
    force_t = m < k_t
    force_l = m < k_l
    abase = np.empty(nu, np.int64)
    bbase = np.empty(nu, np.int64)
    fbase = np.empty(nu, np.int64)
    hbase = np.zeros(nbins, np.int64)
    for u in range(nu):
        a = w_t - 1 if deg_t[u] else pos_t[u]
        abase[u] = a
        bbase[u] = pos_l[u]
        fbase[u] = a * w_l + pos_l[u]
        hbase[fbase[u]] += 1
    scores = np.empty(nc, np.float64)
    cnt0 = np.empty(nbins, np.int64)
    cnt1 = np.empty(nbins, np.int64)
    for c in range(nc):
        crow = cand_rows[c]
        cid = cand_ids[c]
        if force_t and force_l:
            # every point gains the hypothetical neighbor: y=0 keeps
            # counts, y=1 shifts both counts up by one
            for b in range(nbins):
                cnt0[b] = hbase[b]
                cnt1[b] = 0
            for a in range(w_t - 1):
                for b in range(w_l - 1):
                    h = hbase[a * w_l + b]
                    if h > 0:
                        cnt1[(a + 1) * w_l + b + 1] = h
            for b in range(w_l - 1):
                h = hbase[(w_t - 1) * w_l + b]
                if h > 0:
                    cnt1[(w_t - 1) * w_l + b + 1] = h
            a = abase[crow]
            b = bbase[crow]
            cnt0[a * w_l + b] -= 1
            if a == w_t - 1:
                cnt1[a * w_l + b + 1] -= 1
            else:
                cnt1[(a + 1) * w_l + b + 1] -= 1
        else:
            for b in range(nbins):
                cnt0[b] = hbase[b]
                cnt1[b] = hbase[b]
            own = fbase[crow]
            cnt0[own] -= 1
            cnt1[own] -= 1
            ccx = cx[c]
            ccy = cy[c]
            for u in range(nu):
                if u == crow:
                    continue
                join_t = False
                evict_t = 0
                if not deg_t[u]:
                    if force_t:
                        join_t = True
                    else:
                        d = dist_t[c, u]
                        kd = kd_t[u]
                        if d < kd:
                            join_t = True
                            evict_t = kl_t[u]
                        elif d == kd and cid < kid_t[u]:
                            join_t = True
                            evict_t = kl_t[u]
                if force_l:
                    join_l = True
                    evict_l = 0
                else:
                    join_l = False
                    evict_l = 0
                    dx = px[u] - ccx
                    dy = py[u] - ccy
                    d = dx * dx + dy * dy
                    kd = kd_l[u]
                    if d < kd:
                        join_l = True
                        evict_l = kl_l[u]
                    elif d == kd and cid < kid_l[u]:
                        join_l = True
                        evict_l = kl_l[u]
                if not (join_t or join_l):
                    continue
                if deg_t[u]:
                    a0 = abase[u]
                    a1 = a0
                elif join_t:
                    a0 = pos_t[u] - evict_t
                    a1 = a0 + 1
                else:
                    a0 = pos_t[u]
                    a1 = a0
                if join_l:
                    b0 = pos_l[u] - evict_l
                    b1 = b0 + 1
                else:
                    b0 = pos_l[u]
                    b1 = b0
                base = fbase[u]
                f0 = a0 * w_l + b0
                if f0 != base:
                    cnt0[base] -= 1
                    cnt0[f0] += 1
                f1 = a1 * w_l + b1
                if f1 != base:
                    cnt1[base] -= 1
                    cnt1[f1] += 1
        s0 = 0.0
        s1 = 0.0
        need0 = topcount
        need1 = topcount
        for t in range(nbins):
            if need0 == 0 and need1 == 0:
                break
            flat = bin_flat[t]
            if need0 > 0:
                take = cnt0[flat]
                if take > need0:
                    take = need0
                if take > 0:
                    s0 += take * bin_vals[t]
                    need0 -= take
            if need1 > 0:
                take = cnt1[flat]
                if take > need1:
                    take = need1
                if take > 0:
                    s1 += take * bin_vals[t]
                    need1 -= take
        p = pool_p[crow]
        scores[c] = p * (1.0 + s1) + (1.0 - p) * s0
    return scores


def _ens_scores_numpy(
    pool_p,
    pos_t, kd_t, kid_t, kl_t, deg_t,
    pos_l, kd_l, kid_l, kl_l,
    dist_t, px, py, cx, cy,
    cand_rows, cand_ids,
    m, k_t, k_l,
    bin_vals, bin_flat, w_t, w_l,
    topcount,
):
    """Vectorized twin of the conditioning loop (materializes per-point
    conditioned values and partial-sorts each candidate column).

    The text distance matrix arrives candidate-major (nc, nu); location
    distances are derived from the coordinate vectors.
    """
    nu = pool_p.shape[0]
    nc = cand_rows.shape[0]
    # Rebuild the fused-value table from its descending flattening: rows
    # index the conditioned text count (last row = degenerate prior),
    # columns the conditioned location count.
    fused_tbl = np.empty((w_t, w_l))
    fused_tbl.flat[bin_flat] = bin_vals

    def conditioned_counts(pos, kd, kid, kl, dist_pool_major, k):
        if m < k:
            join = np.ones((nu, nc), dtype=bool)
            j0 = np.broadcast_to(pos[:, None], (nu, nc)).copy()
        else:
            dd = dist_pool_major
            join = (dd < kd[:, None]) | (
                (dd == kd[:, None]) & (cand_ids[None, :] < kid[:, None])
            )
            j0 = pos[:, None] - np.where(join, kl[:, None], 0)
        return j0, j0 + join

    if m < k_l:
        dist_l = None
    else:
        ddx = px[:, None] - cx[None, :]
        ddy = py[:, None] - cy[None, :]
        dist_l = ddx * ddx + ddy * ddy
    jt0, jt1 = conditioned_counts(
        pos_t, kd_t, kid_t, kl_t, None if m < k_t else dist_t.T, k_t
    )
    jl0, jl1 = conditioned_counts(pos_l, kd_l, kid_l, kl_l, dist_l, k_l)
    deg_col = deg_t[:, None]
    at0 = np.where(deg_col, w_t - 1, jt0)
    at1 = np.where(deg_col, w_t - 1, jt1)
    v0 = fused_tbl[at0, jl0]
    v1 = fused_tbl[at1, jl1]
    col = np.arange(nc)
    v0[cand_rows, col] = -np.inf
    v1[cand_rows, col] = -np.inf
    avail = nu - 1
    take = min(topcount, avail)
    if take <= 0:
        s0 = np.zeros(nc)
        s1 = np.zeros(nc)
    elif take == avail:
        s0 = np.where(np.isneginf(v0), 0.0, v0).sum(axis=0)
        s1 = np.where(np.isneginf(v1), 0.0, v1).sum(axis=0)
    else:
        s0 = np.partition(v0, nu - take, axis=0)[nu - take :].sum(axis=0)
        s1 = np.partition(v1, nu - take, axis=0)[nu - take :].sum(axis=0)
    p = pool_p[cand_rows]
    return p * (1.0 + s1) + (1.0 - p) * s0


if _HAVE_NUMBA:
    _topk_label_stats_numba = njit(cache=True)(_topk_label_stats_loop)
    insert_labeled = njit(cache=True)(_insert_labeled_loop)
    _ens_scores_numba = njit(cache=True)(_ens_scores_loop)
    topk_label_stats = _topk_label_stats_numba
    ens_scores = _ens_scores_numba
else:
    insert_labeled = _insert_labeled_loop
    topk_label_stats = _topk_label_stats_numpy
    ens_scores = _ens_scores_numpy

# Both implementations, keyed for the kernel benchmark and equality tests.
IMPLEMENTATIONS = {
    "numpy": {
        "topk_label_stats": _topk_label_stats_numpy,
        "ens_scores": _ens_scores_numpy,
    },
    "numba": None
    if not _HAVE_NUMBA
    else {
        "topk_label_stats": _topk_label_stats_numba,
        "ens_scores": _ens_scores_numba,
    },
}
