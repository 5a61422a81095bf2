"""Array-backed evaluation of the fused k-NN posterior over a dataset.

``SearchState`` tracks a growing labeled set and serves batch posterior
queries for the unlabeled pool. On the numba backend it maintains
per-point sorted neighbor lists incrementally; on the numpy backend (or
for datasets too large for the lists) it recomputes neighbor statistics
per revision. Both strategies give identical results: the model is
stateless given the labeled set.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import ConfigurationError

FUSION_GRID = np.arange(101) / 100.0
PROB_CLAMP = 1e-6

# Incremental neighbor lists are skipped above this points*k footprint.
_MAX_INCREMENTAL_CELLS = 8_000_000

_STATS_CHUNK = 65_536


def smoothed_prob(gamma: float, pi: float, pos: int, nn: int) -> float:
    """Smoothed positive fraction over a neighbor set."""
    return (gamma * pi + pos) / (gamma + nn)


def fit_q_grid(
    pred_text: np.ndarray, pred_loc: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Grid-scan the fusion weight maximizing the observed-label
    log-likelihood of leave-one-out predictions.

    Predictions are clamped to [1e-6, 1-1e-6] before the log; ties
    resolve toward the smallest grid value. The convex combination is
    evaluated as loc + q*(text - loc) so that pointwise-identical
    predictions give a bitwise-flat objective and the tie rule engages.
    Returns (q, log-likelihood per grid point).
    """
    fused = pred_loc[None, :] + FUSION_GRID[:, None] * (pred_text - pred_loc)[None, :]
    np.clip(fused, PROB_CLAMP, 1.0 - PROB_CLAMP, out=fused)
    like = np.where(labels[None, :] == 1, fused, 1.0 - fused)
    loglik = np.log(like).sum(axis=1)
    return float(FUSION_GRID[int(np.argmax(loglik))]), loglik


class DatasetIndex:
    """Columnar view of a dataset, rows in ascending point-id order."""

    __slots__ = ("ids", "xy", "emb", "deg", "truth", "row_of", "n", "dim")

    def __init__(self, ds: Dataset):
        if not ds.has_embeddings:
            raise ConfigurationError(
                "dataset has no embeddings; attach an embedding table first"
            )
        n = len(ds)
        if n == 0:
            raise ConfigurationError("dataset is empty")
        self.n = n
        self.ids = np.asarray([p.id for p in ds], dtype=np.int64)
        self.xy = np.asarray([(p.x, p.y) for p in ds], dtype=np.float64)
        self.emb = np.ascontiguousarray(
            np.stack([p.embedding for p in ds]).astype(np.float64)
        )
        self.dim = self.emb.shape[1]
        self.deg = ~np.any(self.emb, axis=1)
        self.truth = np.asarray(
            [-1 if p.truth is None else p.truth for p in ds], dtype=np.int64
        )
        self.row_of = {int(pid): i for i, pid in enumerate(self.ids)}

    @classmethod
    def of(cls, ds: Dataset) -> "DatasetIndex":
        idx = ds._index
        if idx is None:
            idx = cls(ds)
            ds._index = idx
        return idx

    def text_dists(self, rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
        return _kernels.cosine_dists(self.emb[rows_a], self.emb[rows_b])

    def loc_dists(self, rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
        return _kernels.sq_euclid_dists(self.xy[rows_a], self.xy[rows_b])


class _AttrState:
    """Per-attribute model constants plus optional incremental lists."""

    __slots__ = ("k", "gamma", "pi", "is_text", "nbr_d", "nbr_id", "nbr_lab",
                 "cnt", "pos")

    def __init__(self, model, n: int, is_text: bool, incremental: bool):
        self.k = int(model.k)
        self.gamma = float(model.gamma)
        self.pi = float(model.pi)
        self.is_text = is_text
        if incremental:
            self.nbr_d = np.full((n, self.k), np.inf)
            self.nbr_id = np.zeros((n, self.k), dtype=np.int64)
            self.nbr_lab = np.zeros((n, self.k), dtype=np.int64)
            self.cnt = np.zeros(n, dtype=np.int64)
            self.pos = np.zeros(n, dtype=np.int64)
        else:
            self.nbr_d = self.nbr_id = self.nbr_lab = self.cnt = self.pos = None


class SearchState:
    """Mutable labeled-set state with fast posterior queries.

    Appending an observation then querying equals rebuilding from
    scratch with the extended observation set.
    """

    def __init__(self, rm, ds: Dataset):
        self.rm = rm
        self.index = DatasetIndex.of(ds)
        n = self.index.n
        kmax = max(int(rm.text.k), int(rm.location.k))
        self.incremental = (
            _kernels.BACKEND == "numba" and n * kmax <= _MAX_INCREMENTAL_CELLS
        )
        self.text = _AttrState(rm.text, n, True, self.incremental)
        self.loc = _AttrState(rm.location, n, False, self.incremental)
        self.labeled_mask = np.zeros(n, dtype=bool)
        self.lab_rows = np.empty(0, dtype=np.int64)
        self.lab_labels = np.empty(0, dtype=np.int64)
        self._pool_cache: np.ndarray | None = None
        self._stats_cache: dict | None = None
        self._probs_cache: tuple | None = None

    @classmethod
    def from_observations(cls, rm, D, ds: Dataset) -> "SearchState":
        state = cls(rm, ds)
        for obs in D:
            state.add(obs.point_id, obs.label)
        return state

    # -- mutation ----------------------------------------------------------

    def add(self, point_id: int, label: int) -> None:
        """Record one oracle answer; invalidates cached pool queries."""
        row = self.index.row_of.get(int(point_id))
        if row is None:
            raise KeyError(f"no point with id {point_id}")
        if self.labeled_mask[row]:
            raise ValueError(f"point {point_id} is already labeled")
        if label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        at = int(np.searchsorted(self.lab_rows, row))
        self.lab_rows = np.insert(self.lab_rows, at, row)
        self.lab_labels = np.insert(self.lab_labels, at, int(label))
        self.labeled_mask[row] = True
        if self.incremental:
            pid = int(self.index.ids[row])
            d_text = 1.0 - self.index.emb @ self.index.emb[row]
            dx = self.index.xy[:, 0] - self.index.xy[row, 0]
            dy = self.index.xy[:, 1] - self.index.xy[row, 1]
            d_loc = dx * dx + dy * dy
            for attr, dvec in ((self.text, d_text), (self.loc, d_loc)):
                _kernels.insert_labeled(
                    attr.nbr_d, attr.nbr_id, attr.nbr_lab, attr.cnt, attr.pos,
                    np.ascontiguousarray(dvec), pid, int(label), attr.k,
                )
        self._pool_cache = None
        self._stats_cache = None
        self._probs_cache = None

    # -- queries -----------------------------------------------------------

    @property
    def m(self) -> int:
        return int(self.lab_rows.size)

    def pool_rows(self) -> np.ndarray:
        if self._pool_cache is None:
            self._pool_cache = np.flatnonzero(~self.labeled_mask)
        return self._pool_cache

    def pool_ids(self) -> np.ndarray:
        return self.index.ids[self.pool_rows()]

    def _stateless_stats(self, attr: _AttrState, pool: np.ndarray):
        lab_ids = self.index.ids[self.lab_rows]
        lab = self.lab_labels
        pos = np.empty(pool.size, dtype=np.int64)
        kd = np.empty(pool.size, dtype=np.float64)
        kc = np.empty(pool.size, dtype=np.int64)
        dist_fn = self.index.text_dists if attr.is_text else self.index.loc_dists
        for start in range(0, pool.size, _STATS_CHUNK):
            rows = pool[start : start + _STATS_CHUNK]
            dists = dist_fn(rows, self.lab_rows)
            p, d, c = _kernels.topk_label_stats(
                np.ascontiguousarray(dists), lab, attr.k
            )
            pos[start : start + rows.size] = p
            kd[start : start + rows.size] = d
            kc[start : start + rows.size] = c
        return pos, kd, lab_ids[kc], lab[kc]

    def pool_stats(self) -> dict:
        """Neighbor statistics (pos count, k-th distance/id/label) per
        attribute for every pool row, in pool order."""
        if self._stats_cache is not None:
            return self._stats_cache
        pool = self.pool_rows()
        m = self.m
        out = {}
        for name, attr in (("text", self.text), ("loc", self.loc)):
            if m == 0:
                z = np.zeros(pool.size, dtype=np.int64)
                out[name] = (z, np.zeros(pool.size), z, z)
            elif self.incremental:
                kk = min(attr.k, m)
                out[name] = (
                    attr.pos[pool].copy(),
                    attr.nbr_d[pool, kk - 1].copy(),
                    attr.nbr_id[pool, kk - 1].copy(),
                    attr.nbr_lab[pool, kk - 1].copy(),
                )
            else:
                out[name] = self._stateless_stats(attr, pool)
        self._stats_cache = out
        return out

    def attr_pool_probs(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-attribute posterior for every pool row (text, location)."""
        pool = self.pool_rows()
        m = self.m
        if m == 0:
            return (
                np.full(pool.size, self.text.pi),
                np.full(pool.size, self.loc.pi),
            )
        stats = self.pool_stats()
        out = []
        for name, attr in (("text", self.text), ("loc", self.loc)):
            pos = stats[name][0]
            kk = min(attr.k, m)
            probs = (attr.gamma * attr.pi + pos) / (attr.gamma + kk)
            if attr.is_text:
                probs = np.where(self.index.deg[pool], attr.pi, probs)
            out.append(probs)
        return out[0], out[1]

    def fused_pool_probs(self) -> np.ndarray:
        """Fused posterior for every pool row, in pool order."""
        if self._probs_cache is not None and self._probs_cache[0] == self.rm.q:
            return self._probs_cache[1]
        q = self.rm.q
        pt, pl = self.attr_pool_probs()
        fused = q * pt + (1.0 - q) * pl
        self._probs_cache = (q, fused)
        return fused

    def ens_scores_at(self, cand_pool_idx: np.ndarray, budget: int) -> np.ndarray:
        """Lookahead score of each candidate (given by pool position)
        under an assumed remaining budget."""
        probs = self.fused_pool_probs()
        if budget == 1:
            return probs[cand_pool_idx]
        pool = self.pool_rows()
        m = self.m
        q = self.rm.q
        t_att, l_att = self.text, self.loc
        l_tp = min(t_att.k, m + 1)
        l_lp = min(l_att.k, m + 1)
        w_t = l_tp + 2
        w_l = l_lp + 1
        pt_vals = (t_att.gamma * t_att.pi + np.arange(l_tp + 1)) / (
            t_att.gamma + l_tp
        )
        pt_vals = np.append(pt_vals, t_att.pi)  # last row: degenerate query
        pl_vals = (l_att.gamma * l_att.pi + np.arange(l_lp + 1)) / (
            l_att.gamma + l_lp
        )
        fused_tbl = q * pt_vals[:, None] + (1.0 - q) * pl_vals[None, :]
        flat = fused_tbl.ravel()
        order = np.argsort(-flat, kind="stable").astype(np.int64)
        bin_vals = flat[order]
        stats = self.pool_stats()
        pos_t, kd_t, kid_t, kl_t = stats["text"]
        pos_l, kd_l, kid_l, kl_l = stats["loc"]
        cand_rows = pool[cand_pool_idx]
        if m < t_att.k:
            # every point joins the text lists unconditionally
            dist_t = np.zeros((1, 1))
        else:
            dist_t = np.ascontiguousarray(self.index.text_dists(cand_rows, pool))
        return _kernels.ens_scores(
            probs,
            pos_t, kd_t, kid_t, kl_t,
            np.ascontiguousarray(self.index.deg[pool]),
            pos_l, kd_l, kid_l, kl_l,
            dist_t,
            np.ascontiguousarray(self.index.xy[pool, 0]),
            np.ascontiguousarray(self.index.xy[pool, 1]),
            np.ascontiguousarray(self.index.xy[cand_rows, 0]),
            np.ascontiguousarray(self.index.xy[cand_rows, 1]),
            np.ascontiguousarray(cand_pool_idx, dtype=np.int64),
            np.ascontiguousarray(self.index.ids[cand_rows]),
            m, t_att.k, l_att.k,
            bin_vals, order, w_t, w_l,
            budget - 1,
        )

    def loo_attr_preds(self) -> tuple[np.ndarray, np.ndarray]:
        """Leave-one-out per-attribute predictions for the labeled set,
        in ascending-id order (matching ``lab_labels``)."""
        m = self.m
        if m == 0:
            return np.empty(0), np.empty(0)
        out = []
        for attr in (self.text, self.loc):
            if m == 1:
                out.append(np.array([attr.pi]))
                continue
            kk = min(attr.k, m - 1)
            dist_fn = self.index.text_dists if attr.is_text else self.index.loc_dists
            dists = dist_fn(self.lab_rows, self.lab_rows)
            np.fill_diagonal(dists, np.inf)
            order = np.argsort(dists, axis=1, kind="stable")[:, :kk]
            pos = self.lab_labels[order].sum(axis=1)
            probs = (attr.gamma * attr.pi + pos) / (attr.gamma + kk)
            if attr.is_text:
                probs = np.where(self.index.deg[self.lab_rows], attr.pi, probs)
            out.append(probs)
        return out[0], out[1]

    def refit_q(self) -> float:
        """Refit the fusion weight on the current labeled set (grid MLE)."""
        if self.m == 0:
            self.rm.q = 0.5
            return 0.5
        pt, pl = self.loo_attr_preds()
        q, _ = fit_q_grid(pt, pl, self.lab_labels)
        self.rm.q = q
        return q
