"""Query policies: which unlabeled point to surface next.

* random — uniform over the pool, deterministic in (seed, step)
* one_step — greedy argmax of the fused posterior
* ell_step — exact lookahead for horizons 1 and 2
* ens — budgeted nonmyopic scoring: a candidate's value is its own
  probability plus the expected sum of the top (budget-1) posteriors
  after conditioning on its hypothetical label

All tie-breaking is by ascending point id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataPoint, Dataset
from .engine import SearchState
from .errors import ConfigurationError, PoolExhaustedError
from .relevance import Observation, ObservationSet, RelevanceModel, fused_probability

POLICY_KINDS = ("none", "random", "one_step", "ell_step", "ens")


@dataclass(frozen=True)
class PolicySpec:
    """Which policy to run, plus its kind-specific parameters."""

    kind: str
    ell: int | None = None
    budget: int | None = None
    seed: int | None = None
    candidate_cap: int = 500

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")
        if self.ell is not None and self.kind != "ell_step":
            raise ConfigurationError("ell applies to ell_step only")
        if self.budget is not None and self.kind != "ens":
            raise ConfigurationError("budget applies to ens only")
        if self.seed is not None and self.kind != "random":
            raise ConfigurationError("seed applies to random only")
        if self.kind == "ell_step":
            if self.ell is None or not 1 <= self.ell <= 2:
                raise ConfigurationError("ell_step requires ell in {1, 2}")
        if self.kind == "ens":
            if self.budget is None or self.budget < 1:
                raise ConfigurationError("ens requires budget >= 1")
        if self.candidate_cap < 1:
            raise ConfigurationError("candidate_cap must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        """Parse compact CLI form: ``one_step``, ``random[:seed]``,
        ``ell_step:L``, ``ens:BUDGET[:cap]``."""
        parts = text.strip().split(":")
        kind = parts[0]
        try:
            if kind == "random":
                return cls(kind, seed=int(parts[1]) if len(parts) > 1 else 0)
            if kind == "ell_step":
                return cls(kind, ell=int(parts[1]))
            if kind == "ens":
                cap = int(parts[2]) if len(parts) > 2 else 500
                return cls(kind, budget=int(parts[1]), candidate_cap=cap)
            if len(parts) > 1:
                raise ConfigurationError(f"policy {kind!r} takes no parameter")
            return cls(kind)
        except (IndexError, ValueError) as exc:
            raise ConfigurationError(f"bad policy spec {text!r}: {exc}") from exc

    @property
    def label(self) -> str:
        if self.kind == "ens":
            return f"ens_{self.budget}"
        if self.kind == "ell_step":
            return f"ell_step_{self.ell}"
        return self.kind

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in ("ell", "budget", "seed"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.kind == "ens":
            out["candidate_cap"] = self.candidate_cap
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PolicySpec":
        if not isinstance(raw, dict) or "kind" not in raw:
            raise ConfigurationError("policy must be an object with a 'kind'")
        known = {k: raw[k] for k in ("kind", "ell", "budget", "seed", "candidate_cap") if k in raw}
        return cls(**known)


def _rng_for(seed, step: int) -> np.random.Generator:
    if isinstance(seed, (tuple, list)):
        entropy = [int(s) & 0xFFFFFFFFFFFFFFFF for s in seed]
    else:
        entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.append(int(step))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _pool_or_raise(state: SearchState) -> np.ndarray:
    pool = state.pool_rows()
    if pool.size == 0:
        raise PoolExhaustedError("no unlabeled points remain")
    return pool


def _state(rm, D, ds, state: SearchState | None) -> SearchState:
    return state if state is not None else SearchState.from_observations(rm, D, ds)


def select_random(ds: Dataset, D: ObservationSet, seed, step: int = 0) -> int:
    """Uniform choice among unlabeled points, deterministic in (seed, step)."""
    labeled = {obs.point_id for obs in D}
    pool = [p.id for p in ds if p.id not in labeled]
    if not pool:
        raise PoolExhaustedError("no unlabeled points remain")
    rng = _rng_for(seed, step)
    return int(pool[int(rng.integers(len(pool)))])


def select_one_step(
    rm: RelevanceModel, D: ObservationSet, ds: Dataset,
    state: SearchState | None = None,
) -> int:
    """Greedy: the unlabeled point with the highest fused posterior."""
    st = _state(rm, D, ds, state)
    _pool_or_raise(st)
    probs = st.fused_pool_probs()
    ids = st.pool_ids()
    best = np.lexsort((ids, -probs))[0]
    return int(ids[best])


def ens_score(
    rm: RelevanceModel, D: ObservationSet, ds: Dataset,
    x: DataPoint, budget: int,
    state: SearchState | None = None,
) -> float:
    """Nonmyopic value of querying x with `budget` queries remaining.

    p*(1 + S+) + (1-p)*S-, where S+/- sums the top (budget-1) fused
    posteriors over the remaining pool after conditioning on (x, 1) or
    (x, 0). budget=1 reduces to the plain posterior p.
    """
    if budget < 1:
        raise ConfigurationError("budget must be >= 1")
    st = _state(rm, D, ds, state)
    pool_ids = st.pool_ids()
    where = np.flatnonzero(pool_ids == x.id)
    if where.size == 0:
        raise ValueError(f"point {x.id} is not in the unlabeled pool")
    scores = st.ens_scores_at(where.astype(np.int64), budget)
    return float(scores[0])


def select_ens(
    rm: RelevanceModel, D: ObservationSet, ds: Dataset,
    spec: PolicySpec,
    state: SearchState | None = None,
) -> int:
    """Argmax of the ENS score over the candidate set.

    Candidates are the top `candidate_cap` pool points by current
    posterior; a cap >= pool size makes the search exact.
    """
    if spec.kind != "ens":
        raise ConfigurationError("select_ens requires an ens policy spec")
    st = _state(rm, D, ds, state)
    _pool_or_raise(st)
    probs = st.fused_pool_probs()
    ids = st.pool_ids()
    if spec.budget == 1:
        best = np.lexsort((ids, -probs))[0]
        return int(ids[best])
    cap = min(spec.candidate_cap, ids.size)
    cand = np.lexsort((ids, -probs))[:cap].astype(np.int64)
    scores = st.ens_scores_at(cand, spec.budget)
    best = np.lexsort((ids[cand], -scores))[0]
    return int(ids[cand[best]])


def select_two_step_exact(
    rm: RelevanceModel, D: ObservationSet, ds: Dataset
) -> int:
    """Exhaustive two-query lookahead (enumerates both labels of every
    candidate and the best successor). Intended for small pools."""
    labeled = {obs.point_id for obs in D}
    pool = [p for p in ds if p.id not in labeled]
    if not pool:
        raise PoolExhaustedError("no unlabeled points remain")
    best_id = None
    best_score = -np.inf
    for x in pool:
        p = fused_probability(rm, x, D, ds)
        succ = []
        for y in (1, 0):
            cond = D.copy()
            cond.upsert(Observation(x.id, y))
            top = 0.0
            for other in pool:
                if other.id == x.id:
                    continue
                val = fused_probability(rm, other, cond, ds)
                if val > top:
                    top = val
            succ.append(top)
        score = p * (1.0 + succ[0]) + (1.0 - p) * succ[1]
        if score > best_score:
            best_score = score
            best_id = x.id
    return int(best_id)


def select_next(
    rm: RelevanceModel, D: ObservationSet, ds: Dataset,
    spec: PolicySpec, step: int = 0,
    state: SearchState | None = None,
) -> int:
    """Dispatch one selection according to the policy spec."""
    if spec.kind == "random":
        return select_random(ds, D, spec.seed if spec.seed is not None else 0, step)
    if spec.kind == "one_step":
        return select_one_step(rm, D, ds, state)
    if spec.kind == "ell_step":
        if spec.ell == 1:
            return select_one_step(rm, D, ds, state)
        return select_two_step_exact(rm, D, ds)
    if spec.kind == "ens":
        return select_ens(rm, D, ds, spec, state)
    raise ConfigurationError(f"policy {spec.kind!r} makes no selections")
