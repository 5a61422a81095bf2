"""Non-interactive benchmarking: policy simulations and sparse-label
cross-validation, plus the ranking metrics they report.

Each simulation run seeds the labeled set with one uniformly chosen
truly relevant point, then repeatedly lets the policy pick an unlabeled
point whose true label is revealed (optionally flipped to model oracle
mistakes) and appended. Utility is the number of truly relevant points
queried, seed excluded. Runs are paired across policies: the seed point
for run r depends only on (config seed, r).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np
from scipy import stats as _sstats

from .data import Dataset
from .engine import DatasetIndex, SearchState
from .errors import ConfigurationError, ValidationError
from .policies import PolicySpec, select_next
from .relevance import Observation, ObservationSet, RelevanceModel

_SEED_STREAM = 1
_FLIP_STREAM = 2


@dataclass
class SimulationConfig:
    iterations: int
    runs: int
    policy: PolicySpec
    seed: int = 0
    flip_probability: float = 0.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ConfigurationError("flip probability must lie in [0, 1]")


@dataclass
class SimulationReport:
    policy: str
    iterations: int
    per_run_utility: list[int]
    mean: float = field(init=False)
    ci95: float = field(init=False)

    def __post_init__(self):
        runs = len(self.per_run_utility)
        vals = np.asarray(self.per_run_utility, dtype=np.float64)
        self.mean = float(vals.mean())
        if runs < 2:
            self.ci95 = float("nan")
        else:
            half = float(
                _sstats.t.ppf(0.975, runs - 1) * vals.std(ddof=1) / np.sqrt(runs)
            )
            self.ci95 = half

    @property
    def mean_purity(self) -> float:
        """Fraction of queried points that were truly relevant."""
        return self.mean / self.iterations


def _fresh_model(rm: RelevanceModel | None) -> RelevanceModel:
    if rm is None:
        return RelevanceModel()
    return replace(rm)


def run_simulation(
    ds: Dataset, cfg: SimulationConfig, rm: RelevanceModel | None = None
) -> SimulationReport:
    """Run the config's policy for `runs` independent simulations."""
    if not ds.has_truth:
        raise ConfigurationError("simulation requires a fully labeled dataset")
    index = DatasetIndex.of(ds)
    positives = np.flatnonzero(index.truth == 1)
    if positives.size == 0:
        raise ConfigurationError("simulation requires at least one relevant point")
    utilities: list[int] = []
    for r in range(cfg.runs):
        seed_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed & 0xFFFFFFFFFFFFFFFF, r, _SEED_STREAM])
        )
        seed_row = positives[int(seed_rng.integers(positives.size))]
        seed_id = int(index.ids[seed_row])
        flip_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed & 0xFFFFFFFFFFFFFFFF, r, _FLIP_STREAM])
        )
        model = _fresh_model(rm)
        state = SearchState(model, ds)
        D = ObservationSet()
        state.add(seed_id, 1)
        D.upsert(Observation(seed_id, 1, source="oracle", at=0))
        state.refit_q()
        found = 0
        for t in range(cfg.iterations):
            pid = select_next(model, D, ds, cfg.policy, step=t, state=state)
            row = index.row_of[pid]
            true = int(index.truth[row])
            revealed = true
            if cfg.flip_probability > 0.0 and flip_rng.random() < cfg.flip_probability:
                revealed = 1 - true
            state.add(pid, revealed)
            D.upsert(Observation(pid, revealed, source="oracle", at=t + 1))
            state.refit_q()
            found += true
        utilities.append(found)
    return SimulationReport(cfg.policy.label, cfg.iterations, utilities)


def run_benchmark(
    ds: Dataset,
    policies: Sequence[PolicySpec],
    cfg: SimulationConfig,
    rm: RelevanceModel | None = None,
) -> list[SimulationReport]:
    """run_simulation per policy with shared per-run seed points."""
    return [run_simulation(ds, replace(cfg, policy=p), rm) for p in policies]


# ---------------------------------------------------------------------------
# ranking metrics
# ---------------------------------------------------------------------------


def _scored_arrays(scored: Iterable[tuple[float, int]]):
    pairs = list(scored)
    scores = np.asarray([p[0] for p in pairs], dtype=np.float64)
    truth = np.asarray([int(p[1]) for p in pairs], dtype=np.int64)
    if truth.size and not np.isin(truth, (0, 1)).all():
        raise ValidationError("truth values must be 0 or 1")
    return scores, truth


def auc_roc(scored: Iterable[tuple[float, int]]) -> float:
    """Probability a random relevant point outranks a random irrelevant
    one; ties count half."""
    scores, truth = _scored_arrays(scored)
    npos = int(truth.sum())
    nneg = truth.size - npos
    if npos == 0 or nneg == 0:
        raise ValidationError("auc undefined for single-class input")
    ranks = _sstats.rankdata(scores, method="average")
    rpos = float(ranks[truth == 1].sum())
    return (rpos - npos * (npos + 1) / 2.0) / (npos * nneg)


def precision_at_k(scored: Iterable[tuple[float, int]], k: int) -> float:
    """Fraction of relevant points among the k best scores.

    Input order is ascending point id; score ties keep that order.
    """
    scores, truth = _scored_arrays(scored)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > truth.size:
        raise ValueError(f"k={k} exceeds {truth.size} scored points")
    order = np.argsort(-scores, kind="stable")[:k]
    return float(truth[order].mean())


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------


@dataclass
class CrossValReport:
    auc: float
    p_at: dict[int, float]
    q: float
    train_size: int
    test_size: int
    degenerate_train: bool = False


def cross_validate(
    ds: Dataset,
    train_fraction: float,
    seed: int,
    rm: RelevanceModel | None = None,
    precision_ks: Sequence[int] = (1, 5),
) -> CrossValReport:
    """Fit q on a small training split, score the rest, report AUC-ROC
    and precision at k.

    A single-class training split degrades to the prior-only model and
    is flagged in the report.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError("train fraction must lie in (0, 1)")
    if not ds.has_truth:
        raise ConfigurationError("cross-validation requires truth labels")
    index = DatasetIndex.of(ds)
    n = index.n
    n_train = max(1, int(round(train_fraction * n)))
    if n_train >= n:
        raise ConfigurationError("training split leaves no test points")
    rng = np.random.default_rng(seed)
    train_rows = np.sort(rng.permutation(n)[:n_train])
    model = _fresh_model(rm)
    state = SearchState(model, ds)
    for row in train_rows:
        state.add(int(index.ids[row]), int(index.truth[row]))
    train_labels = index.truth[train_rows]
    degenerate = bool(train_labels.min() == train_labels.max())
    if degenerate:
        scores = np.full(
            n - n_train,
            model.q * model.text.pi + (1.0 - model.q) * model.location.pi,
        )
    else:
        state.refit_q()
        scores = state.fused_pool_probs()
    test_truth = index.truth[state.pool_rows()]
    scored = list(zip(scores.tolist(), test_truth.tolist()))
    return CrossValReport(
        auc=auc_roc(scored),
        p_at={k: precision_at_k(scored, k) for k in precision_ks},
        q=model.q,
        train_size=int(n_train),
        test_size=int(n - n_train),
        degenerate_train=degenerate,
    )


# ---------------------------------------------------------------------------
# report export
# ---------------------------------------------------------------------------


def write_runs_csv(reports: Sequence[SimulationReport], dest: str | Path | IO[str]) -> None:
    """One row per (policy, run): the raw utilities."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["policy", "run", "utility"])
        for rep in reports:
            for i, u in enumerate(rep.per_run_utility):
                writer.writerow([rep.policy, i, u])
    finally:
        if own:
            fh.close()


def write_summary_csv(reports: Sequence[SimulationReport], dest: str | Path | IO[str]) -> None:
    """Summary table: policy, mean utility, 95% CI half-width."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(["policy", "mean", "ci95"])
        for rep in reports:
            writer.writerow([rep.policy, repr(rep.mean), repr(rep.ci95)])
    finally:
        if own:
            fh.close()


def format_summary(reports: Sequence[SimulationReport]) -> str:
    """Human-readable summary block for CLI output."""
    width = max(len(r.policy) for r in reports)
    lines = [f"{'policy'.ljust(width)}   mean utility      95% CI"]
    for rep in reports:
        lines.append(
            f"{rep.policy.ljust(width)}   {rep.mean:12.2f}   +/- {rep.ci95:.2f}"
        )
    return "\n".join(lines)
