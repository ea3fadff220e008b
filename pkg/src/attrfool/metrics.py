"""Similarity and robustness measures between attribution vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CorrelationResult:
    """A correlation value plus a flag marking undefined (constant-input) cases.

    Degenerate pairs carry the sentinel value 0.0 and are excluded from curve
    averages downstream instead of silently biasing them.
    """

    value: float
    degenerate: bool

    def __float__(self) -> float:
        return self.value


def _as_vector(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("expected a 1-D vector")
    return arr


def pcc_flagged(a, b) -> CorrelationResult:
    """Pearson correlation; degenerate when either vector is constant or too short."""
    x, y = _as_vector(a), _as_vector(b)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        return CorrelationResult(0.0, True)
    # the explicit constant test avoids float residue from the mean subtraction
    if x.min() == x.max() or y.min() == y.max():
        return CorrelationResult(0.0, True)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc)) * math.sqrt(float(yc @ yc))
    if denom == 0.0:
        return CorrelationResult(0.0, True)
    return CorrelationResult(float(np.clip((xc @ yc) / denom, -1.0, 1.0)), False)


def pcc(a, b) -> float:
    return pcc_flagged(a, b).value


def attribution_distance(a, b) -> float:
    """d(a, b) = 1 - (PCC + 1) / 2, in [0, 1]."""
    return 1.0 - (pcc(a, b) + 1.0) / 2.0


def robustness_estimate(a, a_adv) -> float:
    """1 - attribution_distance; the attack's achieved robustness lower bound."""
    return 1.0 - attribution_distance(a_adv, a)


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties averaged."""
    arr = _as_vector(x)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_flagged(a, b) -> CorrelationResult:
    """Spearman correlation: Pearson of average ranks."""
    x, y = _as_vector(a), _as_vector(b)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        return CorrelationResult(0.0, True)
    return pcc_flagged(average_ranks(x), average_ranks(y))


def kendall_flagged(a, b) -> CorrelationResult:
    """Kendall tau-b (tie-adjusted), via pairwise sign comparison."""
    x, y = _as_vector(a), _as_vector(b)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    n = x.size
    if n < 2:
        return CorrelationResult(0.0, True)
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    sx, sy = sx[iu], sy[iu]
    concordant_minus_discordant = float(np.sum(sx * sy))
    n0 = n * (n - 1) / 2.0
    ties_x = float(np.sum(sx == 0))
    ties_y = float(np.sum(sy == 0))
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0.0:
        return CorrelationResult(0.0, True)
    return CorrelationResult(float(np.clip(concordant_minus_discordant / denom, -1.0, 1.0)), False)


def rank_correlations(a, b) -> tuple[float, float]:
    """(Spearman, Kendall tau-b) of the two vectors."""
    return spearman_flagged(a, b).value, kendall_flagged(a, b).value


def top_fraction_indices(a, k: float) -> set[int]:
    """Positions of the ceil(k*p) largest signed values; ties go to the lower index."""
    arr = _as_vector(a)
    if not 0.0 < k <= 1.0:
        raise ValueError("k must be in (0, 1]")
    m = math.ceil(k * arr.size)
    order = np.argsort(-arr, kind="stable")
    return set(int(i) for i in order[:m])


def topk_intersection(a, b, k: float) -> float:
    """|TopK(a) & TopK(b)| / |TopK(a)| with signed-value ranking."""
    x, y = _as_vector(a), _as_vector(b)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    top_a = top_fraction_indices(x, k)
    top_b = top_fraction_indices(y, k)
    return len(top_a & top_b) / len(top_a)


@dataclass(frozen=True)
class SemanticSimilarity:
    """A sentence-similarity value tagged with the method that produced it."""

    value: float | None
    provider: str


def semantic_similarity(tokens_a, tokens_b, store) -> SemanticSimilarity:
    """Cosine similarity of mean word vectors; missing when either side is all unknown."""
    if not tokens_a or not tokens_b:
        raise ValueError("both token sequences must be non-empty")
    mean_a = np.mean([store.vector(t) for t in tokens_a], axis=0)
    mean_b = np.mean([store.vector(t) for t in tokens_b], axis=0)
    na, nb = np.linalg.norm(mean_a), np.linalg.norm(mean_b)
    if na == 0.0 or nb == 0.0:
        return SemanticSimilarity(None, "mean-embedding")
    return SemanticSimilarity(float(mean_a @ mean_b / (na * nb)), "mean-embedding")


@dataclass(frozen=True)
class MetricReport:
    """The full per-sample metric set between an original and perturbed attribution."""

    pcc: float
    scc: float
    roc: float
    top10: float
    top30: float
    top50: float
    sem_sim: float | None
    degenerate: bool
    sem_provider: str = "mean-embedding"
    ppl_increase: float | None = None


def metric_report(a_orig, a_adv, sem: SemanticSimilarity | None = None) -> MetricReport:
    p = pcc_flagged(a_orig, a_adv)
    scc, roc = rank_correlations(a_orig, a_adv)
    return MetricReport(
        pcc=p.value,
        scc=scc,
        roc=roc,
        top10=topk_intersection(a_orig, a_adv, 0.1),
        top30=topk_intersection(a_orig, a_adv, 0.3),
        top50=topk_intersection(a_orig, a_adv, 0.5),
        sem_sim=None if sem is None else sem.value,
        degenerate=p.degenerate,
        sem_provider="mean-embedding" if sem is None else sem.provider,
    )
