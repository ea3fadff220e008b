"""Test doubles and independent oracles shared across the suite."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from attrfool.models import Prediction


class TableModel:
    """Classifier + explainer double answering from lookup tables.

    ``attributions`` maps (tokens, sorted mask tuple) to vectors;
    ``predictions`` maps tokens to a class index (default class for misses is
    configurable so unknown candidate sequences can be made to fail the
    prediction filter).
    """

    def __init__(self, attributions, predictions, num_labels=2, default_class=1):
        self._attributions = {
            (tuple(toks), tuple(sorted(mask))): np.asarray(vec, dtype=np.float64)
            for (toks, mask), vec in attributions.items()
        }
        self._predictions = {tuple(k): v for k, v in predictions.items()}
        self.num_labels = num_labels
        self._default_class = default_class

    def predict(self, tokens, mask=()) -> Prediction:
        y = self._predictions.get(tuple(tokens), self._default_class)
        logits = np.zeros(self.num_labels)
        logits[y] = 1.0
        return Prediction.from_logits(logits)

    def attribute(self, tokens, label, request, mask=()) -> np.ndarray:
        key = (tuple(tokens), tuple(sorted(mask)))
        if key not in self._attributions:
            raise AssertionError(f"fixture has no attribution for {key}")
        return self._attributions[key]


def finite_difference_grad(model, X, label, h=1e-3):
    """Central-difference gradient of logit ``label`` w.r.t. every entry of X."""
    grad = np.zeros_like(X)
    for j in range(X.shape[0]):
        for i in range(X.shape[1]):
            plus = X.copy()
            plus[j, i] += h
            minus = X.copy()
            minus[j, i] -= h
            lp, _, _ = model._forward(plus)
            lm, _, _ = model._forward(minus)
            grad[j, i] = (lp[label] - lm[label]) / (2.0 * h)
    return grad


def fd_kink_margin(model, X):
    """Distance of the nearest ReLU kink or max-pool switch from the operating point.

    Central differences are only a valid oracle when no kink lies inside the
    difference window, so callers resample inputs whose margin is below a
    multiple of h. Channels whose activations are all dead tie at exactly zero
    and differentiate consistently, so they do not count as switches.
    """
    if model.config.arch != "cnn":
        return float("inf")
    _, _, cache = model._forward(X)
    margin = float("inf")
    for k in model.config.kernel_widths:
        _, pre, _ = cache[k]
        margin = min(margin, float(np.abs(pre).min()))
        act = np.maximum(pre, 0.0)
        if act.shape[1] > 1:
            ordered = np.sort(act, axis=1)
            gaps = ordered[:, -1] - ordered[:, -2]
            live = gaps[ordered[:, -1] > 0.0]
            if live.size:
                margin = min(margin, float(live.min()))
    return margin


def pearson_oracle(x, y):
    """Textbook Pearson via explicit sums; None for constant (undefined) inputs."""
    if min(x) == max(x) or min(y) == max(y):
        return None
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    if vx == 0 or vy == 0:
        return None
    return cov / math.sqrt(vx * vy)


def ranks_oracle(x):
    """1-based average ranks via sorting, ties averaged."""
    order = sorted(range(len(x)), key=lambda i: x[i])
    ranks = [0.0] * len(x)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_oracle(x, y):
    return pearson_oracle(ranks_oracle(x), ranks_oracle(y))


def kendall_oracle(x, y):
    """Tau-b by O(n^2) pair counting."""
    concordant = discordant = ties_x = ties_y = 0
    for i, j in combinations(range(len(x)), 2):
        dx = x[i] - x[j]
        dy = y[i] - y[j]
        if dx == 0:
            ties_x += 1
        if dy == 0:
            ties_y += 1
        if dx == 0 or dy == 0:
            continue
        if (dx > 0) == (dy > 0):
            concordant += 1
        else:
            discordant += 1
    n0 = len(x) * (len(x) - 1) / 2
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0:
        return None
    return (concordant - discordant) / denom


def topk_oracle(x, y, k):
    """Exhaustive top-fraction intersection with signed ranking, ties to lower index."""
    m = math.ceil(k * len(x))

    def top(v):
        order = sorted(range(len(v)), key=lambda i: (-v[i], i))
        return set(order[:m])

    return len(top(x) & top(y)) / m


def random_toy_sentence(rng: np.random.Generator, lexicon, min_len=4, max_len=10):
    """A random token sequence mixing cluster words, glue words and punctuation."""
    from attrfool.synthdata import CLUSTERS, GLUE

    vocab = [w for _, _, _, members in CLUSTERS for w in members]
    length = int(rng.integers(min_len, max_len + 1))
    tokens = []
    for _ in range(length):
        roll = rng.random()
        if roll < 0.65:
            tokens.append(vocab[int(rng.integers(len(vocab)))])
        elif roll < 0.95:
            tokens.append(GLUE[int(rng.integers(len(GLUE)))])
        else:
            tokens.append(".")
    return tuple(tokens)


# ---------------------------------------------------------------------------
# the published worked example, frozen as a table-driven fixture

GOLDEN_TOKENS = ("a", "poignant", "comedy", "that", "offers", "food", "for", "thought", ".")

GOLDEN_BASE = [0.0, -0.08, 0.4, 0.05, 0.16, 0.23, 0.03, 0.22, 0.0]

# attribution responses for each single-position zero-embedding mask, built so
# the mask distances rank position 1 first and position 2 second with wide gaps
GOLDEN_MASKED = {
    0: [0.014, -0.063, 0.362, 0.05, 0.144, 0.209, 0.035, 0.197, 0.002],
    1: [0.315, 0.307, -0.455, 0.05, -0.209, -0.247, 0.138, -0.293, 0.045],
    2: [0.192, 0.156, -0.123, 0.05, -0.066, -0.062, 0.096, -0.094, 0.028],
    3: [0.028, -0.046, 0.324, 0.05, 0.127, 0.188, 0.04, 0.174, 0.004],
    4: [0.077, 0.015, 0.191, 0.05, 0.07, 0.113, 0.056, 0.095, 0.011],
    5: [0.063, -0.003, 0.229, 0.05, 0.086, 0.135, 0.052, 0.117, 0.009],
    6: [0.021, -0.054, 0.343, 0.05, 0.135, 0.198, 0.037, 0.186, 0.003],
    7: [0.049, -0.02, 0.267, 0.05, 0.103, 0.156, 0.047, 0.14, 0.007],
    8: [0.007, -0.071, 0.381, 0.05, 0.152, 0.219, 0.032, 0.209, 0.001],
}

GOLDEN_CANDIDATE_ATTRS = {
    "heartbreaking": [0.01, -0.21, 0.45, 0.05, 0.18, 0.25, 0.04, 0.22, 0.01],
    "distressing": [-0.13, 0.15, 1.18, 0.12, -1.4, 0.75, -0.14, 0.37, 0.09],
    "humor": [-0.09, 0.01, 0.34, 0.27, 0.2, -0.02, 0.02, 0.27, 0.05],
    "comic": [-0.02, 0.04, 0.05, 0.02, 0.57, -0.13, 0.01, 0.46, 0.04],
}

GOLDEN_POS_TAGS = {
    "poignant": "ADJ",
    "heartbreaking": "ADJ",
    "distressing": "ADJ",
    "agonizing": "ADJ",
    "humorous": "ADJ",
    "alarm": "NOUN",
    "comedy": "NOUN",
    "humor": "NOUN",
    "comic": "NOUN",
    "travesty": "NOUN",
}

GOLDEN_STOPWORDS = ("a", "that", "for")


def _angle_vector(degrees):
    rad = math.radians(degrees)
    return [math.cos(rad), math.sin(rad)]


# two synonym fans: candidates of "poignant" and of "comedy", cosine-ordered
GOLDEN_VECTORS = {
    "poignant": _angle_vector(0),
    "heartbreaking": _angle_vector(5),
    "distressing": _angle_vector(10),
    "alarm": _angle_vector(15),
    "agonizing": _angle_vector(20),
    "comedy": _angle_vector(90),
    "humor": _angle_vector(85),
    "comic": _angle_vector(80),
    "travesty": _angle_vector(75),
    "humorous": _angle_vector(70),
}


def _seq(position, replacement, base=None):
    toks = list(base or GOLDEN_TOKENS)
    toks[position] = replacement
    return tuple(toks)


def golden_fixture():
    """(model, lexicon, tokens) reproducing the worked two-step attack example."""
    from attrfool.lexicon import (
        EmbeddingStore,
        Lexicon,
        PosLexicon,
        StopWordSet,
        SynonymIndex,
    )

    step1 = {c: _seq(1, c) for c in ("heartbreaking", "distressing", "alarm", "agonizing")}
    after_step1 = step1["distressing"]
    step2 = {
        c: _seq(2, c, after_step1) for c in ("humor", "comic", "travesty", "humorous")
    }

    attributions = {(GOLDEN_TOKENS, ()): GOLDEN_BASE}
    for i, vec in GOLDEN_MASKED.items():
        attributions[(GOLDEN_TOKENS, (i,))] = vec
    for cand in ("heartbreaking", "distressing"):
        attributions[(step1[cand], ())] = GOLDEN_CANDIDATE_ATTRS[cand]
    for cand in ("humor", "comic"):
        attributions[(step2[cand], ())] = GOLDEN_CANDIDATE_ATTRS[cand]

    predictions = {GOLDEN_TOKENS: 0}
    for cand, toks in step1.items():
        predictions[toks] = 1 if cand == "agonizing" else 0
    for cand, toks in step2.items():
        predictions[toks] = 1 if cand == "travesty" else 0

    model = TableModel(attributions, predictions, num_labels=2, default_class=1)
    store = EmbeddingStore(2, {w: np.array(v) for w, v in GOLDEN_VECTORS.items()})
    lexicon = Lexicon(
        store=store,
        synonyms=SynonymIndex(store, neighbor_cap=4),
        pos=PosLexicon(GOLDEN_POS_TAGS),
        stopwords=StopWordSet(GOLDEN_STOPWORDS),
    )
    return model, lexicon, GOLDEN_TOKENS
