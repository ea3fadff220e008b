"""Synthetic sentiment corpus with synonym-cluster embeddings for desk-scale runs."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

# (cluster name, coarse tag, polarity, members); members of a cluster are
# near-neighbors in the generated embedding space, i.e. substitution candidates
CLUSTERS = [
    ("media", "NOUN", 0, ["movie", "film", "picture", "flick", "feature"]),
    ("story", "NOUN", 0, ["story", "plot", "tale", "script", "narrative"]),
    ("people", "NOUN", 0, ["cast", "actors", "ensemble", "players"]),
    ("praise", "NOUN", 1, ["charm", "delight", "wit", "grace"]),
    ("gripe", "NOUN", -1, ["mess", "bore", "chore", "slog"]),
    ("good", "ADJ", 1, ["good", "great", "fine", "lovely", "superb", "charming"]),
    ("bad", "ADJ", -1, ["bad", "awful", "dull", "bleak", "dreary", "clumsy"]),
    ("plain", "ADJ", 0, ["long", "short", "quiet", "loud"]),
    ("verb", "VERB", 0, ["feels", "seems", "looks", "plays"]),
    ("fully", "ADV", 0, ["truly", "really", "genuinely", "utterly"]),
    ("partly", "ADV", 0, ["quite", "rather", "fairly", "mostly"]),
]

GLUE = ["the", "a", "an", "and", "with", "of", "but", "this", "it", "is", "was"]

POS_TEMPLATES = [
    "the {media} {verb} {fully} {good} and {partly} {good}",
    "a {good} {media} with {fully} {good} {people}",
    "this {media} is a {good} {praise} of {partly} {good} {story}",
    "the {story} {verb} {good} and the {people} {verb} {fully} {good}",
    "it is a {plain} {media} with {good} {people} and {good} {praise}",
    "a {fully} {good} {story} and a {partly} {good} {media}",
]

NEG_TEMPLATES = [
    "the {media} {verb} {fully} {bad} and {partly} {bad}",
    "a {bad} {media} with {fully} {bad} {people}",
    "this {media} is a {bad} {gripe} of {partly} {bad} {story}",
    "the {story} {verb} {bad} and the {people} {verb} {fully} {bad}",
    "it is a {plain} {media} with {bad} {people} and {bad} {gripe}",
    "a {fully} {bad} {story} and a {partly} {bad} {media}",
]


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 7
    train_size: int = 1200
    test_size: int = 440
    embed_dim: int = 16
    cluster_noise: float = 0.35
    polarity_strength: float = 0.6


def build_embeddings(spec: CorpusSpec) -> dict[str, np.ndarray]:
    """Cluster members share a direction plus noise; polar clusters get a sentiment offset."""
    rng = np.random.default_rng(spec.seed)
    sentiment_axis = rng.normal(size=spec.embed_dim)
    sentiment_axis /= np.linalg.norm(sentiment_axis)
    vectors: dict[str, np.ndarray] = {}
    for _, _, polarity, members in CLUSTERS:
        center = rng.normal(size=spec.embed_dim)
        center /= np.linalg.norm(center)
        for word in members:
            vec = center + spec.cluster_noise * rng.normal(size=spec.embed_dim)
            vec /= np.linalg.norm(vec)
            vec = vec + polarity * spec.polarity_strength * sentiment_axis
            vectors[word] = vec
    for word in GLUE:
        vec = rng.normal(size=spec.embed_dim)
        vectors[word] = 0.3 * vec / np.linalg.norm(vec)
    return vectors


def _fill(template: str, rng: np.random.Generator) -> str:
    by_name = {name: members for name, _, _, members in CLUSTERS}
    out = template
    while "{" in out:
        start = out.index("{")
        end = out.index("}", start)
        name = out[start + 1 : end]
        choice = by_name[name][int(rng.integers(len(by_name[name])))]
        out = out[:start] + choice + out[end + 1 :]
    return out


def generate_sentences(spec: CorpusSpec) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    """(train, test) lists of (text, label); test sentences never repeat train ones."""
    rng = np.random.default_rng(spec.seed + 1)

    def make(count, forbidden):
        rows, seen = [], set()
        while len(rows) < count:
            if rng.random() < 0.5:
                text = _fill(POS_TEMPLATES[int(rng.integers(len(POS_TEMPLATES)))], rng)
                label = "pos"
            else:
                text = _fill(NEG_TEMPLATES[int(rng.integers(len(NEG_TEMPLATES)))], rng)
                label = "neg"
            if rng.random() < 0.5:
                text += " ."
            if text in forbidden or text in seen:
                continue
            seen.add(text)
            rows.append((text, label))
        return rows, seen

    train, train_seen = make(spec.train_size, set())
    test, _ = make(spec.test_size, train_seen)
    return train, test


def write_corpus(outdir, spec: CorpusSpec | None = None) -> dict[str, str]:
    """Write embeddings, POS lexicon, stop words and train/test CSVs; returns the paths."""
    spec = spec or CorpusSpec()
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "embeddings": os.path.join(outdir, "embeddings.txt"),
        "pos_lexicon": os.path.join(outdir, "pos.tsv"),
        "stopwords": os.path.join(outdir, "stopwords.txt"),
        "train": os.path.join(outdir, "train.csv"),
        "test": os.path.join(outdir, "test.csv"),
    }
    vectors = build_embeddings(spec)
    with open(paths["embeddings"], "w", encoding="utf-8") as fh:
        for word in sorted(vectors):
            vals = " ".join(f"{x:.6f}" for x in vectors[word])
            fh.write(f"{word} {vals}\n")
    with open(paths["pos_lexicon"], "w", encoding="utf-8") as fh:
        for _, tag, _, members in CLUSTERS:
            for word in members:
                fh.write(f"{word}\t{tag}\n")
    from .lexicon import StopWordSet  # bundle the default list alongside the corpus

    with open(paths["stopwords"], "w", encoding="utf-8") as fh:
        for word in StopWordSet.default():
            fh.write(word + "\n")
    train, test = generate_sentences(spec)
    for key, rows in (("train", train), ("test", test)):
        with open(paths[key], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["text", "label"])
            writer.writerows(rows)
    return paths
