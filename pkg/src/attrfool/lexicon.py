"""Vocabulary resources: tokenizer, word vectors, synonym lookup, POS and stop-word filters."""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass
from importlib import resources

import numpy as np

COARSE_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "OTHER")
UNKNOWN_TAG = "OTHER"

_ASCII_PUNCT = set(string.punctuation)


class LexiconError(ValueError):
    """Raised when a lexicon resource file cannot be parsed."""


class EmptyTextError(ValueError):
    """Raised when tokenization yields no tokens."""


def _is_punct(ch: str) -> bool:
    return ch in _ASCII_PUNCT or unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase and split text into word and single-character punctuation tokens.

    Whitespace separates chunks; within a chunk every punctuation character
    becomes its own token, so re-tokenizing the space-join of the output is
    stable.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        run = []
        for ch in chunk:
            if _is_punct(ch):
                if run:
                    tokens.append("".join(run))
                    run = []
                tokens.append(ch)
            else:
                run.append(ch)
        if run:
            tokens.append("".join(run))
    if not tokens:
        raise EmptyTextError("no tokens survive tokenization of %r" % text)
    return tokens


@dataclass(frozen=True)
class TokenSequence:
    """An ordered token list with an optional class label."""

    tokens: tuple[str, ...]
    label: int | None = None

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise ValueError("a token sequence must contain at least one token")

    def __len__(self) -> int:
        return len(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)

    @classmethod
    def from_text(cls, text: str, label: int | None = None) -> "TokenSequence":
        return cls(tuple(tokenize(text)), label)


class EmbeddingStore:
    """Word -> dense vector map; unknown words embed to the zero vector."""

    def __init__(self, dimension: int, vectors: dict[str, np.ndarray]):
        self.dimension = int(dimension)
        if self.dimension <= 0:
            raise LexiconError("embedding dimension must be positive")
        self._vectors: dict[str, np.ndarray] = {}
        for word, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise LexiconError(
                    f"vector for {word!r} has length {arr.shape}, expected ({self.dimension},)"
                )
            self._vectors[word] = arr
        self._zero = np.zeros(self.dimension)

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, word: str) -> bool:
        return word in self._vectors

    def words(self) -> list[str]:
        return sorted(self._vectors)

    def vector(self, word: str) -> np.ndarray:
        return self._vectors.get(word, self._zero)

    def known(self, word: str) -> bool:
        """True when the word has a stored, non-zero vector."""
        vec = self._vectors.get(word)
        return vec is not None and bool(np.any(vec))

    @classmethod
    def from_file(cls, path) -> "EmbeddingStore":
        """Parse the one-entry-per-line text format ``word v1 v2 ... vd``."""
        vectors: dict[str, np.ndarray] = {}
        dimension = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) < 2:
                    raise LexiconError(f"{path}:{lineno}: expected a word and vector entries")
                word = parts[0].lower()
                try:
                    vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                except ValueError as exc:
                    raise LexiconError(f"{path}:{lineno}: bad vector entry ({exc})") from None
                if dimension is None:
                    dimension = vec.size
                elif vec.size != dimension:
                    raise LexiconError(
                        f"{path}:{lineno}: vector length {vec.size} != {dimension}"
                    )
                vectors.setdefault(word, vec)
        if dimension is None:
            raise LexiconError(f"{path}: empty embedding file")
        return cls(dimension, vectors)


class SynonymIndex:
    """Nearest-neighbor lookup over an embedding store, ranked by cosine similarity."""

    def __init__(self, store: EmbeddingStore, neighbor_cap: int = 15):
        if neighbor_cap < 1:
            raise ValueError("neighbor cap must be >= 1")
        self.store = store
        self.neighbor_cap = neighbor_cap
        words = [w for w in store.words() if store.known(w)]
        self._words = np.array(words, dtype=object)
        if words:
            mat = np.stack([store.vector(w) for w in words])
            self._matrix = mat
            self._norms = np.linalg.norm(mat, axis=1)
        else:
            self._matrix = np.zeros((0, store.dimension))
            self._norms = np.zeros(0)
        self._cache: dict[str, tuple[str, ...]] = {}

    def candidates(self, word: str, n: int | None = None) -> list[str]:
        """Top-n vocabulary neighbors of ``word``, ties broken lexicographically.

        The query word never appears in its own candidate list; unknown
        (zero-vector) words have no neighbors.
        """
        n = self.neighbor_cap if n is None else n
        if n < 1:
            raise ValueError("candidate count must be >= 1")
        ranked = self._cache.get(word)
        if ranked is None:
            ranked = self._rank(word)
            self._cache[word] = ranked
        return list(ranked[:n])

    def _rank(self, word: str) -> tuple[str, ...]:
        vec = self.store.vector(word)
        norm = np.linalg.norm(vec)
        if norm == 0.0 or self._words.size == 0:
            return ()
        sims = (self._matrix @ vec) / (self._norms * norm)
        # lexsort: last key is primary, so order by -sim then word text
        order = np.lexsort((self._words, -sims))
        return tuple(w for w in self._words[order] if w != word)


class PosLexicon:
    """Context-free coarse part-of-speech tags; unknown words tag as OTHER."""

    def __init__(self, tags: dict[str, str]):
        for word, tag in tags.items():
            if tag not in COARSE_TAGS:
                raise LexiconError(f"unknown POS tag {tag!r} for word {word!r}")
        self._tags = dict(tags)

    def tag(self, word: str) -> str:
        return self._tags.get(word, UNKNOWN_TAG)

    @classmethod
    def from_tsv(cls, path) -> "PosLexicon":
        """Parse ``word<TAB>tag`` lines; the first entry for a word wins."""
        tags: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise LexiconError(f"{path}:{lineno}: expected 'word<TAB>tag'")
                word, tag = parts[0].lower(), parts[1].strip().upper()
                if tag not in COARSE_TAGS:
                    raise LexiconError(f"{path}:{lineno}: unknown tag {tag!r}")
                tags.setdefault(word, tag)
        return cls(tags)


def pos_filter(word: str, candidates: list[str], lexicon: PosLexicon) -> list[str]:
    """Keep candidates whose coarse tag equals the tag of ``word``; order preserved."""
    want = lexicon.tag(word)
    return [c for c in candidates if lexicon.tag(c) == want]


class StopWordSet:
    """Exact membership test on lowercased token text."""

    def __init__(self, words):
        self._words = frozenset(w.lower() for w in words)

    def __contains__(self, word: str) -> bool:
        return word in self._words

    def __len__(self) -> int:
        return len(self._words)

    def __iter__(self):
        return iter(sorted(self._words))

    @classmethod
    def from_file(cls, path) -> "StopWordSet":
        with open(path, encoding="utf-8") as fh:
            return cls(w.strip() for w in fh if w.strip())

    @classmethod
    def default(cls) -> "StopWordSet":
        text = resources.files("attrfool.data").joinpath("stopwords_en.txt").read_text("utf-8")
        return cls(w.strip() for w in text.splitlines() if w.strip())


@dataclass
class Lexicon:
    """Everything candidate selection consumes, loaded once and then read-only."""

    store: EmbeddingStore
    synonyms: SynonymIndex
    pos: PosLexicon
    stopwords: StopWordSet

    @classmethod
    def load(
        cls,
        embeddings_path,
        pos_path,
        stopwords_path=None,
        synonym_embeddings_path=None,
        neighbor_cap: int = 15,
    ) -> "Lexicon":
        store = EmbeddingStore.from_file(embeddings_path)
        if synonym_embeddings_path is not None:
            syn_store = EmbeddingStore.from_file(synonym_embeddings_path)
        else:
            syn_store = store
        stop = (
            StopWordSet.from_file(stopwords_path)
            if stopwords_path is not None
            else StopWordSet.default()
        )
        return cls(
            store=store,
            synonyms=SynonymIndex(syn_store, neighbor_cap),
            pos=PosLexicon.from_tsv(pos_path),
            stopwords=stop,
        )
