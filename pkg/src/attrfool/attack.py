"""Greedy attribution attack under synonym, POS, stop-word and prediction constraints."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .attribution import AttributionRequest
from .lexicon import Lexicon, pos_filter
from .metrics import pcc_flagged

VARIANT_TEF = "tef"
VARIANT_RANDOM = "ra"
VARIANT_RANDOM_IMPORTANCE = "ri"
VARIANT_RANDOM_SYNONYM = "rs"
VARIANTS = (VARIANT_TEF, VARIANT_RANDOM, VARIANT_RANDOM_IMPORTANCE, VARIANT_RANDOM_SYNONYM)


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    rho_max: float
    candidates: int = 15
    variant: str = VARIANT_TEF
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho_max <= 1.0:
            raise AttackError("rho_max must be in (0, 1]")
        if self.candidates < 1:
            raise AttackError("candidate count must be >= 1")
        if self.variant not in VARIANTS:
            raise AttackError(f"unknown variant {self.variant!r}")

    def budget(self, length: int) -> int:
        """Maximum replacement count for a sample of the given length."""
        return math.floor(self.rho_max * length)


@dataclass(frozen=True)
class ImportanceRanking:
    """Per-position mask distances and the induced visit order (ties to earlier positions)."""

    values: np.ndarray
    order: tuple[int, ...]


@dataclass(frozen=True)
class Edit:
    position: int
    old: str
    new: str


@dataclass
class PerturbationRecord:
    """Outcome of one attack on one sample; prediction is the model's own class for it."""

    sample_id: int
    edits: tuple[Edit, ...]
    rho: float
    distance: float
    pcc: float
    label: int
    degenerate: bool = False

    @property
    def replacements(self) -> int:
        return len(self.edits)

    def apply(self, tokens) -> tuple[str, ...]:
        out = list(tokens)
        for e in self.edits:
            if not 0 <= e.position < len(out):
                raise AttackError(f"edit position {e.position} outside sample of length {len(out)}")
            if out[e.position] != e.old:
                raise AttackError(
                    f"edit expects {e.old!r} at position {e.position}, found {out[e.position]!r}"
                )
            out[e.position] = e.new
        return tuple(out)

    def to_json_line(self) -> str:
        payload = {
            "id": self.sample_id,
            "edits": [[e.position, e.old, e.new] for e in self.edits],
            "rho": self.rho,
            "d": self.distance,
            "pcc": self.pcc,
            "label": self.label,
        }
        return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "PerturbationRecord":
        d = json.loads(line)
        return cls(
            sample_id=int(d["id"]),
            edits=tuple(Edit(int(p), o, n) for p, o, n in d["edits"]),
            rho=float(d["rho"]),
            distance=float(d["d"]),
            pcc=float(d["pcc"]),
            label=int(d["label"]),
        )


def write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json_line())
            fh.write("\n")


def read_records(path) -> list[PerturbationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(PerturbationRecord.from_json_line(line))
    return out


@dataclass
class AttackOutcome:
    """A record plus the attribution pair needed for metric computation."""

    record: PerturbationRecord
    adv_tokens: tuple[str, ...]
    attribution_original: np.ndarray
    attribution_adversarial: np.ndarray


@dataclass
class TraceEntry:
    position: int
    candidate: str
    status: str  # pos_filtered | stopword_candidate | prediction_failed | evaluated | accepted
    pcc: float | None = None
    distance: float | None = None


def _distance_flagged(a, b) -> tuple[float, float, bool]:
    r = pcc_flagged(a, b)
    return 1.0 - (r.value + 1.0) / 2.0, r.value, r.degenerate


def word_importance(model, tokens, label, request: AttributionRequest) -> ImportanceRanking:
    """Mask each position to the zero embedding and measure the attribution shift."""
    base = model.attribute(tokens, label, request)
    values = np.zeros(len(tokens))
    for i in range(len(tokens)):
        masked = model.attribute(tokens, label, request, mask=(i,))
        values[i], _, _ = _distance_flagged(masked, base)
    order = tuple(sorted(range(len(tokens)), key=lambda i: (-values[i], i)))
    return ImportanceRanking(values=values, order=order)


def _filtered_candidates(word, lex: Lexicon, count: int, trace=None, position=None):
    raw = lex.synonyms.candidates(word, count)
    kept = pos_filter(word, raw, lex.pos)
    if trace is not None:
        dropped = set(raw) - set(kept)
        for c in raw:
            if c in dropped:
                trace.append(TraceEntry(position, c, "pos_filtered"))
    out = []
    for c in kept:
        if c in lex.stopwords:
            if trace is not None:
                trace.append(TraceEntry(position, c, "stopword_candidate"))
            continue
        out.append(c)
    return out


def run_attack(
    model,
    tokens,
    lex: Lexicon,
    request: AttributionRequest,
    cfg: AttackConfig,
    sample_id: int = 0,
    label: int | None = None,
    trace: list | None = None,
) -> AttackOutcome:
    """Attack one sample with the configured variant.

    ``label`` defaults to the model's own prediction; every emitted record keeps
    that prediction intact and stays within the replacement budget.
    """
    tokens = tuple(tokens)
    if label is None:
        label = model.predict(tokens).y
    greedy_selection = cfg.variant in (VARIANT_TEF, VARIANT_RANDOM_IMPORTANCE)
    importance_order = cfg.variant in (VARIANT_TEF, VARIANT_RANDOM_SYNONYM)

    base_attr = model.attribute(tokens, label, request)
    rng = np.random.default_rng(cfg.seed)
    if importance_order:
        order = word_importance(model, tokens, label, request).order
    else:
        order = tuple(int(i) for i in rng.permutation(len(tokens)))

    budget = cfg.budget(len(tokens))
    adv = list(tokens)
    adv_attr = base_attr
    edits: list[Edit] = []
    d_max = 0.0

    for pos in order:
        if len(edits) + 1 > budget:
            break
        word = tokens[pos]
        if word in lex.stopwords:
            continue
        candidates = _filtered_candidates(word, lex, cfg.candidates, trace, pos)
        if not candidates:
            continue
        if greedy_selection:
            chosen = None  # (distance, candidate, attribution)
            for cand in candidates:
                trial = list(adv)
                trial[pos] = cand
                if model.predict(trial).y != label:
                    if trace is not None:
                        trace.append(TraceEntry(pos, cand, "prediction_failed"))
                    continue
                attr = model.attribute(trial, label, request)
                d, r, _ = _distance_flagged(attr, base_attr)
                if trace is not None:
                    trace.append(TraceEntry(pos, cand, "evaluated", pcc=r, distance=d))
                # strict >, so equal-distance ties keep the higher-similarity candidate
                if chosen is None or d > chosen[0]:
                    chosen = (d, cand, attr)
            if chosen is not None and chosen[0] > d_max:
                d_max, cand, adv_attr = chosen
                adv[pos] = cand
                edits.append(Edit(pos, word, cand))
                if trace is not None:
                    trace.append(TraceEntry(pos, cand, "accepted", distance=d_max))
        else:
            # random final selection: first prediction-preserving candidate of a
            # uniform shuffle is a uniform draw over the valid ones
            for idx in rng.permutation(len(candidates)):
                cand = candidates[int(idx)]
                trial = list(adv)
                trial[pos] = cand
                if model.predict(trial).y != label:
                    if trace is not None:
                        trace.append(TraceEntry(pos, cand, "prediction_failed"))
                    continue
                adv[pos] = cand
                edits.append(Edit(pos, word, cand))
                if trace is not None:
                    trace.append(TraceEntry(pos, cand, "accepted"))
                break

    adv_tokens = tuple(adv)
    if greedy_selection and not edits:
        distance, final_pcc, degenerate = 0.0, *_final_identity(base_attr)
    elif greedy_selection:
        # d_max already equals the distance of the final accepted attribution
        _, final_pcc, degenerate = _distance_flagged(adv_attr, base_attr)
        distance = d_max
    else:
        if edits:
            adv_attr = model.attribute(adv_tokens, label, request)
            distance, final_pcc, degenerate = _distance_flagged(adv_attr, base_attr)
        else:
            distance, final_pcc, degenerate = 0.0, *_final_identity(base_attr)

    record = PerturbationRecord(
        sample_id=sample_id,
        edits=tuple(edits),
        rho=len(edits) / len(tokens),
        distance=distance,
        pcc=final_pcc,
        label=label,
        degenerate=degenerate,
    )
    return AttackOutcome(record, adv_tokens, base_attr, adv_attr)


def _final_identity(base_attr) -> tuple[float, bool]:
    r = pcc_flagged(base_attr, base_attr)
    return r.value, r.degenerate
