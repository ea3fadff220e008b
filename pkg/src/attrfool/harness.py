"""Experiment orchestration: dataset ingestion, sweeps, transfer runs, curves and ACC."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .attack import AttackConfig, AttackOutcome, PerturbationRecord, run_attack
from .attribution import AttentionSelector, AttributionRequest, IgConfig, METHODS
from .lexicon import Lexicon, TokenSequence, tokenize
from .metrics import MetricReport, SemanticSimilarity, metric_report, semantic_similarity
from .universal import SemiUniversalPolicy, apply_policy, build_policy, split_attack_eval

ACC_INTERVAL = 0.4  # the rho operation interval the PCC curve is integrated over


class ConfigError(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    samples: list[TokenSequence]
    label_names: list[str]

    @property
    def num_labels(self) -> int:
        return len(self.label_names)

    def __len__(self) -> int:
        return len(self.samples)


def load_dataset(path) -> Dataset:
    """Read a ``text,label`` CSV; labels become dense indices in first-appearance order."""
    samples: list[TokenSequence] = []
    label_names: list[str] = []
    label_index: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty dataset file") from None
        if [h.strip().lower() for h in header] != ["text", "label"]:
            raise DatasetError(f"{path}: expected header 'text,label', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            text, label = row
            if not text.strip():
                raise DatasetError(f"{path}:{lineno}: empty text field")
            if label not in label_index:
                label_index[label] = len(label_names)
                label_names.append(label)
            try:
                tokens = tuple(tokenize(text))
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            samples.append(TokenSequence(tokens, label_index[label]))
    if not samples:
        raise DatasetError(f"{path}: dataset contains no samples")
    return Dataset(samples, label_names)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    model: str
    explainer: str = "S"
    ig_steps: int = 32
    attention_layer: int = 0
    attention_head: int = 0
    variant: str = "tef"
    sweep: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    bins: int = 10
    seed: int = 0
    out: str = "out"
    candidates: int = 15
    embeddings: str = ""
    pos_lexicon: str = ""
    stopwords: str | None = None
    synonym_embeddings: str | None = None

    def __post_init__(self):
        if self.explainer not in METHODS:
            raise ConfigError(f"unknown explainer {self.explainer!r}")
        if not self.sweep:
            raise ConfigError("sweep list is empty")
        if any(not 0.0 < r <= 1.0 for r in self.sweep):
            raise ConfigError("sweep values must lie in (0, 1]")
        if any(x >= y for x, y in zip(self.sweep, self.sweep[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        if self.bins < 1:
            raise ConfigError("bin count must be >= 1")
        if self.candidates < 1:
            raise ConfigError("candidate count must be >= 1")
        if self.ig_steps < 1:
            raise ConfigError("ig_steps must be >= 1")

    def request(self) -> AttributionRequest:
        return AttributionRequest(
            method=self.explainer,
            ig=IgConfig(self.ig_steps),
            attention=AttentionSelector(self.attention_layer, self.attention_head),
        )

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "model": self.model,
            "explainer": self.explainer,
            "ig_steps": self.ig_steps,
            "attention_layer": self.attention_layer,
            "attention_head": self.attention_head,
            "variant": self.variant,
            "sweep": list(self.sweep),
            "bins": self.bins,
            "seed": self.seed,
            "out": self.out,
            "candidates": self.candidates,
            "embeddings": self.embeddings,
            "pos_lexicon": self.pos_lexicon,
            "stopwords": self.stopwords,
            "synonym_embeddings": self.synonym_embeddings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        kwargs = dict(d)
        if "sweep" in kwargs:
            kwargs["sweep"] = tuple(float(x) for x in kwargs["sweep"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class SampleResult:
    """One attacked sample: its record plus the metric set of the attribution pair."""

    record: PerturbationRecord
    report: MetricReport
    adv_tokens: tuple[str, ...] = ()


@dataclass(frozen=True)
class CurveBin:
    lo: float
    hi: float
    rho_mean: float
    pcc_mean: float
    pcc_q25: float
    pcc_q75: float
    scc_mean: float
    roc_mean: float
    top10: float
    top30: float
    top50: float
    sem_sim: float | None
    count: int


@dataclass
class RobustnessCurve:
    bins: list[CurveBin]
    acc: float
    ceiling: float
    zero_rho_count: int
    degenerate_count: int
    binned_count: int


def _bin_edges(bin_count: int, ceiling: float) -> list[float]:
    return [(i + 1) * ceiling / bin_count for i in range(bin_count)]


def build_curve(results: list[SampleResult], bin_count: int, ceiling: float) -> RobustnessCurve:
    """Quantize results by realized rho over (0, ceiling] and aggregate metrics per bin."""
    if ceiling <= 0.0:
        raise ConfigError("curve ceiling must be positive")
    edges = _bin_edges(bin_count, ceiling)
    members: list[list[SampleResult]] = [[] for _ in range(bin_count)]
    zero_rho = degenerate = 0
    for res in results:
        if res.report.degenerate:
            degenerate += 1
            continue
        rho = res.record.rho
        if rho == 0.0:
            zero_rho += 1
            continue
        if rho > ceiling:
            raise ConfigError(f"realized rho {rho} exceeds the curve ceiling {ceiling}")
        idx = int(np.searchsorted(edges, rho, side="left"))
        members[idx].append(res)
    bins: list[CurveBin] = []
    binned = 0
    for i in range(bin_count):
        lo = edges[i - 1] if i else 0.0
        hi = edges[i]
        group = members[i]
        if not group:
            bins.append(CurveBin(lo, hi, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, None, 0))
            continue
        binned += len(group)
        pccs = np.array([r.report.pcc for r in group])
        sems = [r.report.sem_sim for r in group if r.report.sem_sim is not None]
        bins.append(
            CurveBin(
                lo=lo,
                hi=hi,
                rho_mean=float(np.mean([r.record.rho for r in group])),
                pcc_mean=float(pccs.mean()),
                pcc_q25=float(np.percentile(pccs, 25)),
                pcc_q75=float(np.percentile(pccs, 75)),
                scc_mean=float(np.mean([r.report.scc for r in group])),
                roc_mean=float(np.mean([r.report.roc for r in group])),
                top10=float(np.mean([r.report.top10 for r in group])),
                top30=float(np.mean([r.report.top30 for r in group])),
                top50=float(np.mean([r.report.top50 for r in group])),
                sem_sim=float(np.mean(sems)) if sems else None,
                count=len(group),
            )
        )
    acc = area_under_pcc(bins)
    return RobustnessCurve(
        bins=bins,
        acc=acc,
        ceiling=ceiling,
        zero_rho_count=zero_rho,
        degenerate_count=degenerate,
        binned_count=binned,
    )


def area_under_pcc(bins: list[CurveBin]) -> float:
    """Trapezoidal area under mean PCC vs mean rho over [0, ACC_INTERVAL].

    The polyline is anchored at (0, 1); empty bins are skipped; a curve ending
    short of the interval is extended flat to its end.
    """
    points = [(0.0, 1.0)]
    points += [(b.rho_mean, b.pcc_mean) for b in bins if b.count > 0]
    clipped = [points[0]]
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x1 <= ACC_INTERVAL:
            clipped.append((x1, y1))
            continue
        if x0 < ACC_INTERVAL:
            t = (ACC_INTERVAL - x0) / (x1 - x0)
            clipped.append((ACC_INTERVAL, y0 + t * (y1 - y0)))
        break
    if clipped[-1][0] < ACC_INTERVAL:
        clipped.append((ACC_INTERVAL, clipped[-1][1]))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(clipped, clipped[1:]):
        area += 0.5 * (y0 + y1) * (x1 - x0)
    return area


def _sentence_sim(model, lex: Lexicon, tokens_a, tokens_b) -> SemanticSimilarity:
    remote = getattr(model, "sentence_similarity", None)
    if remote is not None and getattr(model, "has_sentence_sim", False):
        return remote(tokens_a, tokens_b)
    return semantic_similarity(tokens_a, tokens_b, lex.store)


def _evaluate_outcome(model, lex: Lexicon, tokens, outcome: AttackOutcome) -> SampleResult:
    sem = _sentence_sim(model, lex, tokens, outcome.adv_tokens)
    report = metric_report(outcome.attribution_original, outcome.attribution_adversarial, sem)
    return SampleResult(outcome.record, report, outcome.adv_tokens)


def perplexity_increase(model, dataset: Dataset, results: list[SampleResult]) -> float | None:
    """Relative change of the bridge language model's average perplexity.

    Absent (None) whenever the model offers no language model; never reported
    as a fake zero.
    """
    if not getattr(model, "has_perplexity", False) or not results:
        return None
    original = [
        model.perplexity(dataset.samples[r.record.sample_id].tokens) for r in results
    ]
    perturbed = [model.perplexity(r.adv_tokens) for r in results]
    base = float(np.mean(original))
    if base == 0.0:
        return None
    return (float(np.mean(perturbed)) - base) / base


@dataclass
class SweepResult:
    curve: RobustnessCurve
    results: list[SampleResult]
    ppl_increase: float | None = None

    @property
    def records(self) -> list[PerturbationRecord]:
        return [r.record for r in self.results]


def run_sweep(model, dataset: Dataset, lex: Lexicon, cfg: ExperimentConfig) -> SweepResult:
    """Attack every sample at every sweep rho_max and pool the outcomes into one curve."""
    request = cfg.request()
    results: list[SampleResult] = []
    for rho_max in cfg.sweep:
        attack_cfg = AttackConfig(
            rho_max=rho_max, candidates=cfg.candidates, variant=cfg.variant, seed=0
        )
        for idx, sample in enumerate(dataset.samples):
            per_sample = replace(attack_cfg, seed=cfg.seed ^ idx)
            outcome = run_attack(
                model, sample.tokens, lex, request, per_sample, sample_id=idx
            )
            results.append(_evaluate_outcome(model, lex, sample.tokens, outcome))
    curve = build_curve(results, cfg.bins, max(cfg.sweep))
    return SweepResult(curve, results, perplexity_increase(model, dataset, results))


@dataclass
class TransferResult:
    curve: RobustnessCurve
    results: list[SampleResult]
    retained: int
    total: int
    ppl_increase: float | None = None

    @property
    def retention_rate(self) -> float:
        return self.retained / self.total if self.total else 0.0


def run_transfer(
    records: list[PerturbationRecord],
    dataset: Dataset,
    target_model,
    lex: Lexicon,
    cfg: ExperimentConfig,
) -> TransferResult:
    """Re-evaluate recorded perturbations against a different model/explainer.

    Only samples whose target-model prediction is unchanged between the original
    and perturbed text are kept; the retention rate is reported alongside.
    """
    request = cfg.request()
    results: list[SampleResult] = []
    retained = 0
    for rec in records:
        if not 0 <= rec.sample_id < len(dataset):
            raise DatasetError(f"record id {rec.sample_id} outside dataset of {len(dataset)}")
        tokens = dataset.samples[rec.sample_id].tokens
        adv_tokens = rec.apply(tokens)
        label = target_model.predict(tokens).y
        if target_model.predict(adv_tokens).y != label:
            continue
        retained += 1
        base_attr = target_model.attribute(tokens, label, request)
        adv_attr = target_model.attribute(adv_tokens, label, request)
        sem = _sentence_sim(target_model, lex, tokens, adv_tokens)
        report = metric_report(base_attr, adv_attr, sem)
        new_rec = PerturbationRecord(
            sample_id=rec.sample_id,
            edits=rec.edits,
            rho=rec.rho,
            distance=1.0 - (report.pcc + 1.0) / 2.0,
            pcc=report.pcc,
            label=label,
            degenerate=report.degenerate,
        )
        results.append(SampleResult(new_rec, report, adv_tokens))
    curve = build_curve(results, cfg.bins, max(cfg.sweep))
    return TransferResult(
        curve, results, retained, len(records),
        perplexity_increase(target_model, dataset, results),
    )


@dataclass
class SemiUniversalResult:
    policy: SemiUniversalPolicy
    curve: RobustnessCurve
    results: list[SampleResult]
    attack_indices: list[int]
    eval_indices: list[int]
    retained: int
    total: int


def evaluate_policy(
    policy: SemiUniversalPolicy,
    model,
    dataset: Dataset,
    lex: Lexicon,
    cfg: ExperimentConfig,
    indices: list[int] | None = None,
) -> TransferResult:
    """Apply a policy over the sweep and measure the target model's attribution shift."""
    request = cfg.request()
    indices = list(range(len(dataset))) if indices is None else indices
    results: list[SampleResult] = []
    retained = 0
    total = 0
    for rho_max in cfg.sweep:
        for idx in indices:
            total += 1
            tokens = dataset.samples[idx].tokens
            rec = apply_policy(tokens, policy, rho_max, sample_id=idx)
            adv_tokens = rec.apply(tokens)
            label = model.predict(tokens).y
            if model.predict(adv_tokens).y != label:
                continue
            retained += 1
            base_attr = model.attribute(tokens, label, request)
            adv_attr = model.attribute(adv_tokens, label, request)
            sem = _sentence_sim(model, lex, tokens, adv_tokens)
            report = metric_report(base_attr, adv_attr, sem)
            rec = PerturbationRecord(
                sample_id=idx,
                edits=rec.edits,
                rho=rec.rho,
                distance=1.0 - (report.pcc + 1.0) / 2.0,
                pcc=report.pcc,
                label=label,
                degenerate=report.degenerate,
            )
            results.append(SampleResult(rec, report, adv_tokens))
    curve = build_curve(results, cfg.bins, max(cfg.sweep))
    return TransferResult(
        curve, results, retained, total, perplexity_increase(model, dataset, results)
    )


def run_semi_universal(
    model, dataset: Dataset, lex: Lexicon, cfg: ExperimentConfig
) -> SemiUniversalResult:
    """Split the dataset, build a policy from greedy-attack records, evaluate on the rest."""
    if len(dataset) < 4:
        raise DatasetError("semi-universal runs need at least 4 samples to split")
    attack_idx, eval_idx = split_attack_eval(len(dataset), cfg.seed)
    request = cfg.request()
    policy_rho = max(cfg.sweep)
    records = []
    for idx in attack_idx:
        attack_cfg = AttackConfig(
            rho_max=policy_rho, candidates=cfg.candidates, variant="tef", seed=cfg.seed ^ idx
        )
        outcome = run_attack(
            model, dataset.samples[idx].tokens, lex, request, attack_cfg, sample_id=idx
        )
        records.append(outcome.record)
    policy = build_policy(records)
    evaluated = evaluate_policy(policy, model, dataset, lex, cfg, eval_idx)
    return SemiUniversalResult(
        policy=policy,
        curve=evaluated.curve,
        results=evaluated.results,
        attack_indices=attack_idx,
        eval_indices=eval_idx,
        retained=evaluated.retained,
        total=evaluated.total,
    )
