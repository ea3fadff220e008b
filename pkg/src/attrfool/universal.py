"""Query-free substitution policies aggregated from recorded attack perturbations."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .attack import Edit, PerturbationRecord


class PolicyError(ValueError):
    pass


def format_count(value: int) -> str:
    """Compact count text: thousands get a trailing 'k' when exactly representable."""
    if value >= 1000 and value % 100 == 0:
        scaled = value / 1000.0
        text = f"{scaled:g}"
        return text + "k"
    return str(value)


def parse_count(text: str) -> int:
    """Inverse of ``format_count``; accepts plain integers and the 'k' suffix."""
    raw = text.strip()
    try:
        if raw.lower().endswith("k"):
            return round(float(raw[:-1]) * 1000)
        return int(raw)
    except ValueError:
        raise PolicyError(f"bad count field {text!r}") from None


@dataclass(frozen=True)
class PolicyRow:
    token: str
    count_text: str
    replacement: str

    @property
    def count(self) -> int:
        return parse_count(self.count_text)


@dataclass(frozen=True)
class SemiUniversalPolicy:
    """Rows sorted by non-increasing replacement count; one row per replaced token."""

    rows: tuple[PolicyRow, ...]

    def __post_init__(self):
        seen = set()
        previous = None
        for row in self.rows:
            if row.token in seen:
                raise PolicyError(f"duplicate policy token {row.token!r}")
            if row.replacement == row.token:
                raise PolicyError(f"policy row {row.token!r} replaces a token with itself")
            if previous is not None and row.count > previous:
                raise PolicyError("policy rows must be sorted by non-increasing count")
            seen.add(row.token)
            previous = row.count

    def __len__(self) -> int:
        return len(self.rows)


def build_policy(records) -> SemiUniversalPolicy:
    """Count replacements per original token and keep the modal replacement.

    Modal ties break to the lexicographically smallest replacement; row order is
    count-descending with lexicographic token order inside count ties.
    """
    totals: Counter[str] = Counter()
    replacements: dict[str, Counter] = defaultdict(Counter)
    for rec in records:
        for edit in rec.edits:
            totals[edit.old] += 1
            replacements[edit.old][edit.new] += 1
    rows = []
    for token in sorted(totals, key=lambda t: (-totals[t], t)):
        modal = min(
            replacements[token], key=lambda r: (-replacements[token][r], r)
        )
        rows.append(PolicyRow(token, format_count(totals[token]), modal))
    return SemiUniversalPolicy(tuple(rows))


def apply_policy(
    tokens, policy: SemiUniversalPolicy, rho_max: float, sample_id: int = 0, label: int = -1
) -> PerturbationRecord:
    """Scan rows top-down, replacing matching original tokens left to right.

    Stops the whole attack the moment one more replacement would exceed the
    budget. No model is consulted; the record's distance and correlation fields
    are filled in by whoever evaluates the perturbed sample.
    """
    tokens = tuple(tokens)
    if not 0.0 <= rho_max <= 1.0:
        raise PolicyError("rho_max must be in [0, 1]")
    budget = int(np.floor(rho_max * len(tokens)))
    replaced = set()
    edits: list[Edit] = []
    done = False
    for row in policy.rows:
        if done:
            break
        for pos, tok in enumerate(tokens):
            if tok != row.token or pos in replaced:
                continue
            if len(edits) + 1 > budget:
                done = True
                break
            edits.append(Edit(pos, tok, row.replacement))
            replaced.add(pos)
    return PerturbationRecord(
        sample_id=sample_id,
        edits=tuple(edits),
        rho=len(edits) / len(tokens),
        distance=float("nan"),
        pcc=float("nan"),
        label=label,
    )


POLICY_HEADER = "token,count,replacement"


def _needs_quoting(value: str) -> bool:
    return any(ch in value for ch in ',"\n\r')


def _quote(value: str) -> str:
    if _needs_quoting(value):
        return '"' + value.replace('"', '""') + '"'
    return value


def save_policy(policy: SemiUniversalPolicy, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(POLICY_HEADER + "\n")
        for row in policy.rows:
            fh.write(
                f"{_quote(row.token)},{_quote(row.count_text)},{_quote(row.replacement)}\n"
            )


def load_policy(path) -> SemiUniversalPolicy:
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PolicyError(f"{path}: empty policy file") from None
        if header != POLICY_HEADER.split(","):
            raise PolicyError(f"{path}: bad header {header!r}")
        rows = []
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 3:
                raise PolicyError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
            rows.append(PolicyRow(fields[0], fields[1], fields[2]))
    return SemiUniversalPolicy(tuple(rows))


def split_attack_eval(n: int, seed: int) -> tuple[list[int], list[int]]:
    """Seeded uniform shuffle into attack and evaluation halves (attack gets the odd extra)."""
    if n < 1:
        raise PolicyError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    order = [int(i) for i in rng.permutation(n)]
    cut = (n + 1) // 2
    return order[:cut], order[cut:]
