"""Model hosting: word alignment, masked inference and the three explanation methods.

Conventions this server documents in its ``meta`` response:

* masking zeroes the word embeddings of a source word's sub-tokens; position
  and segment embeddings are untouched, and the integrated-gradients baseline
  is the all-zero word-embedding matrix over every position including the
  special tokens;
* the attention distribution of a (layer, head) pair is the first sequence
  position's query row, advertised as ``"attention_query": "first"``;
* sub-token attributions reduce to source tokens by summation over each
  word's piece group; special tokens belong to no group.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

PROTOCOL_VERSION = "attrfool/1"
METHODS = ("S", "IG", "A")


class ServeError(RuntimeError):
    """Request-level failure; mapped to a protocol error object, never a crash."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Encoding:
    input_ids: torch.Tensor        # (1, T)
    attention_mask: torch.Tensor   # (1, T)
    groups: list[list[int]]        # per source token, sub-token indices into T
    special: list[int]             # indices outside every group


class ServedModel:
    """A sequence classifier plus optional sentence encoder and language model."""

    def __init__(
        self,
        classifier,
        tokenizer,
        ig_steps_cap: int = 512,
        sentence_sim: bool = True,
        language_model=None,
        device: str = "cpu",
    ):
        self.device = torch.device(device)
        self.classifier = classifier.to(self.device).eval()
        self.tokenizer = tokenizer
        self.ig_steps_cap = ig_steps_cap
        self.sentence_sim_enabled = sentence_sim
        self.language_model = (
            language_model.to(self.device).eval() if language_model is not None else None
        )
        cfg = self.classifier.config
        self.num_labels = int(cfg.num_labels)
        self.num_layers = int(cfg.num_hidden_layers)
        self.num_heads = int(cfg.num_attention_heads)

    # -- protocol surface -------------------------------------------------------

    def meta(self) -> dict:
        return {
            "version": PROTOCOL_VERSION,
            "labels": self.num_labels,
            "methods": list(METHODS),
            "attention": {"layers": self.num_layers, "heads": self.num_heads},
            "sentence_sim": self.sentence_sim_enabled,
            "perplexity": self.language_model is not None,
            "attention_query": "first",
            "masking": "zero-word-embedding",
        }

    def predict(self, tokens, mask=()) -> list[float]:
        enc = self._encode(tokens)
        X = self._embed(enc, mask)
        with torch.no_grad():
            logits = self.classifier(
                inputs_embeds=X, attention_mask=enc.attention_mask
            ).logits[0]
        return [float(v) for v in logits]

    def attribute(self, tokens, method: str, label: int, mask=(), params=None) -> dict:
        params = params or {}
        if method not in METHODS:
            raise ServeError("capability", f"unsupported method {method!r}")
        if not 0 <= label < self.num_labels:
            raise ServeError("runtime", f"label {label} outside 0..{self.num_labels - 1}")
        enc = self._encode(tokens)
        if method == "S":
            per_piece = self._saliency(enc, label, mask)
            diagnostics = {}
        elif method == "IG":
            steps = int(params.get("ig_steps", 32))
            if steps < 1:
                raise ServeError("protocol", "ig_steps must be >= 1")
            steps = min(steps, self.ig_steps_cap)
            per_piece, diagnostics = self._integrated_gradients(enc, label, mask, steps)
        else:
            layer = int(params.get("layer", 0))
            head = int(params.get("head", 0))
            if not 0 <= layer < self.num_layers or not 0 <= head < self.num_heads:
                raise ServeError(
                    "capability",
                    f"attention selector ({layer}, {head}) outside "
                    f"{self.num_layers}x{self.num_heads}",
                )
            per_piece = self._attention_row(enc, mask, layer, head)
            diagnostics = {}
        reduced = [float(sum(per_piece[i] for i in group)) for group in enc.groups]
        result = {"attributions": reduced, "alignment": [list(g) for g in enc.groups]}
        if diagnostics:
            result["diagnostics"] = diagnostics
        return result

    def sentence_similarity(self, tokens_a, tokens_b) -> float:
        if not self.sentence_sim_enabled:
            raise ServeError("capability", "sentence encoder disabled")
        va = self._sentence_vector(tokens_a)
        vb = self._sentence_vector(tokens_b)
        denom = va.norm() * vb.norm()
        if float(denom) == 0.0:
            raise ServeError("runtime", "zero-norm sentence embedding")
        return float(va @ vb / denom)

    def perplexity(self, tokens) -> float:
        if self.language_model is None:
            raise ServeError("capability", "language model disabled")
        text = " ".join(tokens)
        ids = self.tokenizer(text, return_tensors="pt")["input_ids"].to(self.device)
        if ids.shape[1] < 2:
            raise ServeError("runtime", "sequence too short for perplexity")
        with torch.no_grad():
            loss = self.language_model(ids, labels=ids).loss
        return float(torch.exp(loss))

    # -- internals ---------------------------------------------------------------

    def _encode(self, tokens) -> Encoding:
        if not tokens:
            raise ServeError("protocol", "empty token list")
        pieces: list[str] = []
        groups: list[list[int]] = []
        for word in tokens:
            sub = self.tokenizer.tokenize(word)
            if not sub:
                sub = [self.tokenizer.unk_token]
            start = len(pieces) + 1  # one leading special token ([CLS])
            groups.append(list(range(start, start + len(sub))))
            pieces.extend(sub)
        ids = self.tokenizer.convert_tokens_to_ids(pieces)
        ids = [self.tokenizer.cls_token_id] + ids + [self.tokenizer.sep_token_id]
        total = len(ids)
        covered = {i for g in groups for i in g}
        enc = Encoding(
            input_ids=torch.tensor([ids], device=self.device),
            attention_mask=torch.ones((1, total), dtype=torch.long, device=self.device),
            groups=groups,
            special=[i for i in range(total) if i not in covered],
        )
        return enc

    def _embed(self, enc: Encoding, mask=()) -> torch.Tensor:
        length = len(enc.groups)
        for i in mask:
            if not 0 <= i < length:
                raise ServeError("protocol", f"mask index {i} outside {length} tokens")
        embeddings = self.classifier.get_input_embeddings()
        X = embeddings(enc.input_ids).detach().clone()
        for i in mask:
            for piece_index in enc.groups[i]:
                X[0, piece_index, :] = 0.0
        return X

    def _logit(self, X: torch.Tensor, attention_mask: torch.Tensor, label: int):
        return self.classifier(inputs_embeds=X, attention_mask=attention_mask).logits[0, label]

    def _saliency(self, enc: Encoding, label: int, mask) -> list[float]:
        X = self._embed(enc, mask).requires_grad_(True)
        logit = self._logit(X, enc.attention_mask, label)
        (grad,) = torch.autograd.grad(logit, X)
        return [float(v) for v in grad[0].abs().sum(dim=-1)]

    def _integrated_gradients(self, enc: Encoding, label: int, mask, steps: int):
        X = self._embed(enc, mask)
        total = torch.zeros_like(X)
        for k in range(1, steps + 1):
            alpha = (k - 0.5) / steps
            scaled = (alpha * X).clone().requires_grad_(True)
            logit = self._logit(scaled, enc.attention_mask, label)
            (grad,) = torch.autograd.grad(logit, scaled)
            total += grad
        contributions = X * total / steps
        per_piece = contributions[0].sum(dim=-1)
        with torch.no_grad():
            fx = self._logit(X, enc.attention_mask, label)
            fb = self._logit(torch.zeros_like(X), enc.attention_mask, label)
        span = float(fx - fb)
        attribution_sum = float(per_piece.sum())
        diagnostics = {
            "attribution_sum": attribution_sum,
            "logit_span": span,
            "completeness_residual": abs(attribution_sum - span),
        }
        return [float(v) for v in per_piece], diagnostics

    def _attention_row(self, enc: Encoding, mask, layer: int, head: int) -> list[float]:
        X = self._embed(enc, mask)
        with torch.no_grad():
            out = self.classifier(
                inputs_embeds=X, attention_mask=enc.attention_mask, output_attentions=True
            )
        row = out.attentions[layer][0, head, 0, :]  # query row: first position
        return [float(v) for v in row]

    def _sentence_vector(self, tokens) -> torch.Tensor:
        enc = self._encode(tokens)
        X = self._embed(enc)
        base = getattr(self.classifier, self.classifier.base_model_prefix)
        with torch.no_grad():
            hidden = base(inputs_embeds=X, attention_mask=enc.attention_mask).last_hidden_state
        return hidden[0].mean(dim=0)
