"""The three explainers behind one request type, so attacks treat explanations as a black box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METHOD_SALIENCY = "S"
METHOD_INTEGRATED_GRADIENTS = "IG"
METHOD_ATTENTION = "A"
METHODS = (METHOD_SALIENCY, METHOD_INTEGRATED_GRADIENTS, METHOD_ATTENTION)


class AttributionError(ValueError):
    pass


@dataclass(frozen=True)
class IgConfig:
    """Midpoint-rule discretization of the path integral from the zero baseline."""

    steps: int = 32

    def __post_init__(self):
        if self.steps < 1:
            raise AttributionError("step count must be >= 1")


@dataclass(frozen=True)
class AttentionSelector:
    """Which attention distribution to read; native models expose exactly (0, 0)."""

    layer: int = 0
    head: int = 0

    def __post_init__(self):
        if self.layer < 0 or self.head < 0:
            raise AttributionError("layer and head must be non-negative")


@dataclass(frozen=True)
class AttributionRequest:
    """Uniform explainer identity: method id plus its configuration."""

    method: str
    ig: IgConfig = IgConfig()
    attention: AttentionSelector = AttentionSelector()

    def __post_init__(self):
        if self.method not in METHODS:
            raise AttributionError(f"unknown method {self.method!r}, expected one of {METHODS}")

    def params(self) -> dict:
        """Wire-protocol parameter payload for this request."""
        if self.method == METHOD_INTEGRATED_GRADIENTS:
            return {"ig_steps": self.ig.steps}
        if self.method == METHOD_ATTENTION:
            return {"layer": self.attention.layer, "head": self.attention.head}
        return {}


def saliency(model, X: np.ndarray, label: int) -> np.ndarray:
    """Per-token sums of absolute logit gradients."""
    return np.abs(model.grad_logit(X, label)).sum(axis=0)


def integrated_gradients(model, X: np.ndarray, label: int, cfg: IgConfig) -> np.ndarray:
    """Midpoint Riemann sum of gradients along the straight path from the zero baseline."""
    avg = np.zeros_like(X)
    m = cfg.steps
    for k in range(1, m + 1):
        alpha = (k - 0.5) / m
        avg += model.grad_logit(alpha * X, label)
    avg /= m
    return (X * avg).sum(axis=0)


def attention_attr(model, X: np.ndarray, selector: AttentionSelector) -> np.ndarray:
    """The model's attention distribution over positions; errors if it has none."""
    if selector.layer != 0 or selector.head != 0:
        raise AttributionError(
            f"native models expose a single attention head; got layer={selector.layer} "
            f"head={selector.head}"
        )
    return model.attention_weights(X)


def native_attribution(model, tokens, label, request: AttributionRequest, mask=()) -> np.ndarray:
    X = model.embed(tokens, mask)
    if request.method == METHOD_SALIENCY:
        return saliency(model, X, label)
    if request.method == METHOD_INTEGRATED_GRADIENTS:
        return integrated_gradients(model, X, label, request.ig)
    return attention_attr(model, X, request.attention)
