from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import EncoderParams


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, params: EncoderParams) -> "AdamState":
        return cls(
            {k: np.zeros_like(t.data) for k, t in params.items()},
            {k: np.zeros_like(t.data) for k, t in params.items()},
            0,
        )

    def to_blobs(self) -> dict[str, np.ndarray]:
        out = {f"adam.m.{k}": a for k, a in self.m.items()}
        out.update({f"adam.v.{k}": a for k, a in self.v.items()})
        return out

    @classmethod
    def from_blobs(cls, blobs: dict[str, np.ndarray], step: int) -> "AdamState":
        m = {k[7:]: a for k, a in blobs.items() if k.startswith("adam.m.")}
        v = {k[7:]: a for k, a in blobs.items() if k.startswith("adam.v.")}
        return cls(m, v, step)


def adam_step(params: EncoderParams, state: AdamState, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8) -> None:
    """Bias-corrected Adam update of every parameter from its ``.grad`` (missing grad = 0).

    Updates ``params`` and ``state`` in place.
    """
    for name, t in params.items():
        if t.grad is not None and not np.all(np.isfinite(t.grad)):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for name, t in params.items():
        g = np.zeros_like(t.data) if t.grad is None else t.grad
        m = state.m.setdefault(name, np.zeros_like(t.data))
        v = state.v.setdefault(name, np.zeros_like(t.data))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        t.data = t.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
