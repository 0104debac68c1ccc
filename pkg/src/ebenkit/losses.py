"""Adversarial and feature-matching losses over discriminator outputs.

Scores are given per scale as 1-D time sequences; features per scale as a
list of (F, T) maps.  Every term is averaged over the K scales.  A batch is
a list of such sets; expectations are arithmetic means over it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidParamsError, ShapeMismatchError

REC_WEIGHT = 100.0


def _scales(scores: Sequence) -> list[np.ndarray]:
    out = [np.asarray(s, dtype=np.float64).reshape(-1) for s in scores]
    if not out or any(s.size == 0 for s in out):
        raise ShapeMismatchError("need at least one scale with at least one score")
    return out


def _check_pair(a: list[np.ndarray], b: list[np.ndarray]) -> None:
    if len(a) != len(b):
        raise ShapeMismatchError(f"{len(a)} real scales vs {len(b)} fake scales")
    for k, (x, y) in enumerate(zip(a, b)):
        if x.shape != y.shape:
            raise ShapeMismatchError(f"scale {k}: shapes {x.shape} and {y.shape}")


def hinge_d_loss(real_scores: Sequence, fake_scores: Sequence) -> float:
    """Discriminator hinge loss: mean over scales of mean(relu(1 - real)) + mean(relu(1 + fake))."""
    real, fake = _scales(real_scores), _scales(fake_scores)
    _check_pair(real, fake)
    k = len(real)
    lr = sum(float(np.mean(np.maximum(0.0, 1.0 - r))) for r in real) / k
    lf = sum(float(np.mean(np.maximum(0.0, 1.0 + f))) for f in fake) / k
    return lr + lf


def hinge_g_adv(fake_scores: Sequence) -> float:
    """Generator hinge loss: mean over scales of mean(relu(1 - fake))."""
    fake = _scales(fake_scores)
    return sum(float(np.mean(np.maximum(0.0, 1.0 - f))) for f in fake) / len(fake)


def feature_match_loss(real_feats: Sequence[Sequence], fake_feats: Sequence[Sequence]) -> float:
    """Mean absolute feature difference per layer, summed over layers, averaged over scales."""
    if len(real_feats) != len(fake_feats) or not real_feats:
        raise ShapeMismatchError("real and fake feature sets need the same non-zero scale count")
    total = 0.0
    for k, (rs, fs) in enumerate(zip(real_feats, fake_feats)):
        if len(rs) != len(fs):
            raise ShapeMismatchError(f"scale {k}: {len(rs)} vs {len(fs)} layers")
        for r, f in zip(rs, fs):
            r, f = np.atleast_2d(np.asarray(r, np.float64)), np.atleast_2d(np.asarray(f, np.float64))
            if r.shape != f.shape or r.size == 0:
                raise ShapeMismatchError(f"scale {k}: feature shapes {r.shape} and {f.shape}")
            total += float(np.mean(np.abs(r - f)))
    return total / len(real_feats)


def total_g_loss(adv: float, rec: float) -> float:
    if adv < 0 or rec < 0:
        raise InvalidParamsError("loss components must be non-negative")
    return adv + REC_WEIGHT * rec


@dataclass(frozen=True)
class LossBreakdown:
    l_d: float
    l_g_adv: float
    l_g_rec: float
    l_g_total: float

    def to_dict(self) -> dict:
        return {"l_d": self.l_d, "l_g_adv": self.l_g_adv, "l_g_rec": self.l_g_rec,
                "l_g_total": self.l_g_total}


def _batch_mean(values: list[float]) -> float:
    return sum(values) / len(values)


def loss_breakdown(real, fake) -> LossBreakdown:
    """All losses for a batch of discriminator outputs.

    ``real`` and ``fake`` are lists (one per batch item) of per-scale objects
    with ``logits`` and ``features``, e.g. ``discriminator_forward`` results.
    A single item may be passed without the outer list.
    """
    if real and hasattr(real[0], "logits"):
        real, fake = [real], [fake]
    if len(real) != len(fake) or not real:
        raise ShapeMismatchError("real and fake batches differ in size")
    l_d = _batch_mean([hinge_d_loss([s.logits for s in r], [s.logits for s in f]) for r, f in zip(real, fake)])
    adv = _batch_mean([hinge_g_adv([s.logits for s in f]) for f in fake])
    rec = _batch_mean([feature_match_loss([s.features for s in r], [s.features for s in f])
                       for r, f in zip(real, fake)])
    return LossBreakdown(l_d, adv, rec, total_g_loss(adv, rec))
