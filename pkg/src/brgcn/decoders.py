"""Triple-scoring decoders for link prediction.

Each scorer maps (head, relation, tail) embedding vectors to a raw
plausibility score; higher means more plausible.  Scores are differentiable
through the numeric substrate so decoders can be trained jointly with an
encoder (auto-encoder mode) or over free entity embeddings (standalone mode).

Squashing is left to the loss: the logistic sigmoid is applied there, so all
scorers return raw values here (this also keeps the circular-correlation
scorer from being squashed twice).
"""

from __future__ import annotations

import numpy as np

from . import diffnum as dn
from .diffnum import DimensionError, Tensor
from .layer import ConfigurationError

KINDS = ("distmult", "transe", "hole", "complex")


class DecoderParams:
    """Learned relation embeddings (plus entity embeddings in standalone mode).

    Real-valued decoders store one length-``dim`` vector per relation;
    ``complex`` stores 2*dim values per row, the real half followed by the
    imaginary half.  Entity embeddings are present only in standalone mode
    and use the matching width; in auto-encoder mode they come from the
    encoder and must have the decoder's width.
    """

    def __init__(self, kind: str, rel_emb: Tensor, entity_emb: Tensor | None = None):
        if kind not in KINDS:
            raise ConfigurationError(f"unknown decoder kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.rel_emb = rel_emb
        self.entity_emb = entity_emb
        width = rel_emb.shape[1]
        if kind == "complex":
            if width % 2:
                raise ConfigurationError("complex decoder needs an even embedding width")
            self.dim = width // 2
        else:
            self.dim = width
        if entity_emb is not None and entity_emb.shape[1] != width:
            raise ConfigurationError(
                f"entity embedding width {entity_emb.shape[1]} != relation width {width}"
            )

    @property
    def width(self) -> int:
        """Stored vector length: dim for real decoders, 2*dim for complex."""
        return self.rel_emb.shape[1]

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        kind: str,
        num_relations: int,
        dim: int,
        *,
        num_entities: int | None = None,
        prefix: str = "decoder",
    ) -> "DecoderParams":
        """Initialize embeddings uniformly in [-0.5/sqrt(d), 0.5/sqrt(d)]."""
        width = 2 * dim if kind == "complex" else dim
        limit = 0.5 / np.sqrt(dim)
        rel = dn.param(rng.uniform(-limit, limit, size=(num_relations, width)), name=f"{prefix}.rel")
        ent = None
        if num_entities is not None:
            ent = dn.param(
                rng.uniform(-limit, limit, size=(num_entities, width)), name=f"{prefix}.entity"
            )
        return cls(kind, rel, ent)

    def params(self) -> list[Tensor]:
        out = [self.rel_emb]
        if self.entity_emb is not None:
            out.append(self.entity_emb)
        return out


def score(kind: str, h: Tensor, r: Tensor, t: Tensor) -> Tensor:
    """Raw confidence score of one triple from its embedding vectors.

    distmult: sum_k h_k r_k t_k
    transe:   -|| h + r - t ||_2
    hole:     r . (h * t) with (h * t)_k = sum_m h_m t_{(m+k) mod d}
    complex:  Re(sum_k r_k h_k conj(t_k)) on interleaved [real || imag] halves
    """
    if kind not in KINDS:
        raise ConfigurationError(f"unknown decoder kind {kind!r}; expected one of {KINDS}")
    if not (h.shape == r.shape == t.shape) or h.ndim != 1:
        raise DimensionError(
            f"score expects three equal-length vectors, got {h.shape}, {r.shape}, {t.shape}"
        )
    if kind == "distmult":
        return dn.tsum(dn.mul(dn.mul(h, r), t))
    if kind == "transe":
        return dn.neg(dn.l2_norm(dn.sub(dn.add(h, r), t)))
    if kind == "hole":
        d = h.shape[0]
        corr = [dn.dot(h, dn.take(t, (np.arange(d) + k) % d)) for k in range(d)]
        return dn.dot(r, dn.stack(corr))
    # complex: split the stored [real || imag] halves
    d2 = h.shape[0]
    if d2 % 2:
        raise DimensionError("complex score expects even-length vectors (real||imag)")
    d = d2 // 2
    re_idx, im_idx = np.arange(d), np.arange(d, 2 * d)
    h_re, h_im = dn.take(h, re_idx), dn.take(h, im_idx)
    r_re, r_im = dn.take(r, re_idx), dn.take(r, im_idx)
    t_re, t_im = dn.take(t, re_idx), dn.take(t, im_idx)
    pos = dn.add(
        dn.tsum(dn.mul(dn.mul(r_re, h_re), t_re)),
        dn.add(
            dn.tsum(dn.mul(dn.mul(r_re, h_im), t_im)),
            dn.tsum(dn.mul(dn.mul(r_im, h_re), t_im)),
        ),
    )
    return dn.sub(pos, dn.tsum(dn.mul(dn.mul(r_im, h_im), t_re)))


def score_triples(
    decoder: DecoderParams, entity_emb: Tensor, triples
) -> Tensor:
    """Score a batch of (h, r, t) id triples against entity embeddings; returns (n,)."""
    if entity_emb.shape[1] != decoder.width:
        raise DimensionError(
            f"entity embedding width {entity_emb.shape[1]} != decoder width {decoder.width}"
        )
    scores = []
    for h, r, t in triples:
        hv = dn.reshape(dn.take(entity_emb, np.asarray([h])), (decoder.width,))
        tv = dn.reshape(dn.take(entity_emb, np.asarray([t])), (decoder.width,))
        rv = dn.reshape(dn.take(decoder.rel_emb, np.asarray([r])), (decoder.width,))
        scores.append(score(decoder.kind, hv, rv, tv))
    return dn.stack(scores)


def ensemble_score(alpha_encoder: float, alpha_embedding: float, beta: float) -> float:
    """Convex combination of an encoder-model score and an embedding-model score."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError(f"ensemble weight beta must lie in [0, 1], got {beta}")
    return beta * alpha_encoder + (1.0 - beta) * alpha_embedding
