"""End-to-end optimization for node classification and link prediction.

Both tasks train full-batch with Adam.  All randomness of a run (parameter
init, dropout masks, negative sampling) flows from a single seeded
generator, so fixed-seed runs are bit-reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import decoders as dec
from . import diffnum as dn
from . import hetgraph as hg
from .diffnum import Tape, Tensor
from .layer import AttentionTrace, BrgcnLayerParams, ConfigurationError, stack_forward

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-12


class TrainingAbort(Exception):
    """Training hit a non-finite loss; message carries epoch and culprit."""


class SamplingExhaustedError(Exception):
    """No valid negative triple could be drawn."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    task: str = "node_classification"
    lr: float = 0.05
    l2_penalty: float = 0.0
    epochs: int = 85
    hidden_units: int = 16
    num_bases: int = 0
    dropout: float = 0.4
    leaky_slope: float = 0.2
    omega: int = 1
    beta: float = 0.4
    seed: int = 0
    num_layers: int = 2
    encoder_layers: int = 1
    add_inverse: bool = False
    add_self_loop: bool = False
    early_stop_patience: int = 0  # epochs without validation improvement; 0 = off

    def validate(self) -> None:
        problems = []
        if self.task not in ("node_classification", "link_prediction"):
            problems.append(f"unknown task {self.task!r}")
        if self.lr <= 0:
            problems.append(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.dropout < 1.0:
            problems.append(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.epochs <= 0:
            problems.append(f"epochs must be positive, got {self.epochs}")
        if self.task == "link_prediction" and self.omega < 1:
            problems.append(f"omega must be >= 1 for link prediction, got {self.omega}")
        if not 0.0 <= self.beta <= 1.0:
            problems.append(f"beta must lie in [0, 1], got {self.beta}")
        if self.early_stop_patience < 0:
            problems.append(f"early_stop_patience must be non-negative, got {self.early_stop_patience}")
        if problems:
            raise ConfigurationError("; ".join(problems))


@dataclass(frozen=True)
class TripleBatch:
    """Scored triples with their positive/negative indicator."""

    triples: tuple[tuple[int, int, int], ...]
    y: tuple[int, ...]

    def __post_init__(self):
        if len(self.triples) != len(self.y):
            raise ConfigurationError("triples and y must have equal length")
        if any(v not in (0, 1) for v in self.y):
            raise ConfigurationError("y entries must be 0 or 1")

    def validate_positives(self, known: set[tuple[int, int, int]]) -> None:
        for t, v in zip(self.triples, self.y):
            if v == 1 and t not in known:
                raise ConfigurationError(f"positive triple {t} not in the training edge set")


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def nc_loss(probs: Tensor, labels: hg.NodeLabels) -> Tensor:
    """Cross-entropy over labeled nodes: -sum_i ln p[i, class_i].

    ``probs`` holds per-node class probabilities (softmax already applied).
    Unlabeled nodes contribute nothing.  Probabilities are clamped at 1e-12
    before the log, with a warning, so a confidently wrong model yields a
    large finite loss instead of an overflow.
    """
    if probs.ndim != 2:
        raise dn.DimensionError(f"probs must be (N, K), got {probs.shape}")
    ids = np.asarray(labels.labeled_ids, dtype=np.intp)
    if ids.size == 0:
        raise ConfigurationError("nc_loss requires at least one labeled node")
    classes = np.array([labels.labels[i] for i in labels.labeled_ids])
    if probs.data[ids, classes].min() < LOG_CLAMP:
        log.warning("true-class probability below %g clamped in nc_loss", LOG_CLAMP)
    picked = dn.take(probs, ids)
    onehot = np.zeros((ids.size, probs.shape[1]))
    onehot[np.arange(ids.size), classes] = 1.0
    return dn.neg(dn.tsum(dn.mul(Tensor(onehot), dn.log(dn.clip_min(picked, LOG_CLAMP)))))


def lp_loss(batch: TripleBatch, scores: Tensor, e_prime_size: int, omega: int) -> Tensor:
    """Normalized binary cross-entropy over real and corrupted triples.

    L = c * sum_i [ y_i log l(a_i) + (1 - y_i) log(1 - l(a_i)) ] with
    l the logistic sigmoid and c = -1 / ((1 + omega) * |E'|); the negative
    constant makes the loss non-negative.  Saturated sigmoids are clamped at
    1e-12 inside the logs, with a warning.
    """
    if scores.ndim != 1 or scores.shape[0] != len(batch.triples):
        raise dn.DimensionError(
            f"scores shape {scores.shape} does not match batch size {len(batch.triples)}"
        )
    if e_prime_size <= 0:
        raise ConfigurationError("e_prime_size must be positive")
    c = -1.0 / ((1 + omega) * e_prime_size)
    probs = dn.sigmoid(scores)
    y = np.asarray(batch.y, dtype=np.float64)
    hit = ((y == 1) & (probs.data < LOG_CLAMP)) | ((y == 0) & (probs.data > 1.0 - LOG_CLAMP))
    if hit.any():
        log.warning("saturated sigmoid clamped in lp_loss for %d triple(s)", int(hit.sum()))
    pos = dn.mul(Tensor(y), dn.log(dn.clip_min(probs, LOG_CLAMP)))
    neg = dn.mul(Tensor(1.0 - y), dn.log(dn.clip_min(dn.sub(1.0, probs), LOG_CLAMP)))
    return dn.mul(dn.tsum(dn.add(pos, neg)), c)


# ---------------------------------------------------------------------------
# negative sampling
# ---------------------------------------------------------------------------


def negative_sample(
    positive: tuple[int, int, int],
    graph: hg.HeteroGraph,
    rng: np.random.Generator,
    *,
    omega: int = 1,
    known: set[tuple[int, int, int]] | None = None,
    max_retries: int = 100,
) -> list[tuple[int, int, int]]:
    """Draw ``omega`` corrupted triples for one observed positive.

    Each draw replaces the head or the tail (equal probability) with a
    uniformly random entity; draws that reproduce a known positive are
    rejected and resampled (filtered negatives).  Raises
    :class:`SamplingExhaustedError` when ``max_retries`` consecutive draws
    for one negative all land on known positives.
    """
    if graph.num_nodes == 0:
        raise SamplingExhaustedError("cannot sample negatives from an empty graph")
    known_set = graph.triple_set if known is None else known
    h, r, t = positive
    out = []
    for _ in range(omega):
        for attempt in range(max_retries):
            corrupt_head = rng.random() < 0.5
            entity = int(rng.integers(graph.num_nodes))
            cand = (entity, r, t) if corrupt_head else (h, r, entity)
            if cand not in known_set:
                out.append(cand)
                break
        else:
            raise SamplingExhaustedError(
                f"no valid corruption of {positive} found in {max_retries} draws"
            )
    return out


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, params: Sequence[Tensor], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        dn.zero_grad(self.params)

    def step(self) -> None:
        self.t += 1
        for k, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            m_hat = self.m[k] / (1 - self.beta1**self.t)
            v_hat = self.v[k] / (1 - self.beta2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class OptimizeResult:
    loss_curve: list[float] = field(default_factory=list)


def optimize(
    params: Sequence[Tensor],
    loss_fn: Callable[[int], Tensor],
    config: TrainConfig,
    *,
    on_epoch: Callable[[int, float], None] | None = None,
) -> OptimizeResult:
    """Run Adam for up to ``config.epochs`` full-batch steps.

    ``loss_fn(epoch)`` rebuilds the scalar loss; the l2 penalty (when
    configured) is added here as lambda * sum ||theta||^2 so it flows
    through the tape.  A non-finite loss aborts with the epoch number and
    the first offending parameter.  ``on_epoch`` may return a truthy value
    to stop training early (used for validation-based early stopping).
    """
    config.validate()
    adam = Adam(params, lr=config.lr)
    result = OptimizeResult()
    for epoch in range(config.epochs):
        adam.zero_grad()
        try:
            with Tape() as tape:
                loss = loss_fn(epoch)
                if config.l2_penalty > 0.0:
                    penalty = None
                    for p in params:
                        term = dn.tsum(dn.mul(p, p))
                        penalty = term if penalty is None else dn.add(penalty, term)
                    loss = dn.add(loss, dn.mul(penalty, config.l2_penalty))
                tape.backward(loss)
        except dn.NumericError as err:
            raise TrainingAbort(f"epoch {epoch}: {err}; {_culprit(params)}") from err
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingAbort(f"epoch {epoch}: non-finite loss; {_culprit(params)}")
        adam.step()
        result.loss_curve.append(value)
        if on_epoch is not None and on_epoch(epoch, value):
            break
    return result


def _culprit(params: Sequence[Tensor]) -> str:
    for p in params:
        if not np.isfinite(p.data).all() or (p.grad is not None and not np.isfinite(p.grad).all()):
            return f"offending parameter: {p.name or 'unnamed'}"
    return "offending parameter: none (loss computation itself overflowed)"


# ---------------------------------------------------------------------------
# task models
# ---------------------------------------------------------------------------


class NodeClassificationModel:
    """Stacked layers with a per-node softmax head."""

    def __init__(self, layers: list[BrgcnLayerParams], variant: str = "full"):
        self.layers = layers
        self.variant = variant

    @classmethod
    def build(
        cls,
        rng: np.random.Generator,
        graph: hg.HeteroGraph,
        num_classes: int,
        cfg: TrainConfig,
        *,
        variant: str = "full",
        input_dim: int | None = None,
    ) -> "NodeClassificationModel":
        d0 = input_dim if input_dim is not None else graph.num_nodes
        dims = [d0] + [cfg.hidden_units] * (cfg.num_layers - 1) + [num_classes]
        layers = [
            BrgcnLayerParams.create(
                rng,
                dims[k],
                dims[k + 1],
                graph.num_relations,
                num_bases=cfg.num_bases,
                leaky_slope=cfg.leaky_slope,
                dropout=cfg.dropout,
                prefix=f"layer{k}",
            )
            for k in range(len(dims) - 1)
        ]
        return cls(layers, variant)

    def params(self) -> list[Tensor]:
        out = []
        for lay in self.layers:
            out.extend(lay.params())
        return out

    def forward(
        self,
        graph: hg.HeteroGraph,
        *,
        x0: Tensor | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
        collect_trace: bool = False,
    ) -> tuple[Tensor, list[AttentionTrace]]:
        h, traces = stack_forward(
            self.layers,
            x0,
            graph,
            mode=self.variant,
            training=training,
            rng=rng,
            collect_trace=collect_trace,
        )
        return dn.softmax_rows(h), traces

    def predict(self, graph: hg.HeteroGraph, *, x0: Tensor | None = None) -> np.ndarray:
        probs, _ = self.forward(graph, x0=x0)
        return probs.data.argmax(axis=1)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.params()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for p in self.params():
            if p.name not in arrays:
                raise ConfigurationError(f"checkpoint missing parameter {p.name!r}")
            if arrays[p.name].shape != p.data.shape:
                raise ConfigurationError(
                    f"checkpoint shape {arrays[p.name].shape} != expected {p.data.shape} for {p.name!r}"
                )
            p.data = np.array(arrays[p.name], dtype=np.float64)


class LinkPredictionModel:
    """Encoder embeddings plus a triple-scoring decoder.

    In auto-encoder mode the entity embeddings are the encoder outputs on
    the training graph; in standalone mode they are free parameters owned by
    the decoder.
    """

    def __init__(self, encoder: list[BrgcnLayerParams] | None, decoder: dec.DecoderParams):
        self.encoder = encoder
        self.decoder = decoder

    @classmethod
    def build(
        cls,
        rng: np.random.Generator,
        graph: hg.HeteroGraph,
        num_score_relations: int,
        cfg: TrainConfig,
        decoder_kind: str,
        *,
        standalone: bool = False,
    ) -> "LinkPredictionModel":
        width = cfg.hidden_units
        if decoder_kind == "complex":
            if width % 2:
                raise ConfigurationError(
                    "complex decoder needs an even embedding width (real||imag halves)"
                )
            dim = width // 2
        else:
            dim = width
        if standalone:
            decoder = dec.DecoderParams.create(
                rng, decoder_kind, num_score_relations, dim, num_entities=graph.num_nodes
            )
            return cls(None, decoder)
        dims = [graph.num_nodes] + [width] * cfg.encoder_layers
        encoder = [
            BrgcnLayerParams.create(
                rng,
                dims[k],
                dims[k + 1],
                graph.num_relations,
                num_bases=cfg.num_bases,
                leaky_slope=cfg.leaky_slope,
                dropout=cfg.dropout,
                prefix=f"layer{k}",
            )
            for k in range(cfg.encoder_layers)
        ]
        decoder = dec.DecoderParams.create(rng, decoder_kind, num_score_relations, dim)
        return cls(encoder, decoder)

    def params(self) -> list[Tensor]:
        out = []
        if self.encoder is not None:
            for lay in self.encoder:
                out.extend(lay.params())
        out.extend(self.decoder.params())
        return out

    def embeddings(
        self,
        graph: hg.HeteroGraph,
        *,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        if self.encoder is None:
            return self.decoder.entity_emb
        h, _ = stack_forward(self.encoder, None, graph, training=training, rng=rng, collect_trace=False)
        return h

    def score_fn(self, graph: hg.HeteroGraph) -> Callable[[int, int, int], float]:
        """A deterministic eval-mode scorer over entity ids."""
        emb = self.embeddings(graph).data
        rel = self.decoder.rel_emb.data
        kind = self.decoder.kind

        def fn(h: int, r: int, t: int) -> float:
            return dec.score(kind, Tensor(emb[h]), Tensor(rel[r]), Tensor(emb[t])).item()

        return fn

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.params()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for p in self.params():
            if p.name not in arrays:
                raise ConfigurationError(f"checkpoint missing parameter {p.name!r}")
            if arrays[p.name].shape != p.data.shape:
                raise ConfigurationError(
                    f"checkpoint shape {arrays[p.name].shape} != expected {p.data.shape} for {p.name!r}"
                )
            p.data = np.array(arrays[p.name], dtype=np.float64)


# ---------------------------------------------------------------------------
# training pipelines
# ---------------------------------------------------------------------------


@dataclass
class NCRun:
    model: NodeClassificationModel
    graph: hg.HeteroGraph  # the augmented training graph
    loss_curve: list[float]
    metrics_rows: list[tuple[int, float, float, str]]
    train_accuracy: float
    valid_accuracy: float | None
    test_accuracy: float | None
    traces: list[AttentionTrace]


def train_node_classifier(
    graph: hg.HeteroGraph,
    labels: hg.NodeLabels,
    split: hg.SplitSpec,
    cfg: TrainConfig,
    *,
    variant: str = "full",
) -> NCRun:
    """Full-batch semi-supervised classification training.

    The graph is augmented per the config flags, the model is trained on the
    ``split.train`` labels, and per-epoch metrics are recorded from an
    evaluation-mode forward pass (dropout off).  With a positive
    ``early_stop_patience`` and a non-empty validation split, training stops
    once the validation accuracy has not improved for that many epochs.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    g = hg.augment(graph, cfg.add_inverse, cfg.add_self_loop)
    model = NodeClassificationModel.build(rng, g, labels.num_classes, cfg, variant=variant)
    train_labels = labels.restrict(split.train)
    metrics_rows: list[tuple[int, float, float, str]] = []
    best_val = [-1.0, 0]  # best validation accuracy, epochs since improvement

    def loss_fn(epoch: int) -> Tensor:
        probs, _ = model.forward(g, training=True, rng=rng)
        return nc_loss(probs, train_labels)

    def on_epoch(epoch: int, loss_value: float) -> bool:
        pred = model.predict(g)
        train_acc = _accuracy_ids(pred, labels, split.train)
        val = ""
        stop = False
        if split.valid:
            val_acc = _accuracy_ids(pred, labels, split.valid)
            val = f"{val_acc:.17g}"
            if val_acc > best_val[0]:
                best_val[0], best_val[1] = val_acc, 0
            else:
                best_val[1] += 1
            stop = 0 < cfg.early_stop_patience <= best_val[1]
        metrics_rows.append((epoch, loss_value, train_acc, val))
        return stop

    result = optimize(model.params(), loss_fn, cfg, on_epoch=on_epoch)
    probs, traces = model.forward(g, collect_trace=True)
    pred = probs.data.argmax(axis=1)
    return NCRun(
        model=model,
        graph=g,
        loss_curve=result.loss_curve,
        metrics_rows=metrics_rows,
        train_accuracy=_accuracy_ids(pred, labels, split.train),
        valid_accuracy=_accuracy_ids(pred, labels, split.valid) if split.valid else None,
        test_accuracy=_accuracy_ids(pred, labels, split.test) if split.test else None,
        traces=traces,
    )


def _accuracy_ids(pred: np.ndarray, labels: hg.NodeLabels, ids) -> float:
    ids = list(ids)
    if not ids:
        return float("nan")
    hits = sum(1 for i in ids if pred[i] == labels.labels[i])
    return 100.0 * hits / len(ids)


@dataclass
class LPRun:
    model: LinkPredictionModel
    graph: hg.HeteroGraph  # augmented message-passing graph (training edges only)
    loss_curve: list[float]
    metrics_rows: list[tuple[int, float, float, str]]
    train_triples: tuple[tuple[int, int, int], ...]


def train_link_predictor(
    graph: hg.HeteroGraph,
    split: hg.SplitSpec,
    cfg: TrainConfig,
    decoder_kind: str,
    *,
    standalone: bool = False,
) -> LPRun:
    """Negative-sampled link-prediction training.

    Message passing and negative filtering use only the training edges;
    scores for valid/test triples never leak into the encoder input.  Each
    epoch draws ``omega`` fresh corruptions per positive.  The metrics
    ``train_acc`` column reports the fraction of batch triples whose score
    sign matches their label; the validation column is left empty.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    train_triples = tuple(graph.triples[k] for k in split.train)
    if not train_triples:
        raise ConfigurationError("link prediction requires a non-empty training split")
    g_train = hg.with_triples(graph, train_triples)
    g_enc = hg.augment(g_train, cfg.add_inverse, cfg.add_self_loop)
    model = LinkPredictionModel.build(
        rng, g_enc, graph.num_relations, cfg, decoder_kind, standalone=standalone
    )
    known = set(train_triples)
    metrics_rows: list[tuple[int, float, float, str]] = []
    last_batch_acc = [0.0]

    def loss_fn(epoch: int) -> Tensor:
        emb = model.embeddings(g_enc, training=True, rng=rng)
        triples = list(train_triples)
        y = [1] * len(train_triples)
        for pos in train_triples:
            negs = negative_sample(pos, g_train, rng, omega=cfg.omega, known=known)
            triples.extend(negs)
            y.extend([0] * len(negs))
        batch = TripleBatch(tuple(triples), tuple(y))
        scores = dec.score_triples(model.decoder, emb, batch.triples)
        correct = sum(
            1 for s, lab in zip(scores.data, y) if (s > 0) == bool(lab)
        )
        last_batch_acc[0] = 100.0 * correct / len(y)
        return lp_loss(batch, scores, e_prime_size=len(train_triples), omega=cfg.omega)

    def on_epoch(epoch: int, loss_value: float) -> None:
        metrics_rows.append((epoch, loss_value, last_batch_acc[0], ""))

    result = optimize(model.params(), loss_fn, cfg, on_epoch=on_epoch)
    return LPRun(
        model=model,
        graph=g_enc,
        loss_curve=result.loss_curve,
        metrics_rows=metrics_rows,
        train_triples=train_triples,
    )
