"""The bi-level attention graph convolution layer and its uni-level variants.

One layer maps node features (N, d_in) to (N, d_out) in two stages.  Per
relation r incident to node i, additive attention over the neighbors
N_i^r produces a relation-specific embedding

    z_i^r = sum_j softmax_j(LeakyReLU(a_r . [h_i || h_j])) * h_j,

then multiplicative attention across the incident relations fuses these
summaries through query/key/value projections

    psi_i[r, r'] = softmax_{r'}(q_r . k_{r'}),
    delta_i^r   = ReLU(sum_{r'} psi_i[r, r'] v_{r'} + W_self h_i),
    h'_i        = sum_{r in R_i} delta_i^r.

The self term W_self h_i is shared across relations and, per the layer
algebra, appears inside every delta_i^r, so it is counted |R_i| times in
the output.  Nodes with no outgoing edges produce the zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import diffnum as dn
from .diffnum import Tensor
from .hetgraph import HeteroGraph


class ConfigurationError(Exception):
    """A layer or model was assembled with inconsistent dimensions/options."""


class PreconditionError(Exception):
    """An operation was invoked outside its domain (e.g. empty neighborhood)."""


VARIANTS = ("full", "node_only", "relation_only", "rgcn_baseline")


class BrgcnLayerParams:
    """All learnable state of one layer.

    Per relation: the attention vector ``a[r]`` (length 2*d_in) and the
    query/key/value projections ``w_query/w_key/w_value`` (d_att x d_in).
    Shared: the self-connection matrix ``w_self`` (d_out x d_in).  The value
    dimension must match the self-connection output, so d_att == d_out.

    With ``num_bases > 0`` the projection matrices are not stored directly;
    instead one shared stack of basis matrices plus per-(role, relation)
    coefficient vectors reconstructs W_role_r = sum_b coeff[b] * basis[b].
    The attention vectors and w_self are never decomposed.

    ``input_projection`` optionally adds square per-relation matrices applied
    to neighbor features inside the z aggregation; off by default, where the
    aggregation uses raw neighbor features.
    """

    ROLES = ("query", "key", "value")

    def __init__(
        self,
        d_in: int,
        d_out: int,
        num_relations: int,
        *,
        num_bases: int = 0,
        leaky_slope: float = 0.2,
        dropout: float = 0.0,
        d_att: int | None = None,
    ):
        if d_att is not None and d_att != d_out:
            raise ConfigurationError(
                f"value dimension d_att={d_att} must equal d_out={d_out}: "
                "the fused values are added to W_self h_i"
            )
        if not 0.0 <= dropout < 1.0:
            raise ConfigurationError(f"dropout must lie in [0, 1), got {dropout}")
        if num_bases < 0:
            raise ConfigurationError(f"num_bases must be non-negative, got {num_bases}")
        self.d_in = d_in
        self.d_out = d_out
        self.d_att = d_out
        self.num_relations = num_relations
        self.num_bases = num_bases
        self.leaky_slope = leaky_slope
        self.dropout = dropout
        self.a: list[Tensor] = []
        self.w_self: Tensor | None = None
        self.w_query: list[Tensor] = []
        self.w_key: list[Tensor] = []
        self.w_value: list[Tensor] = []
        self.basis: Tensor | None = None
        self.coeff: dict[str, list[Tensor]] = {}
        self.input_proj: list[Tensor] | None = None

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        d_in: int,
        d_out: int,
        num_relations: int,
        *,
        num_bases: int = 0,
        leaky_slope: float = 0.2,
        dropout: float = 0.0,
        input_projection: bool = False,
        prefix: str = "layer",
    ) -> "BrgcnLayerParams":
        """Glorot-uniform initialization of all parameter groups."""
        p = cls(
            d_in,
            d_out,
            num_relations,
            num_bases=num_bases,
            leaky_slope=leaky_slope,
            dropout=dropout,
        )

        def glorot(fan_in, fan_out, shape, name):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return dn.param(rng.uniform(-limit, limit, size=shape), name=name)

        p.a = [
            glorot(2 * d_in, 1, (2 * d_in,), f"{prefix}.a.{r}") for r in range(num_relations)
        ]
        p.w_self = glorot(d_in, d_out, (d_out, d_in), f"{prefix}.w_self")
        if num_bases == 0:
            for role in cls.ROLES:
                mats = [
                    glorot(d_in, d_out, (d_out, d_in), f"{prefix}.w_{role}.{r}")
                    for r in range(num_relations)
                ]
                setattr(p, f"w_{role}", mats)
        else:
            p.basis = glorot(d_in, d_out, (num_bases, d_out, d_in), f"{prefix}.basis")
            p.coeff = {
                role: [
                    dn.param(
                        rng.normal(0.0, 1.0 / np.sqrt(num_bases), size=num_bases),
                        name=f"{prefix}.coeff_{role}.{r}",
                    )
                    for r in range(num_relations)
                ]
                for role in cls.ROLES
            }
        if input_projection:
            p.input_proj = [
                glorot(d_in, d_in, (d_in, d_in), f"{prefix}.input_proj.{r}")
                for r in range(num_relations)
            ]
        return p

    def params(self) -> list[Tensor]:
        """All learnable tensors in a fixed, checkpoint-stable order."""
        out = list(self.a)
        if self.num_bases == 0:
            for role in self.ROLES:
                out.extend(getattr(self, f"w_{role}"))
        else:
            out.append(self.basis)
            for role in self.ROLES:
                out.extend(self.coeff[role])
        out.append(self.w_self)
        if self.input_proj is not None:
            out.extend(self.input_proj)
        return out

    def projection(self, role: str, r: int) -> Tensor:
        """The (d_att, d_in) projection for one role and relation.

        Under basis decomposition this materializes the matrix through tape
        ops so gradients reach the basis stack and the coefficients.
        """
        if self.num_bases == 0:
            return getattr(self, f"w_{role}")[r]
        coeff = dn.reshape(self.coeff[role][r], (self.num_bases, 1, 1))
        return dn.tsum(dn.mul(self.basis, coeff), axis=0)


@dataclass
class AttentionTrace:
    """Recorded attention weights from one forward pass.

    ``gamma[(i, r)]`` holds the neighbor weights of node i under relation r,
    ordered like ``graph.neighbors(i, r)``.  ``psi[i]`` is the
    |R_i| x |R_i| relation-attention matrix whose row/column order is
    ``rel_order[i]``.  Values are detached copies.
    """

    gamma: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    psi: dict[int, np.ndarray] = field(default_factory=dict)
    rel_order: dict[int, tuple[int, ...]] = field(default_factory=dict)


class _LayerMats:
    """Per-forward materialization of everything reused across nodes."""

    __slots__ = ("a_head", "a_tail", "w_query", "w_key", "w_value", "w_self", "input_proj")

    def __init__(self, params: BrgcnLayerParams):
        d = params.d_in
        head_idx = np.arange(d)
        tail_idx = np.arange(d, 2 * d)
        self.a_head = [dn.take(a, head_idx) for a in params.a]
        self.a_tail = [dn.take(a, tail_idx) for a in params.a]
        self.w_query = [params.projection("query", r) for r in range(params.num_relations)]
        self.w_key = [params.projection("key", r) for r in range(params.num_relations)]
        self.w_value = [params.projection("value", r) for r in range(params.num_relations)]
        self.w_self = params.w_self
        self.input_proj = params.input_proj


class _RelationEdges:
    """Edge arrays of one relation, grouped by head node in id order."""

    __slots__ = ("heads", "tails", "segments", "group_nodes", "group_of", "offsets")

    def __init__(self, graph: HeteroGraph, r: int):
        heads: list[int] = []
        tails: list[int] = []
        segments: list[int] = []
        group_nodes: list[int] = []
        offsets = [0]
        for i in range(graph.num_nodes):
            nbrs = graph.neighbor_index.get((i, r))
            if not nbrs:
                continue
            gidx = len(group_nodes)
            group_nodes.append(i)
            heads.extend([i] * len(nbrs))
            tails.extend(nbrs)
            segments.extend([gidx] * len(nbrs))
            offsets.append(offsets[-1] + len(nbrs))
        self.heads = np.asarray(heads, dtype=np.intp)
        self.tails = np.asarray(tails, dtype=np.intp)
        self.segments = np.asarray(segments, dtype=np.intp)
        self.group_nodes = group_nodes
        self.group_of = {node: g for g, node in enumerate(group_nodes)}
        self.offsets = offsets

    @property
    def num_groups(self) -> int:
        return len(self.group_nodes)


def node_attention(
    params: BrgcnLayerParams,
    h: Tensor,
    graph: HeteroGraph,
    i: int,
    r: int,
    *,
    mats: _LayerMats | None = None,
    uniform: bool = False,
    gamma_mask: np.ndarray | None = None,
) -> tuple[Tensor, Tensor]:
    """Attention weights and relation-specific embedding for node ``i`` under ``r``.

    Requires a non-empty neighborhood; callers iterate relations of
    ``graph.relations_of(i)`` only.  With ``uniform=True`` the learned
    weights are replaced by the constant 1/|N_i^r| (the relation-only
    variant).  ``gamma_mask`` applies training-time dropout to the weights
    after the softmax (inverted scaling baked into the mask).
    """
    nbrs = graph.neighbors(i, r)
    if not nbrs:
        raise PreconditionError(f"node {i} has no neighbors under relation {r}")
    if mats is None:
        mats = _LayerMats(params)
    h_nbr = dn.take(h, np.asarray(nbrs))
    if uniform:
        gamma = Tensor(np.full(len(nbrs), 1.0 / len(nbrs)))
    else:
        h_i = dn.take(h, np.asarray([i]))
        base = dn.matmul(h_i, mats.a_head[r])  # (1,)
        logits = dn.add(dn.matmul(h_nbr, mats.a_tail[r]), base)
        gamma = dn.softmax(dn.leaky_relu(logits, params.leaky_slope))
    weights = gamma if gamma_mask is None else dn.mul(gamma, Tensor(gamma_mask))
    if mats.input_proj is not None:
        h_nbr = dn.matmul(h_nbr, dn.transpose(mats.input_proj[r]))
    z = dn.matmul(weights, h_nbr)
    return gamma, z


def relation_attention(
    params: BrgcnLayerParams,
    z_by_rel: dict[int, Tensor],
    h_i: Tensor,
    *,
    mats: _LayerMats | None = None,
) -> tuple[Tensor, Tensor]:
    """Fuse relation-specific embeddings into the next-layer feature of one node.

    Returns the |R_i| x |R_i| attention matrix (rows are distributions over
    the incident relations, ordered by ascending relation id) and the fused
    output vector.
    """
    if not z_by_rel:
        raise PreconditionError("relation_attention requires at least one relation")
    if mats is None:
        mats = _LayerMats(params)
    if h_i.shape != (params.d_in,):
        raise ConfigurationError(f"h_i must have shape ({params.d_in},), got {h_i.shape}")
    rels = sorted(z_by_rel)
    queries = [dn.matmul(mats.w_query[r], z_by_rel[r]) for r in rels]
    keys = dn.stack([dn.matmul(mats.w_key[r], z_by_rel[r]) for r in rels])
    values = dn.stack([dn.matmul(mats.w_value[r], z_by_rel[r]) for r in rels])
    self_term = dn.matmul(mats.w_self, h_i)
    psi_rows = []
    out = None
    for q in queries:
        row = dn.softmax(dn.matmul(keys, q))
        psi_rows.append(row)
        delta = dn.relu(dn.add(dn.matmul(row, values), self_term))
        out = delta if out is None else dn.add(out, delta)
    return dn.stack(psi_rows), out


def layer_forward(
    params: BrgcnLayerParams,
    h: Tensor,
    graph: HeteroGraph,
    *,
    mode: str = "full",
    training: bool = False,
    rng: np.random.Generator | None = None,
    collect_trace: bool = True,
) -> tuple[Tensor, AttentionTrace]:
    """Apply one layer to every node; see the module docstring for the math.

    The result depends only on the graph's edge set, not on triple storage
    order or node iteration order.  During training, dropout (when
    configured) is applied to the input features and to the post-softmax
    neighbor weights with inverted scaling; evaluation passes are
    deterministic.
    """
    if mode not in VARIANTS:
        raise ConfigurationError(f"unknown variant {mode!r}; expected one of {VARIANTS}")
    if h.ndim != 2 or h.shape[0] != graph.num_nodes:
        raise dn.DimensionError(
            f"feature matrix has shape {h.shape}, expected ({graph.num_nodes}, d_in)"
        )
    if h.shape[1] != params.d_in:
        raise ConfigurationError(f"layer expects d_in={params.d_in}, features have {h.shape[1]}")
    if graph.num_relations > params.num_relations:
        raise ConfigurationError(
            f"layer sized for {params.num_relations} relations, graph has {graph.num_relations}"
        )
    if mode == "node_only" and params.d_in != params.d_out:
        raise ConfigurationError(
            "node_only fuses unprojected neighbor summaries, so d_in must equal d_out"
        )

    use_dropout = training and params.dropout > 0.0
    if use_dropout and rng is None:
        raise ConfigurationError("training with dropout requires an rng")
    keep = 1.0 - params.dropout
    if use_dropout:
        fmask = (rng.random(h.shape) < keep) / keep
        h = dn.mul(h, Tensor(fmask))

    mats = _LayerMats(params)
    trace = AttentionTrace()
    uniform_gamma = mode in ("relation_only", "rgcn_baseline")

    # Node-level attention, batched over all edges of each relation.  The
    # per-relation summaries are stacked into one (sum of groups, dim)
    # matrix per role; row_index[i] gathers node i's rows across its
    # incident relations.  Definitions match node_attention row for row.
    edges: dict[int, _RelationEdges] = {}
    z_parts: list[Tensor] = []
    offsets: dict[int, int] = {}
    total_groups = 0
    for r in range(graph.num_relations):
        block = _RelationEdges(graph, r)
        if not block.num_groups:
            continue
        edges[r] = block
        offsets[r] = total_groups
        total_groups += block.num_groups
        if uniform_gamma:
            degrees = np.diff(block.offsets)
            gamma = Tensor(1.0 / np.repeat(degrees, degrees))
        else:
            s_head = dn.matmul(h, mats.a_head[r])
            s_tail = dn.matmul(h, mats.a_tail[r])
            logits = dn.add(dn.take(s_head, block.heads), dn.take(s_tail, block.tails))
            gamma = dn.segment_softmax(
                dn.leaky_relu(logits, params.leaky_slope), block.segments, block.num_groups
            )
        if collect_trace and mode != "rgcn_baseline":
            for g, node in enumerate(block.group_nodes):
                trace.gamma[(node, r)] = gamma.data[block.offsets[g] : block.offsets[g + 1]].copy()
        weights = gamma
        if use_dropout and not uniform_gamma:
            gmask = (rng.random(len(block.tails)) < keep) / keep
            weights = dn.mul(gamma, Tensor(gmask))
        h_agg = h if mats.input_proj is None else dn.matmul(h, dn.transpose(mats.input_proj[r]))
        weighted = dn.mul(dn.reshape(weights, (-1, 1)), dn.take(h_agg, block.tails))
        z_parts.append(dn.segment_sum(weighted, block.segments, block.num_groups))

    row_index: dict[int, np.ndarray] = {}
    for i in range(graph.num_nodes):
        rels = graph.relations_of(i)
        if rels:
            row_index[i] = np.asarray([offsets[r] + edges[r].group_of[i] for r in rels])

    zero_row = Tensor(np.zeros(params.d_out))
    rows: list[Tensor] = []
    self_rows = dn.matmul(h, dn.transpose(mats.w_self))  # (N, d_out)
    if edges:
        rel_list = sorted(edges)
        if mode in ("full", "relation_only"):
            q_all = _per_relation_project(z_parts, rel_list, mats.w_query)
            k_all = _per_relation_project(z_parts, rel_list, mats.w_key)
            v_all = _per_relation_project(z_parts, rel_list, mats.w_value)
        elif mode == "rgcn_baseline":
            msg_all = _per_relation_project(z_parts, rel_list, mats.w_value)
        else:
            z_all = dn.concat(z_parts) if len(z_parts) > 1 else z_parts[0]

    for i in range(graph.num_nodes):
        rels = graph.relations_of(i)
        if not rels:
            rows.append(zero_row)
            continue
        idx = row_index[i]
        self_row = dn.take(self_rows, np.asarray([i]))

        if mode == "rgcn_baseline":
            total = dn.add(
                dn.tsum(dn.take(msg_all, idx), axis=0), dn.reshape(self_row, (params.d_out,))
            )
            rows.append(dn.relu(total))
            continue
        if mode == "node_only":
            zsum = dn.tsum(dn.take(z_all, idx), axis=0)
            rows.append(dn.add(zsum, dn.reshape(dn.relu(self_row), (params.d_out,))))
            continue

        qs = dn.take(q_all, idx)
        ks = dn.take(k_all, idx)
        vs = dn.take(v_all, idx)
        psi = dn.softmax_rows(dn.matmul(qs, dn.transpose(ks)))
        delta = dn.relu(dn.add(dn.matmul(psi, vs), self_row))
        rows.append(dn.tsum(delta, axis=0))
        if collect_trace:
            trace.psi[i] = psi.data.copy()
            trace.rel_order[i] = tuple(rels)

    return dn.stack(rows), trace


def _per_relation_project(
    z_parts: list[Tensor], rel_list: list[int], mats: list[Tensor]
) -> Tensor:
    """Project each relation's summary block and stack the results vertically."""
    parts = [
        dn.matmul(z, dn.transpose(mats[r])) for z, r in zip(z_parts, rel_list)
    ]
    return dn.concat(parts) if len(parts) > 1 else parts[0]


def variant_forward(
    mode: str,
    params: BrgcnLayerParams,
    h: Tensor,
    graph: HeteroGraph,
    *,
    training: bool = False,
    rng: np.random.Generator | None = None,
    collect_trace: bool = True,
) -> tuple[Tensor, AttentionTrace]:
    """Layer forward under one of the model variants.

    ``full`` is the bi-level layer; ``node_only`` drops relation attention
    (unweighted sum of the z summaries plus ReLU(W_self h_i) added once);
    ``relation_only`` replaces neighbor attention by uniform weights;
    ``rgcn_baseline`` is the mean-aggregation relational convolution
    ReLU(sum_r W_r mean_j h_j + W_self h_i) with W_r taken from the value
    projections.
    """
    return layer_forward(
        params, h, graph, mode=mode, training=training, rng=rng, collect_trace=collect_trace
    )


def stack_forward(
    layers: Sequence[BrgcnLayerParams],
    x0: Tensor | None,
    graph: HeteroGraph,
    *,
    mode: str = "full",
    training: bool = False,
    rng: np.random.Generator | None = None,
    collect_trace: bool = True,
) -> tuple[Tensor, list[AttentionTrace]]:
    """Sequential composition of layers; defaults to one-hot input features.

    When ``x0`` is None the input is the identity matrix, giving every node
    a unique one-hot feature vector.
    """
    if not layers:
        raise ConfigurationError("stack_forward requires at least one layer")
    for a, b in zip(layers, layers[1:]):
        if a.d_out != b.d_in:
            raise ConfigurationError(
                f"layer dim chain mismatch: d_out={a.d_out} feeds d_in={b.d_in}"
            )
    h = x0 if x0 is not None else Tensor(np.eye(graph.num_nodes))
    traces = []
    for lay in layers:
        h, tr = layer_forward(
            lay, h, graph, mode=mode, training=training, rng=rng, collect_trace=collect_trace
        )
        traces.append(tr)
    return h, traces
