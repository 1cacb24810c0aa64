"""Latent-rationale architectures built on hard Kumaraswamy gates.

An extractor embeds the tokens, runs a bidirectional encoder, and emits a
per-position shape pair (a_i, b_i) through softplus heads; one gate per
position is then drawn by the reparameterized transform, so gradients reach
the extractor through the sampled gate values.  A classifier with separate
parameters reads the gate-modulated embeddings and predicts the label.  The
dependent extractor additionally threads a recurrent state through the
sampled prefix so step i's shapes condition on z_<i.

The attention variant replaces normalized attention between two sequences
with one hard Kumaraswamy gate per premise/hypothesis token pair; the
resulting matrix is sparse-by-sampling and needs no normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Tensor, _as_array
from . import distribution as dist
from .distribution import KumaParams, StretchBounds

#: softplus(x) = 1  =>  x = log(e - 1); biases of the shape heads start here
#: so the initial gate distribution sits near (a, b) = (1, 1).
SHAPE_HEAD_BIAS = float(np.log(np.e - 1.0))


class Parameters:
    """Ordered, named store of trainable float64 arrays."""

    def __init__(self):
        self._arrays: dict[str, np.ndarray] = {}

    def add(self, name: str, array) -> str:
        if name in self._arrays:
            raise ValueError(f"duplicate parameter {name!r}")
        self._arrays[name] = _as_array(array)
        return name

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value) -> None:
        if name not in self._arrays:
            raise KeyError(name)
        self._arrays[name] = _as_array(value)

    @property
    def arrays(self) -> dict[str, np.ndarray]:
        return self._arrays

    def copy_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self._arrays.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        have, want = set(self._arrays), set(arrays)
        if have != want:
            raise ValueError(f"parameter names differ: missing {sorted(have - want)},"
                             f" unexpected {sorted(want - have)}")
        bad = [f"{k}: expected {self._arrays[k].shape}, got {np.shape(arrays[k])}"
               for k in self._arrays if self._arrays[k].shape != np.shape(arrays[k])]
        if bad:
            raise ValueError("parameter shape mismatch: " + "; ".join(bad))
        for k, v in arrays.items():
            self._arrays[k] = _as_array(v)

    def bind(self, graph: Graph, trainable: bool = True) -> dict[str, Tensor]:
        if trainable:
            return {k: graph.parameter(k, v) for k, v in self._arrays.items()}
        return {k: graph.constant(v, name=k) for k, v in self._arrays.items()}


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with the bias row explicitly expanded over the batch."""
    y = ad.matmul(x, w)
    bias = ad.expand(ad.reshape(b, (1, y.shape[1])), y.shape)
    return y + bias


class SimpleCell:
    """Plain tanh recurrence; the smallest useful encoder cell."""

    def __init__(self, params: Parameters, prefix: str, input_dim: int,
                 hidden_dim: int, rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        self.w = params.add(f"{prefix}.w", _uniform(rng, (input_dim, hidden_dim), input_dim))
        self.u = params.add(f"{prefix}.u", _uniform(rng, (hidden_dim, hidden_dim), hidden_dim))
        self.b = params.add(f"{prefix}.b", np.zeros(hidden_dim))

    def initial(self, graph: Graph, batch: int) -> tuple:
        return (graph.constant(np.zeros((batch, self.hidden_dim))),)

    def step(self, bound: dict, x_t: Tensor, state: tuple) -> tuple:
        (h_prev,) = state
        pre = ad.matmul(x_t, bound[self.w]) + ad.matmul(h_prev, bound[self.u])
        return (ad.tanh(affine_bias(pre, bound[self.b])),)


class LstmCell:
    """Standard LSTM with fused input/forget/cell/output projections."""

    def __init__(self, params, prefix, input_dim, hidden_dim, rng):
        self.hidden_dim = hidden_dim
        self.w = params.add(f"{prefix}.w", _uniform(rng, (input_dim, 4 * hidden_dim), input_dim))
        self.u = params.add(f"{prefix}.u", _uniform(rng, (hidden_dim, 4 * hidden_dim), hidden_dim))
        self.b = params.add(f"{prefix}.b", np.zeros(4 * hidden_dim))

    def initial(self, graph, batch):
        z = np.zeros((batch, self.hidden_dim))
        return (graph.constant(z), graph.constant(z))

    def step(self, bound, x_t, state):
        c_prev, h_prev = state
        hd = self.hidden_dim
        pre = affine_bias(ad.matmul(x_t, bound[self.w])
                          + ad.matmul(h_prev, bound[self.u]), bound[self.b])
        i = ad.sigmoid(ad.narrow(pre, 1, 0, hd))
        f = ad.sigmoid(ad.narrow(pre, 1, hd, hd))
        g = ad.tanh(ad.narrow(pre, 1, 2 * hd, hd))
        o = ad.sigmoid(ad.narrow(pre, 1, 3 * hd, hd))
        c = f * c_prev + i * g
        return (c, o * ad.tanh(c))


class RcnnCell:
    """Two-cell gated recurrence capturing possibly non-consecutive bigrams.

    lambda_t = sigmoid(W_l x_t + U_l h_{t-1} + b_l)
    c1_t = lambda_t * c1_{t-1} + (1 - lambda_t) * (W1 x_t)
    c2_t = lambda_t * c2_{t-1} + (1 - lambda_t) * (c1_{t-1} + W2 x_t)
    h_t  = tanh(c2_t + b)
    """

    def __init__(self, params, prefix, input_dim, hidden_dim, rng):
        self.hidden_dim = hidden_dim
        self.wl = params.add(f"{prefix}.wl", _uniform(rng, (input_dim, hidden_dim), input_dim))
        self.ul = params.add(f"{prefix}.ul", _uniform(rng, (hidden_dim, hidden_dim), hidden_dim))
        self.bl = params.add(f"{prefix}.bl", np.zeros(hidden_dim))
        self.w1 = params.add(f"{prefix}.w1", _uniform(rng, (input_dim, hidden_dim), input_dim))
        self.w2 = params.add(f"{prefix}.w2", _uniform(rng, (input_dim, hidden_dim), input_dim))
        self.b = params.add(f"{prefix}.b", np.zeros(hidden_dim))

    def initial(self, graph, batch):
        z = np.zeros((batch, self.hidden_dim))
        return (graph.constant(z), graph.constant(z), graph.constant(z))

    def step(self, bound, x_t, state):
        c1_prev, c2_prev, _ = state
        lam = ad.sigmoid(affine_bias(
            ad.matmul(x_t, bound[self.wl]) + ad.matmul(state[2], bound[self.ul]),
            bound[self.bl]))
        c1 = lam * c1_prev + (1.0 - lam) * ad.matmul(x_t, bound[self.w1])
        c2 = lam * c2_prev + (1.0 - lam) * (c1_prev + ad.matmul(x_t, bound[self.w2]))
        h = ad.tanh(affine_bias(c2, bound[self.b]))
        return (c1, c2, h)


CELLS = {"simple": SimpleCell, "lstm": LstmCell, "rcnn": RcnnCell}


def affine_bias(x: Tensor, b: Tensor) -> Tensor:
    bias = ad.expand(ad.reshape(b, (1, x.shape[1])), x.shape)
    return x + bias


def split_time(e: Tensor) -> list[Tensor]:
    """[B, T, E] -> T tensors of shape [B, E]."""
    batch, steps, width = e.shape
    return [ad.reshape(ad.narrow(e, 1, t, 1), (batch, width))
            for t in range(steps)]


def stack_time(hs: list[Tensor]) -> Tensor:
    """T tensors of shape [B, H] -> [B, T, H]."""
    batch, width = hs[0].shape
    return ad.concat([ad.reshape(h, (batch, 1, width)) for h in hs], axis=1)


def run_birnn(bound, fwd_cell, bwd_cell, xs: list[Tensor]):
    """Per-position concatenated forward/backward states plus final states."""
    graph = xs[0].graph
    batch = xs[0].shape[0]
    state = fwd_cell.initial(graph, batch)
    fwd = []
    for x_t in xs:
        state = fwd_cell.step(bound, x_t, state)
        fwd.append(state[-1])
    state = bwd_cell.initial(graph, batch)
    bwd = [None] * len(xs)
    for t in range(len(xs) - 1, -1, -1):
        state = bwd_cell.step(bound, xs[t], state)
        bwd[t] = state[-1]
    per_pos = [ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
    return per_pos, fwd[-1], bwd[0]


@dataclass
class ModelConfig:
    vocab_size: int
    num_classes: int
    embed_dim: int = 32
    hidden_dim: int = 32
    dep_state_dim: int = 16
    cell: str = "simple"
    bounds: StretchBounds = StretchBounds()
    use_raw_mean_gate: bool = False


@dataclass
class ExtractResult:
    gates: Tensor
    a: Tensor
    b: Tensor
    probs_zero: Tensor
    stretched: Tensor


class IndependentExtractor:
    """Per-position gates whose shapes depend on the input sequence only."""

    def __init__(self, params: Parameters, prefix: str, config: ModelConfig,
                 rng: np.random.Generator):
        self.config = config
        cell_cls = CELLS[config.cell]
        self.emb = params.add(f"{prefix}.emb",
                              _uniform(rng, (config.vocab_size, config.embed_dim),
                                       config.embed_dim))
        self.fwd = cell_cls(params, f"{prefix}.fwd", config.embed_dim,
                            config.hidden_dim, rng)
        self.bwd = cell_cls(params, f"{prefix}.bwd", config.embed_dim,
                            config.hidden_dim, rng)
        enc = 2 * config.hidden_dim
        self.wa = params.add(f"{prefix}.wa", _uniform(rng, (enc, 1), enc))
        self.ba = params.add(f"{prefix}.ba", np.full(1, SHAPE_HEAD_BIAS))
        self.wb = params.add(f"{prefix}.wb", _uniform(rng, (enc, 1), enc))
        self.bb = params.add(f"{prefix}.bb", np.full(1, SHAPE_HEAD_BIAS))

    def shape_params(self, graph, bound, tokens) -> tuple[Tensor, Tensor]:
        tokens = np.asarray(tokens, dtype=np.int64)
        batch, steps = tokens.shape
        e = ad.embedding(bound[self.emb], tokens)
        per_pos, _, _ = run_birnn(bound, self.fwd, self.bwd, split_time(e))
        flat = ad.reshape(stack_time(per_pos), (batch * steps, 2 * self.config.hidden_dim))
        a = ad.reshape(ad.softplus(affine(flat, bound[self.wa], bound[self.ba])),
                       (batch, steps))
        b = ad.reshape(ad.softplus(affine(flat, bound[self.wb], bound[self.bb])),
                       (batch, steps))
        return a, b

    def forward(self, graph, bound, tokens, u) -> ExtractResult:
        a, b = self.shape_params(graph, bound, tokens)
        smp = dist.sample_node(u, a, b, self.config.bounds)
        p0 = dist.prob_zero_node(a, b, self.config.bounds)
        return ExtractResult(gates=smp.h, a=a, b=b, probs_zero=p0,
                             stretched=smp.t)

    def deterministic_gates(self, graph, bound, tokens) -> np.ndarray:
        a, b = self.shape_params(graph, bound, tokens)
        return dist.deterministic_gate(KumaParams(a.data, b.data),
                                       self.config.bounds,
                                       raw_mean=self.config.use_raw_mean_gate)


class DependentExtractor:
    """Gates whose shapes condition on the already-sampled prefix z_<i.

    A small recurrence s_i = tanh(W_h h_i + W_z z_i + U s_{i-1} + b) carries
    the prefix; the shape heads read [h_i; s_{i-1}] through separate weight
    blocks so zeroing the prefix block reduces exactly to the independent
    extractor.
    """

    def __init__(self, params: Parameters, prefix: str, config: ModelConfig,
                 rng: np.random.Generator):
        self.config = config
        cell_cls = CELLS[config.cell]
        self.emb = params.add(f"{prefix}.emb",
                              _uniform(rng, (config.vocab_size, config.embed_dim),
                                       config.embed_dim))
        self.fwd = cell_cls(params, f"{prefix}.fwd", config.embed_dim,
                            config.hidden_dim, rng)
        self.bwd = cell_cls(params, f"{prefix}.bwd", config.embed_dim,
                            config.hidden_dim, rng)
        enc = 2 * config.hidden_dim
        sd = config.dep_state_dim
        self.wa = params.add(f"{prefix}.wa", _uniform(rng, (enc, 1), enc))
        self.was = params.add(f"{prefix}.was", _uniform(rng, (sd, 1), sd))
        self.ba = params.add(f"{prefix}.ba", np.full(1, SHAPE_HEAD_BIAS))
        self.wb = params.add(f"{prefix}.wb", _uniform(rng, (enc, 1), enc))
        self.wbs = params.add(f"{prefix}.wbs", _uniform(rng, (sd, 1), sd))
        self.bb = params.add(f"{prefix}.bb", np.full(1, SHAPE_HEAD_BIAS))
        self.wsh = params.add(f"{prefix}.wsh", _uniform(rng, (enc, sd), enc))
        self.wsz = params.add(f"{prefix}.wsz", _uniform(rng, (1, sd), 1))
        self.us = params.add(f"{prefix}.us", _uniform(rng, (sd, sd), sd))
        self.bs = params.add(f"{prefix}.bs", np.zeros(sd))

    def forward(self, graph, bound, tokens, u=None, given_gates=None,
                deterministic=False) -> ExtractResult:
        tokens = np.asarray(tokens, dtype=np.int64)
        batch, steps = tokens.shape
        e = ad.embedding(bound[self.emb], tokens)
        per_pos, _, _ = run_birnn(bound, self.fwd, self.bwd, split_time(e))
        s = graph.constant(np.zeros((batch, self.config.dep_state_dim)))
        gates, a_cols, b_cols, p0_cols = [], [], [], []
        t_cols = []
        for i, h_i in enumerate(per_pos):
            a_pre = (ad.matmul(h_i, bound[self.wa])
                     + ad.matmul(s, bound[self.was]))
            b_pre = (ad.matmul(h_i, bound[self.wb])
                     + ad.matmul(s, bound[self.wbs]))
            a_i = ad.softplus(affine_bias(a_pre, bound[self.ba]))
            b_i = ad.softplus(affine_bias(b_pre, bound[self.bb]))
            if given_gates is not None:
                z_i = graph.constant(np.asarray(given_gates)[:, i:i + 1])
                t_i = z_i
            elif deterministic:
                det = dist.deterministic_gate(
                    KumaParams(a_i.data, b_i.data), self.config.bounds,
                    raw_mean=self.config.use_raw_mean_gate)
                z_i = graph.constant(det)
                t_i = z_i
            else:
                smp = dist.sample_node(u[:, i:i + 1], a_i, b_i,
                                       self.config.bounds)
                z_i, t_i = smp.h, smp.t
            p0_cols.append(dist.prob_zero_node(a_i, b_i, self.config.bounds))
            s = ad.tanh(affine_bias(
                ad.matmul(h_i, bound[self.wsh]) + ad.matmul(z_i, bound[self.wsz])
                + ad.matmul(s, bound[self.us]), bound[self.bs]))
            gates.append(z_i)
            a_cols.append(a_i)
            b_cols.append(b_i)
            t_cols.append(t_i)
        return ExtractResult(gates=ad.concat(gates, axis=1),
                             a=ad.concat(a_cols, axis=1),
                             b=ad.concat(b_cols, axis=1),
                             probs_zero=ad.concat(p0_cols, axis=1),
                             stretched=ad.concat(t_cols, axis=1))

    def shapes_for_prefix(self, params: Parameters, tokens,
                          prefix_gates) -> tuple[float, float]:
        """(a_i, b_i) that step i = len(prefix) would see, for one example.

        Used by enumeration oracles that integrate over prefix branches.
        """
        tokens = np.asarray(tokens, dtype=np.int64).reshape(1, -1)
        i = len(prefix_gates)
        graph = Graph()
        bound = params.bind(graph, trainable=False)
        filled = np.zeros((1, tokens.shape[1]))
        filled[0, :i] = prefix_gates
        res = self.forward(graph, bound, tokens, given_gates=filled)
        return float(res.a.data[0, i]), float(res.b.data[0, i])


class GatedClassifier:
    """Bidirectional reader of gate-modulated embeddings."""

    def __init__(self, params: Parameters, prefix: str, config: ModelConfig,
                 rng: np.random.Generator):
        self.config = config
        cell_cls = CELLS[config.cell]
        self.emb = params.add(f"{prefix}.emb",
                              _uniform(rng, (config.vocab_size, config.embed_dim),
                                       config.embed_dim))
        self.fwd = cell_cls(params, f"{prefix}.fwd", config.embed_dim,
                            config.hidden_dim, rng)
        self.bwd = cell_cls(params, f"{prefix}.bwd", config.embed_dim,
                            config.hidden_dim, rng)
        enc = 2 * config.hidden_dim
        self.wo = params.add(f"{prefix}.wo",
                             _uniform(rng, (enc, config.num_classes), enc))
        self.bo = params.add(f"{prefix}.bo", np.zeros(config.num_classes))

    def forward(self, graph, bound, tokens, gates: Tensor) -> Tensor:
        tokens = np.asarray(tokens, dtype=np.int64)
        batch, steps = tokens.shape
        if gates.shape != (batch, steps):
            raise ad.ShapeError(f"classify: gates {gates.shape} vs tokens "
                                f"{(batch, steps)}")
        e = ad.embedding(bound[self.emb], tokens)
        z3 = ad.expand(ad.reshape(gates, (batch, steps, 1)), e.shape)
        xs = split_time(z3 * e)
        graphless, h_fwd, h_bwd = run_birnn(bound, self.fwd, self.bwd, xs)
        final = ad.concat([h_fwd, h_bwd], axis=1)
        return affine(final, bound[self.wo], bound[self.bo])


def elbo_loss(logits: Tensor, labels) -> Tensor:
    """One-sample bound on -log P(gold | x, z), averaged over the batch.

    Computed as cross-entropy on logits so a vanishing gold probability
    stays finite through the log-sum-exp formulation.
    """
    return ad.mean(ad.cross_entropy_with_logits(logits, labels))


class RationaleModel:
    """Extractor plus classifier with separate embeddings and parameters."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator,
                 dependent: bool = False):
        self.config = config
        self.dependent = dependent
        self.params = Parameters()
        ext_cls = DependentExtractor if dependent else IndependentExtractor
        self.extractor = ext_cls(self.params, "extractor", config, rng)
        self.classifier = GatedClassifier(self.params, "classifier", config, rng)

    def loss_graph(self, tokens, labels, u, freeze_open: bool = False):
        """Training-mode forward pass: sampled gates, one draw per position.

        Returns (graph, task_loss, extract_result_or_None, logits).
        """
        graph = Graph()
        bound = self.params.bind(graph)
        tokens = np.asarray(tokens, dtype=np.int64)
        if freeze_open:
            gates = graph.constant(np.ones(tokens.shape))
            ext = None
        else:
            if self.dependent:
                ext = self.extractor.forward(graph, bound, tokens, u=u)
            else:
                ext = self.extractor.forward(graph, bound, tokens, u)
            gates = ext.gates
        logits = self.classifier.forward(graph, bound, tokens, gates)
        return graph, elbo_loss(logits, labels), ext, logits

    def eval_batch(self, tokens, freeze_open: bool = False):
        """Deterministic-mode forward pass: most-likely gates, no sampling.

        Returns (class_probs, gates) as plain arrays.
        """
        graph = Graph(check_finite=True)
        bound = self.params.bind(graph, trainable=False)
        tokens = np.asarray(tokens, dtype=np.int64)
        if freeze_open:
            det = np.ones(tokens.shape)
        elif self.dependent:
            det = self.extractor.forward(graph, bound, tokens,
                                         deterministic=True).gates.data
        else:
            det = self.extractor.deterministic_gates(graph, bound, tokens)
        logits = self.classifier.forward(graph, bound, tokens,
                                         graph.constant(det))
        probs = ad.softmax(logits, axis=-1)
        return probs.data, det


class AttentionMatcher:
    """Premise/hypothesis matcher with one hard gate per token pair.

    A bilinear scoring head maps each state pair to (a_ij, b_ij) through
    softplus; sampled gates weight the elementwise comparison vectors, whose
    mean feeds a small classifier.  The gate matrix needs no normalization,
    and the mean per-cell nonzero probability is the handle the rate
    controller pulls on.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        p = self.params = Parameters()
        e, h = config.embed_dim, config.hidden_dim
        self.emb = p.add("emb", _uniform(rng, (config.vocab_size, e), e))
        self.wp = p.add("wp", _uniform(rng, (e, h), e))
        self.bp = p.add("bp", np.zeros(h))
        self.wh = p.add("wh", _uniform(rng, (e, h), e))
        self.bh = p.add("bh", np.zeros(h))
        self.bil_a = p.add("bil_a", _uniform(rng, (h, h), h))
        self.bias_a = p.add("bias_a", np.full((), SHAPE_HEAD_BIAS))
        self.bil_b = p.add("bil_b", _uniform(rng, (h, h), h))
        self.bias_b = p.add("bias_b", np.full((), SHAPE_HEAD_BIAS))
        self.w1 = p.add("w1", _uniform(rng, (h, h), h))
        self.b1 = p.add("b1", np.zeros(h))
        self.w2 = p.add("w2", _uniform(rng, (h, config.num_classes), h))
        self.b2 = p.add("b2", np.zeros(config.num_classes))

    def _states(self, bound, ids, w, b):
        ids = np.asarray(ids, dtype=np.int64)
        batch, steps = ids.shape
        e = ad.embedding(bound[self.emb], ids)
        flat = ad.reshape(e, (batch * steps, self.config.embed_dim))
        proj = ad.tanh(affine(flat, bound[w], bound[b]))
        return ad.reshape(proj, (batch, steps, self.config.hidden_dim))

    def _cell_shapes(self, bound, prem_states, hyp_states):
        batch, m, h = prem_states.shape
        n = hyp_states.shape[1]
        hyp_t = ad.transpose(hyp_states, (0, 2, 1))

        def head(bilinear, bias):
            flat = ad.reshape(prem_states, (batch * m, h))
            mixed = ad.reshape(ad.matmul(flat, bound[bilinear]), (batch, m, h))
            return ad.softplus(ad.matmul(mixed, hyp_t) + bound[bias])

        return head(self.bil_a, self.bias_a), head(self.bil_b, self.bias_b)

    def forward(self, premises, hypotheses, u=None, trainable=True):
        """Gate matrix plus logits; u=None switches to deterministic gates."""
        if np.size(premises) == 0 or np.size(hypotheses) == 0:
            raise ad.ShapeError("attention: empty premise or hypothesis")
        graph = Graph()
        bound = self.params.bind(graph, trainable=trainable)
        prem = self._states(bound, premises, self.wp, self.bp)
        hyp = self._states(bound, hypotheses, self.wh, self.bh)
        a, b = self._cell_shapes(bound, prem, hyp)
        if u is None:
            z = graph.constant(dist.deterministic_gate(
                KumaParams(a.data, b.data), self.config.bounds,
                raw_mean=self.config.use_raw_mean_gate))
            stretched = z
        else:
            smp = dist.sample_node(u, a, b, self.config.bounds)
            z, stretched = smp.h, smp.t
        p0 = dist.prob_zero_node(a, b, self.config.bounds)
        batch, m, h = prem.shape
        n = hyp.shape[1]
        mixed = ad.matmul(ad.transpose(prem, (0, 2, 1)), z)
        compared = mixed * ad.transpose(hyp, (0, 2, 1))
        pooled = ad.sum_(compared, axis=2) * (1.0 / (m * n))
        hidden = ad.tanh(affine(pooled, bound[self.w1], bound[self.b1]))
        logits = affine(hidden, bound[self.w2], bound[self.b2])
        return graph, logits, z, p0, stretched


class BagOfEmbeddingsMatcher:
    """Gate-free baseline: mean embeddings of both sides into a small MLP."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        p = self.params = Parameters()
        e, h = config.embed_dim, config.hidden_dim
        self.emb = p.add("emb", _uniform(rng, (config.vocab_size, e), e))
        self.w1 = p.add("w1", _uniform(rng, (2 * e, h), 2 * e))
        self.b1 = p.add("b1", np.zeros(h))
        self.w2 = p.add("w2", _uniform(rng, (h, config.num_classes), h))
        self.b2 = p.add("b2", np.zeros(config.num_classes))

    def forward(self, premises, hypotheses, trainable=True):
        graph = Graph()
        bound = self.params.bind(graph, trainable=trainable)
        ep = ad.mean(ad.embedding(bound[self.emb],
                                  np.asarray(premises, dtype=np.int64)), axis=1)
        eh = ad.mean(ad.embedding(bound[self.emb],
                                  np.asarray(hypotheses, dtype=np.int64)), axis=1)
        hidden = ad.tanh(affine(ad.concat([ep, eh], axis=1),
                                bound[self.w1], bound[self.b1]))
        return graph, affine(hidden, bound[self.w2], bound[self.b2])
