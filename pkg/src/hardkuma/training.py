"""Training orchestration: configs, optimizers, loops, metrics, checkpoints.

One training step samples a single gate vector per example (one uniform per
position), descends on the penalized task loss, then ascends the Lagrangian
multipliers on the smoothed gap between the observed expected penalties and
their targets.  Evaluation switches to deterministic gates.  Runs are fully
deterministic given the seed: single-threaded, one RNG stream, stable batch
construction.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import corpus as corpus_mod
from . import distribution as dist
from . import models, penalties
from .corpus import CorpusSpec, PairSpec
from .distribution import StretchBounds
from .models import ModelConfig
from .penalties import LagrangianState


class DivergenceError(RuntimeError):
    """Training produced non-finite values; carries the failing step."""


MODEL_CHOICES = ("independent", "dependent", "attention", "attention-bag")

METRICS_FIELDS = ("step", "task_loss", "val_acc", "precision", "rate_l0",
                  "rate_fused", "lambda_0", "lambda_1", "target_l0",
                  "target_fused")


@dataclass
class RunConfig:
    """Everything one run needs; round-trips through a single JSON document."""

    model: str = "independent"
    cell: str = "simple"
    embed_dim: int = 32
    hidden_dim: int = 32
    dep_state_dim: int = 16
    stretch_l: float = -0.1
    stretch_r: float = 1.1
    target_l0: float = 0.2
    target_fused: float | None = None
    learning_rate: float = 0.3
    optimizer: str = "sgd"
    grad_clip: float = 5.0
    lambda_lr: float = 0.01
    lagrangian_beta: float = 0.99
    lambda_nonneg: bool = False
    batch_size: int = 64
    epochs: int = 10
    seed: int = 1
    eval_every: int = 200
    max_len: int = 64
    freeze_gates_open: bool = False
    use_raw_mean_gate: bool = False
    corpus_dir: str = "data"
    checkpoint: str = "checkpoint.json"
    metrics: str = "metrics.csv"
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    pairs: PairSpec = field(default_factory=PairSpec)

    def __post_init__(self):
        if isinstance(self.corpus, dict):
            self.corpus = CorpusSpec(**self.corpus)
        if isinstance(self.pairs, dict):
            self.pairs = PairSpec(**self.pairs)
        self.validate()

    def validate(self):
        if self.model not in MODEL_CHOICES:
            raise ValueError(f"model must be one of {MODEL_CHOICES}, "
                             f"got {self.model!r}")
        if self.cell not in models.CELLS:
            raise ValueError(f"cell must be one of {tuple(models.CELLS)}")
        if not (self.stretch_l < 0.0 < 1.0 < self.stretch_r):
            raise ValueError("stretch bounds must satisfy l < 0 < 1 < r")
        if not 0.0 < self.target_l0 <= 1.0:
            raise ValueError("target_l0 must lie in (0, 1]")
        if self.target_fused is not None and not 0.0 < self.target_fused <= 1.0:
            raise ValueError("target_fused must lie in (0, 1]")
        if self.learning_rate <= 0.0 or self.lambda_lr <= 0.0:
            raise ValueError("learning rates must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if self.batch_size < 1 or self.epochs < 1 or self.eval_every < 1:
            raise ValueError("batch_size, epochs, eval_every must be >= 1")
        if not 0.0 <= self.lagrangian_beta < 1.0:
            raise ValueError("lagrangian_beta must lie in [0, 1)")
        if self.corpus.max_len > self.max_len:
            raise ValueError(f"corpus max_len {self.corpus.max_len} exceeds "
                             f"the model sequence cap {self.max_len}")

    @property
    def bounds(self) -> StretchBounds:
        return StretchBounds(self.stretch_l, self.stretch_r)

    def model_config(self, vocab_size: int, num_classes: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, num_classes=num_classes,
                           embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
                           dep_state_dim=self.dep_state_dim, cell=self.cell,
                           bounds=self.bounds,
                           use_raw_mean_gate=self.use_raw_mean_gate)

    def to_doc(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_doc(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_doc(json.load(fh))


class SgdOptimizer:
    def __init__(self, params: models.Parameters, lr: float, clip: float):
        self.params = params
        self.lr = lr
        self.clip = clip

    def step(self, grads: dict[str, np.ndarray]) -> None:
        coef = _clip_coef(grads, self.clip)
        for name, g in grads.items():
            self.params[name] = self.params[name] - self.lr * coef * g


class AdamOptimizer:
    def __init__(self, params: models.Parameters, lr: float, clip: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.clip = clip
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}

    def step(self, grads):
        coef = _clip_coef(grads, self.clip)
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            g = coef * g
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            update = (self.m[name] / b1t) / (np.sqrt(self.v[name] / b2t) + self.eps)
            self.params[name] = self.params[name] - self.lr * update


def _clip_coef(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = np.sqrt(total)
    return 1.0 if norm <= max_norm else max_norm / (norm + 1e-12)


def make_optimizer(config: RunConfig, params: models.Parameters):
    cls = AdamOptimizer if config.optimizer == "adam" else SgdOptimizer
    return cls(params, config.learning_rate, config.grad_clip)


def bucket_batches(lengths: list[int], batch_size: int,
                   rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Batches of equal-length examples; no padding positions ever exist."""
    buckets: dict[int, list[int]] = {}
    for idx, n in enumerate(lengths):
        buckets.setdefault(n, []).append(idx)
    batches = []
    for n in sorted(buckets):
        idxs = np.asarray(buckets[n], dtype=np.int64)
        if rng is not None:
            idxs = idxs[rng.permutation(len(idxs))]
        for i in range(0, len(idxs), batch_size):
            batches.append(idxs[i:i + batch_size])
    if rng is not None:
        order = rng.permutation(len(batches))
        batches = [batches[i] for i in order]
    return batches


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class MetricsWriter:
    """CSV stream of evaluation rows; UTF-8, LF endings, repr-exact floats."""

    def __init__(self, path):
        self.path = path
        self.rows = []
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(",".join(METRICS_FIELDS) + "\n")

    def append(self, **kwargs) -> dict:
        row = {k: kwargs.get(k) for k in METRICS_FIELDS}
        self.rows.append(row)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(",".join(_fmt(row[k]) for k in METRICS_FIELDS) + "\n")
        return row


def load_split(corpus_dir: str, split: str) -> list:
    return corpus_mod.read_jsonl(os.path.join(corpus_dir, f"{split}.jsonl"))


def evaluate_rationale(model: models.RationaleModel, examples,
                       batch_size: int, freeze_open: bool = False) -> dict:
    """Deterministic-gate validation metrics, order-independent."""
    n = len(examples)
    losses = np.zeros(n)
    correct = np.zeros(n)
    precisions = np.zeros(n)
    rates = np.zeros(n)
    fused = np.zeros(n)
    selected = np.zeros(n)
    gates_out: list[np.ndarray | None] = [None] * n
    preds = np.zeros(n, dtype=np.int64)
    for batch in bucket_batches([len(ex.tokens) for ex in examples], batch_size):
        tokens = np.asarray([examples[i].tokens for i in batch])
        labels = np.asarray([examples[i].label for i in batch])
        probs, gates = model.eval_batch(tokens, freeze_open=freeze_open)
        batch_preds = np.argmax(probs, axis=1)
        rows = np.arange(len(batch))
        batch_losses = -np.log(np.maximum(probs[rows, labels], 1e-300))
        for j, idx in enumerate(batch):
            ex = examples[idx]
            p, r = corpus_mod.precision_and_rate(gates[j], ex.rationale_mask)
            precisions[idx] = p
            rates[idx] = r
            trans = corpus_mod.selection_transitions(gates[j])
            fused[idx] = trans / max(len(ex.tokens) - 1, 1)
            selected[idx] = np.sum(gates[j] != 0.0)
            losses[idx] = batch_losses[j]
            correct[idx] = float(batch_preds[j] == labels[j])
            preds[idx] = batch_preds[j]
            gates_out[idx] = gates[j]
    return {"task_loss": float(np.mean(losses)),
            "accuracy": float(np.mean(correct)),
            "precision": float(np.mean(precisions)),
            "rate_l0": float(np.mean(rates)),
            "rate_fused": float(np.mean(fused)),
            "mean_selected": float(np.mean(selected)),
            "mean_transitions": float(np.mean(fused * np.asarray(
                [max(len(ex.tokens) - 1, 1) for ex in examples]))),
            "gates": gates_out, "predictions": preds}


def _lagrangian_for(config: RunConfig) -> LagrangianState:
    targets = [config.target_l0]
    if config.target_fused is not None:
        targets.append(config.target_fused)
    return LagrangianState(lambdas=np.zeros(len(targets)),
                           targets=np.asarray(targets),
                           lambda_lr=config.lambda_lr,
                           beta=config.lagrangian_beta,
                           nonneg=config.lambda_nonneg)


def train_rationale(config: RunConfig, splits: dict | None = None) -> dict:
    """Full training run for the (in)dependent rationale models.

    Returns a summary with the final and best metric rows; writes the metrics
    CSV and the best-validation checkpoint as side effects.
    """
    if splits is None:
        splits = {name: load_split(config.corpus_dir, name)
                  for name in ("train", "valid")}
    train_ex, valid_ex = splits["train"], splits["valid"]
    spec = config.corpus
    rng = np.random.default_rng(config.seed)
    model = models.RationaleModel(
        config.model_config(spec.vocab_size, spec.num_classes), rng,
        dependent=(config.model == "dependent"))
    optimizer = make_optimizer(config, model.params)
    lagrangian = _lagrangian_for(config)
    writer = MetricsWriter(config.metrics)
    lengths = [len(ex.tokens) for ex in train_ex]

    step = 0
    loss_accum, loss_count = 0.0, 0
    best = {"task_loss": np.inf}
    best_params = model.params.copy_arrays()
    best_lagrangian = lagrangian.to_doc()
    last_eval_step = -1

    def run_eval():
        nonlocal loss_accum, loss_count, best, best_params, best_lagrangian, \
            last_eval_step
        stats = evaluate_rationale(model, valid_ex, config.batch_size,
                                   freeze_open=config.freeze_gates_open)
        train_loss = loss_accum / max(loss_count, 1)
        loss_accum, loss_count = 0.0, 0
        lam = lagrangian.lambdas
        writer.append(step=step, task_loss=train_loss,
                      val_acc=stats["accuracy"], precision=stats["precision"],
                      rate_l0=stats["rate_l0"], rate_fused=stats["rate_fused"],
                      lambda_0=float(lam[0]) if lam.size else 0.0,
                      lambda_1=float(lam[1]) if lam.size > 1 else 0.0,
                      target_l0=config.target_l0,
                      target_fused=config.target_fused)
        if stats["task_loss"] < best["task_loss"]:
            best = stats
            best_params = model.params.copy_arrays()
            best_lagrangian = lagrangian.to_doc()
        last_eval_step = step
        return stats

    for _ in range(config.epochs):
        for batch in bucket_batches(lengths, config.batch_size, rng):
            tokens = np.asarray([train_ex[i].tokens for i in batch])
            labels = np.asarray([train_ex[i].label for i in batch])
            u = dist.draw_uniform(rng, tokens.shape)
            try:
                graph, task, ext, _ = model.loss_graph(
                    tokens, labels, u, freeze_open=config.freeze_gates_open)
                if config.freeze_gates_open:
                    total = task
                    observed = None
                else:
                    pens = [ad.mean(penalties.expected_l0(
                        ext.probs_zero, normalize=True))]
                    if config.target_fused is not None:
                        pens.append(ad.mean(penalties.expected_fused_lasso(
                            ext.probs_zero, normalize=True)))
                    total = penalties.total_loss(task, pens, lagrangian)
                    observed = np.asarray([float(p.data) for p in pens])
                grads = ad.backward(graph, total)
            except ad.NonFiniteError as err:
                raise DivergenceError(
                    f"non-finite value at step {step}: {err}") from err
            optimizer.step(grads)
            if observed is not None:
                lagrangian.step(observed)
            loss_accum += float(task.data)
            loss_count += 1
            step += 1
            if step % config.eval_every == 0:
                run_eval()
    if step != last_eval_step:
        run_eval()

    doc = {"config": config.to_doc(), "lagrangian": best_lagrangian,
           "params": ad.params_to_doc(best_params)}
    if config.checkpoint:
        with open(config.checkpoint, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh)
    return {"final": writer.rows[-1], "best": best, "steps": step,
            "model": model, "rows": writer.rows}


def evaluate_attention(model, examples, batch_size: int) -> dict:
    """Deterministic-gate metrics for the pair matcher."""
    bag = isinstance(model, models.BagOfEmbeddingsMatcher)
    n = len(examples)
    losses = np.zeros(n)
    correct = np.zeros(n)
    rates = np.zeros(n)
    precisions = np.full(n, np.nan)
    for start in range(0, n, batch_size):
        batch = range(start, min(start + batch_size, n))
        prem = np.asarray([examples[i].premise for i in batch])
        hyp = np.asarray([examples[i].hypothesis for i in batch])
        labels = np.asarray([examples[i].label for i in batch])
        if bag:
            _, logits = model.forward(prem, hyp, trainable=False)
            z = None
        else:
            _, logits, z_node, _, _ = model.forward(prem, hyp, u=None,
                                                    trainable=False)
            z = z_node.data
        probs = _softmax_np(logits.data)
        rows = np.arange(len(labels))
        batch_losses = -np.log(np.maximum(probs[rows, labels], 1e-300))
        batch_preds = np.argmax(probs, axis=1)
        for j, idx in enumerate(batch):
            losses[idx] = batch_losses[j]
            correct[idx] = float(batch_preds[j] == labels[j])
            if z is not None:
                rates[idx] = float(np.mean(z[j] != 0.0))
                ex = examples[idx]
                if ex.gold_cell is not None:
                    gold = np.zeros_like(z[j])
                    gold[ex.gold_cell[0], ex.gold_cell[1]] = 1
                    p, _ = corpus_mod.precision_and_rate(z[j].ravel(),
                                                         gold.ravel())
                    precisions[idx] = p
    with np.errstate(invalid="ignore"):
        mean_precision = float(np.nanmean(precisions)) \
            if np.any(~np.isnan(precisions)) else 1.0
    return {"task_loss": float(np.mean(losses)),
            "accuracy": float(np.mean(correct)),
            "rate_l0": float(np.mean(rates)),
            "precision": mean_precision,
            "rate_fused": 0.0}


def _softmax_np(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=1, keepdims=True))
    return e / np.sum(e, axis=1, keepdims=True)


def train_attention(config: RunConfig, splits: dict | None = None) -> dict:
    """Training run for the toy matcher (gated or bag-of-embeddings)."""
    if splits is None:
        splits = corpus_mod.generate_pairs(config.pairs)
    train_ex, valid_ex = splits["train"], splits["valid"]
    rng = np.random.default_rng(config.seed)
    mc = config.model_config(config.pairs.vocab_size, 2)
    bag = config.model == "attention-bag"
    model = (models.BagOfEmbeddingsMatcher if bag
             else models.AttentionMatcher)(mc, rng)
    optimizer = make_optimizer(config, model.params)
    lagrangian = LagrangianState(lambdas=np.zeros(1),
                                 targets=np.asarray([config.target_l0]),
                                 lambda_lr=config.lambda_lr,
                                 beta=config.lagrangian_beta,
                                 nonneg=config.lambda_nonneg)
    writer = MetricsWriter(config.metrics)
    order_rng = rng

    step = 0
    loss_accum, loss_count = 0.0, 0
    best = {"task_loss": np.inf}
    best_params = model.params.copy_arrays()
    last_eval_step = -1

    def run_eval():
        nonlocal loss_accum, loss_count, best, best_params, last_eval_step
        stats = evaluate_attention(model, valid_ex, config.batch_size)
        train_loss = loss_accum / max(loss_count, 1)
        loss_accum, loss_count = 0.0, 0
        writer.append(step=step, task_loss=train_loss,
                      val_acc=stats["accuracy"], precision=stats["precision"],
                      rate_l0=stats["rate_l0"], rate_fused=stats["rate_fused"],
                      lambda_0=float(lagrangian.lambdas[0]), lambda_1=0.0,
                      target_l0=config.target_l0, target_fused=None)
        if stats["task_loss"] < best["task_loss"]:
            best = stats
            best_params = model.params.copy_arrays()
        last_eval_step = step
        return stats

    n = len(train_ex)
    m, k = config.pairs.premise_len, config.pairs.hypothesis_len
    for _ in range(config.epochs):
        perm = order_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            prem = np.asarray([train_ex[i].premise for i in batch])
            hyp = np.asarray([train_ex[i].hypothesis for i in batch])
            labels = np.asarray([train_ex[i].label for i in batch])
            try:
                if bag:
                    graph, logits = model.forward(prem, hyp)
                    total = models.elbo_loss(logits, labels)
                    task_value = float(total.data)
                else:
                    u = dist.draw_uniform(rng, (len(batch), m, k))
                    graph, logits, _, p0, _ = model.forward(prem, hyp, u=u)
                    task = models.elbo_loss(logits, labels)
                    rate = ad.mean(1.0 - p0)
                    total = penalties.total_loss(task, [rate], lagrangian)
                    task_value = float(task.data)
                    lag_obs = np.asarray([float(rate.data)])
                grads = ad.backward(graph, total)
            except ad.NonFiniteError as err:
                raise DivergenceError(
                    f"non-finite value at step {step}: {err}") from err
            optimizer.step(grads)
            if not bag:
                lagrangian.step(lag_obs)
            loss_accum += task_value
            loss_count += 1
            step += 1
            if step % config.eval_every == 0:
                run_eval()
    if step != last_eval_step:
        run_eval()

    doc = {"config": config.to_doc(), "lagrangian": lagrangian.to_doc(),
           "params": ad.params_to_doc(best_params)}
    if config.checkpoint:
        with open(config.checkpoint, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh)
    return {"final": writer.rows[-1], "best": best, "steps": step,
            "model": model, "rows": writer.rows}


def train_run(config: RunConfig, splits: dict | None = None) -> dict:
    if config.model in ("attention", "attention-bag"):
        return train_attention(config, splits)
    return train_rationale(config, splits)


def load_checkpoint(path) -> tuple[RunConfig, dict, LagrangianState]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    config = RunConfig.from_doc(doc["config"])
    arrays = ad.params_from_doc(doc["params"])
    lagrangian = LagrangianState.from_doc(doc["lagrangian"])
    return config, arrays, lagrangian


def restore_model(config: RunConfig, arrays: dict):
    """Rebuild the model named by the config and load checkpoint weights.

    Raises ValueError listing the offending parameter shapes when the
    checkpoint does not match the configured architecture.
    """
    rng = np.random.default_rng(config.seed)
    if config.model in ("attention", "attention-bag"):
        mc = config.model_config(config.pairs.vocab_size, 2)
        model = (models.BagOfEmbeddingsMatcher if config.model == "attention-bag"
                 else models.AttentionMatcher)(mc, rng)
    else:
        spec = config.corpus
        model = models.RationaleModel(
            config.model_config(spec.vocab_size, spec.num_classes), rng,
            dependent=(config.model == "dependent"))
    model.params.load_arrays(arrays)
    return model
