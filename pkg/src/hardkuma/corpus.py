"""Synthetic planted-rationale corpora with known gold selections.

Each example is a token-id sequence in which a handful of class-specific
signal tokens are planted at known positions; every other position holds a
neutral token shared by all classes.  The label is therefore a deterministic
function of the signal positions alone, which gives an exact gold rationale
mask to score extracted selections against.

Generation is keyed: every example gets its own counter-based RNG derived
from (seed, split, index), so corpora are bit-identical across runs and
platforms and independent of generation order.  Labels cycle through the
classes by example index, which keeps every split exactly balanced.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

SPLIT_IDS = {"train": 0, "valid": 1, "test": 2}

_CEIL_FUZZ = 1e-9


@dataclass
class SyntheticExample:
    tokens: list[int]
    label: int
    rationale_mask: list[int]


@dataclass
class CorpusSpec:
    """Knobs of the generator; defaults train in minutes at desk scale."""

    vocab_size: int = 512
    num_classes: int = 4
    signal_per_class: int = 8
    min_len: int = 10
    max_len: int = 30
    rho: float = 0.2
    train_size: int = 10000
    valid_size: int = 2000
    test_size: int = 2000
    seed: int = 0
    contiguous: bool = False

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"CorpusSpec: rho must lie in (0, 1), got {self.rho}")
        if self.rho * self.min_len < 1.0 - _CEIL_FUZZ:
            raise ValueError("CorpusSpec: rho * min_len < 1; every example "
                             "needs at least one signal token")
        if self.min_len < 2 or self.max_len < self.min_len:
            raise ValueError("CorpusSpec: need 2 <= min_len <= max_len")
        if self.num_classes * self.signal_per_class >= self.vocab_size:
            raise ValueError("CorpusSpec: vocabulary too small for the "
                             "signal sets plus a neutral set")

    @property
    def neutral_base(self) -> int:
        return self.num_classes * self.signal_per_class

    def signal_range(self, label: int) -> tuple[int, int]:
        lo = label * self.signal_per_class
        return lo, lo + self.signal_per_class


def _example_rng(seed: int, split_id: int, index: int) -> np.random.Generator:
    key = np.array([np.uint64(seed),
                    (np.uint64(split_id) << np.uint64(48)) + np.uint64(index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _signal_count(rho: float, length: int) -> int:
    return math.ceil(rho * length - _CEIL_FUZZ)


def _make_example(spec: CorpusSpec, split_id: int, index: int) -> SyntheticExample:
    rng = _example_rng(spec.seed, split_id, index)
    label = index % spec.num_classes
    length = int(rng.integers(spec.min_len, spec.max_len + 1))
    k = _signal_count(spec.rho, length)
    if spec.contiguous:
        start = int(rng.integers(0, length - k + 1))
        positions = np.arange(start, start + k)
    else:
        positions = rng.choice(length, size=k, replace=False)
    lo, hi = spec.signal_range(label)
    signal = rng.integers(lo, hi, size=k)
    neutral = rng.integers(spec.neutral_base, spec.vocab_size, size=length - k)
    tokens = np.empty(length, dtype=np.int64)
    mask = np.zeros(length, dtype=np.int64)
    mask[positions] = 1
    tokens[mask == 1] = signal
    tokens[mask == 0] = neutral
    return SyntheticExample(tokens=tokens.tolist(), label=label,
                            rationale_mask=mask.tolist())


def generate_split(spec: CorpusSpec, split: str, size: int | None = None
                   ) -> list[SyntheticExample]:
    split_id = SPLIT_IDS[split]
    if size is None:
        size = {"train": spec.train_size, "valid": spec.valid_size,
                "test": spec.test_size}[split]
    return [_make_example(spec, split_id, i) for i in range(size)]


def generate(spec: CorpusSpec) -> dict[str, list[SyntheticExample]]:
    """Train/valid/test splits, disjoint by RNG stream."""
    return {name: generate_split(spec, name) for name in ("train", "valid",
                                                          "test")}


def write_jsonl(path, corpus: list[SyntheticExample]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in corpus:
            fh.write(json.dumps({"tokens": ex.tokens, "label": ex.label,
                                 "rationale_mask": ex.rationale_mask}))
            fh.write("\n")


def read_jsonl(path) -> list[SyntheticExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}: line {lineno}: malformed JSON "
                                 f"({err.msg})") from None
            for key in ("tokens", "label", "rationale_mask"):
                if key not in record:
                    raise ValueError(f"{path}: line {lineno}: missing "
                                     f"field {key!r}")
            if len(record["tokens"]) != len(record["rationale_mask"]):
                raise ValueError(f"{path}: line {lineno}: tokens and "
                                 "rationale_mask lengths differ")
            out.append(SyntheticExample(
                tokens=[int(t) for t in record["tokens"]],
                label=int(record["label"]),
                rationale_mask=[int(m) for m in record["rationale_mask"]]))
    return out


def write_vocab(path, spec: CorpusSpec) -> None:
    vocab = {f"w{i:04d}": i for i in range(spec.vocab_size)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(vocab, fh)


def precision_and_rate(gates, mask) -> tuple[float, float]:
    """Rationale precision and selection rate of one example.

    A position counts as selected whenever its gate is exactly nonzero.
    Precision is the fraction of selected positions inside the gold mask,
    defined as 1.0 when nothing is selected (abstention is not penalized;
    the paired rate of 0 tells the full story).
    """
    gates = np.asarray(gates, dtype=np.float64)
    mask = np.asarray(mask)
    if gates.shape != mask.shape:
        raise ValueError(f"precision_and_rate: gates {gates.shape} vs "
                         f"mask {mask.shape}")
    selected = gates != 0.0
    n_sel = int(np.sum(selected))
    rate = n_sel / gates.size
    if n_sel == 0:
        return 1.0, rate
    hits = int(np.sum(selected & (mask == 1)))
    return hits / n_sel, rate


def selection_transitions(gates) -> int:
    """Number of zero/nonzero boundaries between adjacent positions."""
    sel = np.asarray(gates, dtype=np.float64) != 0.0
    if sel.size < 2:
        return 0
    return int(np.sum(sel[1:] != sel[:-1]))


@dataclass
class PairExample:
    """Premise/hypothesis pair for the toy matching task.

    Each side plants one key token among neutral filler; the label says
    whether the two keys are identical.  gold_cell marks the (premise,
    hypothesis) position pair of the keys for positives.
    """

    premise: list[int]
    hypothesis: list[int]
    label: int
    gold_cell: list[int] = field(default=None)


@dataclass
class PairSpec:
    num_keys: int = 16
    vocab_size: int = 128
    premise_len: int = 6
    hypothesis_len: int = 6
    train_size: int = 4000
    valid_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_keys < 2 or self.num_keys >= self.vocab_size:
            raise ValueError("PairSpec: need 2 <= num_keys < vocab_size")


def _make_pair(spec: PairSpec, split_id: int, index: int) -> PairExample:
    rng = _example_rng(spec.seed + 7919, split_id, index)
    label = index % 2
    key_p = int(rng.integers(0, spec.num_keys))
    if label == 1:
        key_h = key_p
    else:
        key_h = int((key_p + 1 + rng.integers(0, spec.num_keys - 1))
                    % spec.num_keys)
    pos_p = int(rng.integers(0, spec.premise_len))
    pos_h = int(rng.integers(0, spec.hypothesis_len))
    premise = rng.integers(spec.num_keys, spec.vocab_size,
                           size=spec.premise_len)
    hypothesis = rng.integers(spec.num_keys, spec.vocab_size,
                              size=spec.hypothesis_len)
    premise[pos_p] = key_p
    hypothesis[pos_h] = key_h
    return PairExample(premise=premise.tolist(),
                       hypothesis=hypothesis.tolist(), label=label,
                       gold_cell=[pos_p, pos_h] if label == 1 else None)


def generate_pairs(spec: PairSpec) -> dict[str, list[PairExample]]:
    sizes = {"train": spec.train_size, "valid": spec.valid_size}
    return {name: [_make_pair(spec, SPLIT_IDS[name], i) for i in range(size)]
            for name, size in sizes.items()}
