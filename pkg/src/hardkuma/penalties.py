"""Differentiable expected-sparsity penalties and the rate controller.

With tractable per-position probabilities P(Z_i = 0), the expected number of
nonzero gates and the expected number of zero/nonzero transitions between
neighbours are closed-form, differentiable functions of the gate
distribution's shape parameters.  A vector of Lagrangian multipliers, one
per penalty, is ascended on the (smoothed) gap between observed penalty
values and their targets while the model descends on the total loss, which
drives the selection statistics to prescribed rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def expected_l0(probs_zero: Tensor, normalize: bool = False) -> Tensor:
    """Expected count of nonzero gates: sum_i (1 - P(Z_i = 0)).

    Reduces along the last axis, so a [B, n] batch yields per-example values
    that the caller can average.  ``normalize`` divides by n, turning the
    count into a selection rate in [0, 1].
    """
    if probs_zero.size == 0:
        raise ValueError("expected_l0: empty probability vector")
    n = probs_zero.shape[-1]
    total = ad.sum_(1.0 - probs_zero, axis=-1)
    return total / float(n) if normalize else total


def expected_fused_lasso(probs_zero: Tensor, normalize: bool = False) -> Tensor:
    """Expected count of zero-to-nonzero plus nonzero-to-zero changes.

    For independent neighbours this is
    sum_i P(Z_i=0)(1 - P(Z_{i+1}=0)) + (1 - P(Z_i=0)) P(Z_{i+1}=0).
    ``normalize`` divides by n-1 (the maximum possible transition count).
    """
    n = probs_zero.shape[-1]
    if n < 2:
        raise ValueError("expected_fused_lasso: need at least two positions")
    axis = probs_zero.data.ndim - 1
    p = ad.narrow(probs_zero, axis, 0, n - 1)
    q = ad.narrow(probs_zero, axis, 1, n - 1)
    total = ad.sum_(p * (1.0 - q) + (1.0 - p) * q, axis=-1)
    return total / float(n - 1) if normalize else total


def expected_l0_dependent(step_probs_zero: Sequence[Tensor] | Tensor,
                          normalize: bool = False) -> Tensor:
    """Single-prefix-sample estimate of the expected L0 under dependent gates.

    Each entry must be P(Z_i = 0 | z_<i) evaluated at the actually sampled
    prefix, produced in sequence order.  Summing (1 - p_i) over the sequence
    is then an unbiased one-sample Monte Carlo estimate of the chain of
    nested expectations, differentiable w.r.t. the shape parameters.
    """
    if not isinstance(step_probs_zero, Tensor):
        steps = list(step_probs_zero)
        if not steps:
            raise ValueError("expected_l0_dependent: empty step sequence")
        axis = steps[0].data.ndim
        step_probs_zero = ad.concat(
            [ad.reshape(s, s.shape + (1,)) for s in steps], axis=axis)
    return expected_l0(step_probs_zero, normalize=normalize)


@dataclass
class LagrangianState:
    """Multipliers, targets, and the smoothed constraint gap.

    ``lambdas`` are unconstrained reals (equality-style targets); setting
    ``nonneg`` clips them at zero for at-most-rate semantics.  Only the
    single-threaded training loop may mutate an instance.
    """

    lambdas: np.ndarray
    targets: np.ndarray
    lambda_lr: float = 0.01
    beta: float = 0.99
    nonneg: bool = False
    constraint_ma: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64).copy()
        self.targets = np.asarray(self.targets, dtype=np.float64).copy()
        if self.lambdas.shape != self.targets.shape:
            raise ValueError("LagrangianState: lambdas and targets must have "
                             "the same length")
        if self.lambda_lr <= 0.0:
            raise ValueError("LagrangianState: lambda_lr must be positive")
        if self.constraint_ma is None:
            self.constraint_ma = np.zeros_like(self.lambdas)
        else:
            self.constraint_ma = np.asarray(self.constraint_ma,
                                            dtype=np.float64).copy()

    def step(self, observed) -> "LagrangianState":
        """One ascent step on the multipliers.

        The constraint gap (observed - target) is folded into an exponential
        moving average with factor beta, and lambda moves up that average:
        gradient ascent on the saddle objective's max over lambda.
        """
        observed = np.asarray(observed, dtype=np.float64)
        if observed.shape != self.targets.shape:
            raise ValueError(f"lagrangian_step: observed shape {observed.shape}"
                             f" does not match targets {self.targets.shape}")
        self.constraint_ma = (self.beta * self.constraint_ma
                              + (1.0 - self.beta) * (observed - self.targets))
        self.lambdas = self.lambdas + self.lambda_lr * self.constraint_ma
        if self.nonneg:
            self.lambdas = np.maximum(self.lambdas, 0.0)
        return self

    def to_doc(self) -> dict:
        return {"lambdas": self.lambdas.tolist(),
                "targets": self.targets.tolist(),
                "lambda_lr": self.lambda_lr,
                "beta": self.beta,
                "nonneg": self.nonneg,
                "constraint_ma": self.constraint_ma.tolist()}

    @classmethod
    def from_doc(cls, doc: dict) -> "LagrangianState":
        return cls(lambdas=np.asarray(doc["lambdas"]),
                   targets=np.asarray(doc["targets"]),
                   lambda_lr=doc["lambda_lr"], beta=doc["beta"],
                   nonneg=doc["nonneg"],
                   constraint_ma=np.asarray(doc["constraint_ma"]))


def lagrangian_step(state: LagrangianState, observed) -> LagrangianState:
    """Functional alias for ``LagrangianState.step``."""
    return state.step(observed)


def total_loss(task_loss: Tensor, penalties: Sequence[Tensor],
               state: LagrangianState) -> Tensor:
    """task_loss + sum_j lambda_j (R_j - r_j), with lambda held constant
    w.r.t. the model parameters (the multipliers enter as plain numbers)."""
    penalties = list(penalties)
    if len(penalties) != len(state.lambdas):
        raise ValueError(f"total_loss: {len(penalties)} penalties vs "
                         f"{len(state.lambdas)} multipliers")
    out = task_loss
    for lam, r_node, target in zip(state.lambdas, penalties, state.targets):
        out = out + float(lam) * (r_node - float(target))
    return out
