"""Hard Kumaraswamy gates and the latent-rationale models built on them."""

from .autodiff import (DomainError, Graph, NonFiniteError, ShapeError, Tensor,
                       backward, forward_op)
from .distribution import (HardKumaSample, KumaParams, StretchBounds,
                           deterministic_gate, kuma_cdf, kuma_icdf, kuma_mean,
                           kuma_pdf, prob_one, prob_zero, sample)
from .penalties import (LagrangianState, expected_fused_lasso, expected_l0,
                        expected_l0_dependent, lagrangian_step, total_loss)
from .corpus import CorpusSpec, SyntheticExample, precision_and_rate
from .training import RunConfig, train_run

__version__ = "0.1.0"
