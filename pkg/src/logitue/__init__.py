"""Generation-efficient uncertainty estimation for autoregressive LM outputs.

Scores recorded per-token logit streams with a positive-logit magnitude
estimator under top-M aggregation and patience-based early stopping,
distills the scores into an input-only MLP predictor, evaluates with a
selective-prediction metric suite, and empirically validates the
early-stopping martingale bound.
"""

__version__ = "0.1.0"

from ._kernels import NUMBA_ENABLED

__all__ = ["NUMBA_ENABLED", "__version__"]
