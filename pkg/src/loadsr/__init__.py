"""loadsr: symbolic regression for dynamic load modeling.

Discovers compact closed-form expressions y = f(x1..xd) by sampling
operator assignments for a fixed-depth trainable expression tree from a
categorical policy, scoring each assignment by gradient-descent fitting
of the tree's coefficients, and reinforcing the top-performing samples
(risk-seeking policy gradient). A candidate pool keeps the best
expressions found, which are fine-tuned after the search; the lowest
MSE expression wins.
"""

from .baselines import BaselineFit, fit_polynomial, fit_zip
from .data import (Dataset, TrajectoryConfig, add_lags, gen_erl, gen_voltage,
                   gen_zip, load_csv, split, standardize)
from .errors import (ConfigError, DataError, DegenerateEvaluationError,
                     DomainError, EmptyPoolError, ExpressionParseError,
                     FitError, SearchError)
from .metrics import mae, rmse
from .operators import (OperatorDescriptor, OperatorLibrary, apply_binary,
                        apply_unary, build_library, d_binary, d_unary,
                        default_library)
from .parsing import parse_expression
from .policy import (Policy, new_policy, risk_seeking_update, sample_batch,
                     standard_update)
from .rewards import (Candidate, CandidatePool, empirical_quantile, pool_best,
                      pool_insert, reward)
from .search import SearchConfig, SearchResult, best_reward_trace, run_search
from .training import TrainReport, fine_tune, train_critic
from .tree import (ExpressionTree, Prediction, TreeTemplate, assign_operators,
                   build_template, evaluate, init_params, loss_and_gradients,
                   render)

__version__ = "0.1.0"

__all__ = [
    "BaselineFit", "fit_polynomial", "fit_zip",
    "Dataset", "TrajectoryConfig", "add_lags", "gen_erl", "gen_voltage",
    "gen_zip", "load_csv", "split", "standardize",
    "ConfigError", "DataError", "DegenerateEvaluationError", "DomainError",
    "EmptyPoolError", "ExpressionParseError", "FitError", "SearchError",
    "mae", "rmse",
    "OperatorDescriptor", "OperatorLibrary", "apply_binary", "apply_unary",
    "build_library", "d_binary", "d_unary", "default_library",
    "parse_expression",
    "Policy", "new_policy", "risk_seeking_update", "sample_batch",
    "standard_update",
    "Candidate", "CandidatePool", "empirical_quantile", "pool_best",
    "pool_insert", "reward",
    "SearchConfig", "SearchResult", "best_reward_trace", "run_search",
    "TrainReport", "fine_tune", "train_critic",
    "ExpressionTree", "Prediction", "TreeTemplate", "assign_operators",
    "build_template", "evaluate", "init_params", "loss_and_gradients",
    "render",
]
