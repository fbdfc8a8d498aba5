"""Fine-grained classification with adaptive sub-class clustering.

Each parent class is split into pseudo-label sub-classes by a capped
X-Means run on the current embeddings; a per-class controller grows or
shrinks the cluster budget from validation false negatives.
"""

from .benchmark import benchmark_config, benchmark_spec
from .clustering import ClusterResult, kmeans, xmeans_capped
from .controller import ClusterBudget, ControllerConfig, budget_trace, update_budgets
from .data import Dataset, GeneratorSpec, generate, load_features, save_features
from .encoder import EncoderModel, load_checkpoint, save_checkpoint
from .errors import AdaclustError
from .metrics import EvalReport, confusion, kfold_split, report
from .numeric import Rng
from .pipeline import RunConfig, RunResult, recluster, run, train_epoch, validate
from .subclasses import SubClassMap

__version__ = "0.1.0"

__all__ = [
    "AdaclustError", "ClusterBudget", "ClusterResult", "ControllerConfig", "Dataset",
    "EncoderModel", "EvalReport", "GeneratorSpec", "Rng", "RunConfig", "RunResult",
    "SubClassMap", "benchmark_config", "benchmark_spec", "budget_trace", "confusion",
    "generate", "kfold_split", "kmeans", "load_checkpoint", "load_features", "recluster",
    "report", "run", "save_checkpoint", "save_features", "train_epoch", "update_budgets",
    "validate", "xmeans_capped",
]
