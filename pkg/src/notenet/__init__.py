"""Text classification of free-text notes with small from-scratch networks."""
from ._kernels import BACKEND as KERNEL_BACKEND
from .corpus import (
    Document,
    EncodedBatch,
    SyntheticSpec,
    Vocabulary,
    build_vocabulary,
    compute_max_len,
    encode,
    generate_synthetic,
    load_jsonl,
    save_jsonl,
    tokenize,
)
from .metrics import accuracy, auc_pairwise, roc
from .tensor import Tensor, backward, grad_check, no_grad
from .train import RunReport, TrainConfig, run, select_epoch, should_stop
from .zoo import MODEL_IDS, Model, ModelSpec, build, build_baseline

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "MODEL_IDS",
    "Document",
    "EncodedBatch",
    "Model",
    "ModelSpec",
    "RunReport",
    "SyntheticSpec",
    "Tensor",
    "TrainConfig",
    "Vocabulary",
    "accuracy",
    "auc_pairwise",
    "backward",
    "build",
    "build_baseline",
    "build_vocabulary",
    "compute_max_len",
    "encode",
    "generate_synthetic",
    "grad_check",
    "load_jsonl",
    "no_grad",
    "roc",
    "run",
    "save_jsonl",
    "select_epoch",
    "should_stop",
    "tokenize",
]
