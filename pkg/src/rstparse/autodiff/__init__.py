from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .layers import GRU, BiGRU, Biaffine, Dense, Embedding, GRUCell, ModelParams, attention_scores
from .optim import Adam, AdamHyper, AdamState, adam_step
from .tensor import ShapeError, Tensor, no_grad

__all__ = [
    "Adam", "AdamHyper", "AdamState", "BiGRU", "Biaffine", "CheckpointError", "Dense",
    "Embedding", "GRU", "GRUCell", "GradCheckReport", "ModelParams", "ShapeError", "Tensor",
    "adam_step", "attention_scores", "grad_check", "load_checkpoint", "no_grad", "save_checkpoint",
]
