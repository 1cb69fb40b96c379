from .network import HybridNetwork, init_params
from .losses import RecordBatch, loss1, loss2, loss1_with_grads, loss2_with_grads

__all__ = [
    "HybridNetwork",
    "init_params",
    "RecordBatch",
    "loss1",
    "loss2",
    "loss1_with_grads",
    "loss2_with_grads",
]
