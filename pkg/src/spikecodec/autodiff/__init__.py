from .tensor import (
    Tensor,
    no_grad,
    add,
    sub,
    mul,
    neg,
    linear,
    sum_all,
    mean_all,
    abs_,
    tanh,
    sigmoid,
    hard_tanh,
    timestep,
)
from .layers import (
    BatchNormState,
    batchnorm1d,
    conv1d,
    conv1d_transpose,
    fire_atan,
    leaky_integrator_step,
    lif_step,
    spike_threshold_ste,
)
from .optim import Adam
from .gradcheck import grad_check

__all__ = [
    "Tensor",
    "no_grad",
    "add",
    "sub",
    "mul",
    "neg",
    "linear",
    "sum_all",
    "mean_all",
    "abs_",
    "tanh",
    "sigmoid",
    "hard_tanh",
    "timestep",
    "BatchNormState",
    "batchnorm1d",
    "conv1d",
    "conv1d_transpose",
    "fire_atan",
    "leaky_integrator_step",
    "lif_step",
    "spike_threshold_ste",
    "Adam",
    "grad_check",
]
