from .tensor import (
    Tensor,
    add,
    as_tensor,
    constant,
    mean_all,
    mul,
    neg,
    no_grad,
    pad_spatial,
    parameter,
    relu,
    reshape,
    scale,
    sigmoid,
    slice_channels,
    square,
    sub,
    sum_all,
    tanh,
)
from .ops import (
    affine,
    boundary_concat,
    broadcast_spatial,
    categorical_entropy,
    channel_concat,
    channel_scale,
    conv2d,
    global_max_pool,
    global_mean_pool,
    log_softmax,
    same_padding,
    softmax,
    take_rows,
)
from .init import InitSpec, fan_in_of, init, orthogonal_rows, truncated_normal
from .optim import AdamState, ParamStore, adam_step, clip_global_norm, global_grad_norm, l2_penalty

__all__ = [
    "Tensor", "add", "as_tensor", "constant", "mean_all", "mul", "neg", "no_grad",
    "pad_spatial", "parameter", "relu", "reshape", "scale", "sigmoid", "slice_channels",
    "square", "sub", "sum_all", "tanh",
    "affine", "boundary_concat", "broadcast_spatial", "categorical_entropy", "channel_concat", "channel_scale",
    "conv2d", "global_max_pool", "global_mean_pool", "log_softmax", "same_padding",
    "softmax", "take_rows",
    "InitSpec", "fan_in_of", "init", "orthogonal_rows", "truncated_normal",
    "AdamState", "ParamStore", "adam_step", "clip_global_norm", "global_grad_norm", "l2_penalty",
]
