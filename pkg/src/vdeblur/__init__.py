"""Flow-guided spatio-temporal deformable attention for video deblurring,
implemented from scratch on numpy with reverse-mode differentiation."""

from .attention import deform_attn_core, deformable_attention, phi, reference_points
from .fusion import MultiToMultiAttention, MultiToSingleAttention, export_attention_maps
from .network import CascadedDeblurNet, DeblurNet, NetworkConfig
from .ops import conv2d, conv_transpose2d, leaky_relu, linear, softmax
from .tensor import GradTape, Tensor, concat, no_grad, stack
from .warp import (FlowSet, backward_warp, bilinear_sample, compose_flows,
                   resize_bilinear, zero_flows)

__version__ = "0.1.0"

__all__ = [
    "Tensor", "GradTape", "no_grad", "concat", "stack",
    "conv2d", "conv_transpose2d", "leaky_relu", "softmax", "linear",
    "bilinear_sample", "backward_warp", "compose_flows", "resize_bilinear",
    "FlowSet", "zero_flows",
    "phi", "deform_attn_core", "deformable_attention", "reference_points",
    "MultiToMultiAttention", "MultiToSingleAttention", "export_attention_maps",
    "NetworkConfig", "DeblurNet", "CascadedDeblurNet",
]
