"""Minimal CNN engine sized for 15x19 glyph classifiers."""

from .gradcheck import finite_difference_gradients, max_relative_gradient_error
from .layers import PARAM_DTYPE, Conv2D, FullyConnected, Layer, LayerSpec, ReLU, make_layer
from .loss import softmax, softmax_xent
from .network import Network, infer_shapes
from .optim import SgdState, TrainConfig, sgd_step
from .serialize import content_hash, load_network, network_from_bytes, network_to_bytes, save_network

__all__ = [
    "finite_difference_gradients", "max_relative_gradient_error",
    "PARAM_DTYPE", "Conv2D", "FullyConnected", "Layer", "LayerSpec", "ReLU", "make_layer",
    "softmax", "softmax_xent", "Network", "infer_shapes",
    "SgdState", "TrainConfig", "sgd_step",
    "content_hash", "load_network", "network_from_bytes", "network_to_bytes", "save_network",
]
