"""Minimal NN engine: kernels, layers, losses, ADAM and checkpoints."""

from .backend import BACKEND
from .layers import (Context, Conv2D, Dense, Dropout, Flatten,
                     GaussianNoiseLayer, MaxPool1x2, Param, cross_entropy,
                     dropout, dtype_for, gaussian_noise, relu, softmax,
                     softmax_cross_entropy)
from .optim import Adam
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "BACKEND", "Context", "Conv2D", "Dense", "Dropout", "Flatten",
    "GaussianNoiseLayer", "MaxPool1x2", "Param", "cross_entropy", "dropout",
    "dtype_for", "gaussian_noise", "load_checkpoint", "relu",
    "save_checkpoint", "softmax", "softmax_cross_entropy",
]
