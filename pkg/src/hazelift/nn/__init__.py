from .backend import active_backend, set_num_threads
from .layers import BatchNorm2d, Conv2d, ConvTranspose2d, Param, Sigmoid, Tanh
from .optim import Adagrad

__all__ = [
    "active_backend",
    "set_num_threads",
    "Adagrad",
    "BatchNorm2d",
    "Conv2d",
    "ConvTranspose2d",
    "Param",
    "Sigmoid",
    "Tanh",
]
