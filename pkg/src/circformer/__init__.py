"""Block-circulant transformer compression, FFT inference kernels and an
accelerator scheduling model."""

from . import bcm, fft, nn, quant, sched
from .bcm import BlockCirculantMatrix, CompressionMode, compress, compression_ratio, expand, matmul, matvec
from .errors import (
    CircformerError,
    ContainerError,
    CycleError,
    DomainError,
    FeasibilityError,
    LengthError,
    ShapeError,
    UnschedulableError,
)
from .nn import SoftmaxImpl, Transformer, TransformerConfig
from .quant import FixedPointFormat, QuantizedTensor, choose_format, dequantize, quantize

__version__ = "0.1.0"

__all__ = [
    "bcm",
    "fft",
    "nn",
    "quant",
    "sched",
    "BlockCirculantMatrix",
    "CompressionMode",
    "compress",
    "compression_ratio",
    "expand",
    "matmul",
    "matvec",
    "CircformerError",
    "ContainerError",
    "CycleError",
    "DomainError",
    "FeasibilityError",
    "LengthError",
    "ShapeError",
    "UnschedulableError",
    "SoftmaxImpl",
    "Transformer",
    "TransformerConfig",
    "FixedPointFormat",
    "QuantizedTensor",
    "choose_format",
    "dequantize",
    "quantize",
]
