"""Stochastic RNN response kernels, Volterra series and signature-kernel learning."""

from .paths import Path, PolyBasis, augment_time, concat, make_path, one_variation
from .signature import TruncatedSignature, signature, sig_oracle, tensor_exp, tensor_mul
from .kernels import KernelSpec, gram, kernel, sig_kernel_pl
from .srnn import SrnnParams, euler_maruyama, output_functional
from .response import (ImpulseSpec, VolterraKernels, compose_kernels, fdt_report,
                       impulse_response_mc, volterra_eval)
from .learn import KernelModel, fit, load_model, predict, save_model

__version__ = "0.1.0"

__all__ = [
    "Path", "PolyBasis", "augment_time", "concat", "make_path", "one_variation",
    "TruncatedSignature", "signature", "sig_oracle", "tensor_exp", "tensor_mul",
    "KernelSpec", "gram", "kernel", "sig_kernel_pl",
    "SrnnParams", "euler_maruyama", "output_functional",
    "ImpulseSpec", "VolterraKernels", "compose_kernels", "fdt_report",
    "impulse_response_mc", "volterra_eval",
    "KernelModel", "fit", "load_model", "predict", "save_model",
]
