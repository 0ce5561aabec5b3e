"""Conventional digital baseline: quantizer, rate-1/3 convolutional code, 16-QAM."""

from .fec import CODE, ConvCode, conv_encode, viterbi_decode
from .qam import constellation, qam16_demap, qam16_map
from .quant import dequantize, quantize

__all__ = ["CODE", "ConvCode", "conv_encode", "viterbi_decode", "constellation",
           "qam16_map", "qam16_demap", "quantize", "dequantize"]
