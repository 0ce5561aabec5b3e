"""Pseudo-analog wireless video over an 802.11a-style OFDM link, with a digital baseline."""

from .channel import ChannelParams, apply_channel
from .link import AnalogOptions, PhyOptions, decode_gop, encode_gop
from .source import Frame, Gop, compute_psnr, load_video, split_gops
from .theory import analog_distortion, awgn_capacity, min_distortion_digital, rate_distortion

__version__ = "0.1.0"

__all__ = ["ChannelParams", "apply_channel", "AnalogOptions", "PhyOptions", "decode_gop",
           "encode_gop", "Frame", "Gop", "compute_psnr", "load_video", "split_gops",
           "analog_distortion", "awgn_capacity", "min_distortion_digital", "rate_distortion"]
