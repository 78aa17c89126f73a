"""
Lossy compression of complex CSI vector sequences with context trees.

The pipeline normalizes each frame by its strongest component, quantizes
amplitude and phase through fitted companders, models every symbol stream
with a context tree (weighting for ideal code lengths, maximizing for the
MAP model) and codes the streams jointly with short fixed codewords.
"""

from . import channel_sim, codec, compander, context_tree, fileio, multistream, pipeline, quantizer
from .channel_sim import FadingConfig, add_noise, generate
from .codec import BitReader, BitWriter, CodecConfig, CodecState, StreamCoder, ctw_ideal_code_length
from .compander import BetaLaw, FitConfig, Identity, MuLaw, adjust, design, fit
from .context_tree import ContextTree, Model, kt_probability
from .errors import (CtqError, DegenerateSample, DesyncDetected, FormatError, MalformedFrame,
                     MissingFallback, NonConvergence, TruncatedStream, ZeroVector)
from .multistream import CT_INDICATOR, INDIVIDUAL, SIMPLE_JOINT, JointConfig, StreamBundle
from .quantizer import QuantizedFrame, QuantizerConfig, mscd, quantize_frame, dequantize_frame

__version__ = "0.1.0"
