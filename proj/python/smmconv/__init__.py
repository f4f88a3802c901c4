"""NCHW convolution backends: reference, im2col+GEMM, MEC and SMM.

Arrays are float32 in C order: input (ci, h, w), weights (co, ci, kh, kw),
output (co, h', w'). ``smm_conv`` takes weights from ``repack_weights``.
"""

from ._core import (
    BenchError,
    BenchRecord,
    ConfigError,
    ConvGeometry,
    Error,
    LayerSpec,
    ShapeError,
    UnsupportedError,
    builtin_network,
    builtin_network_names,
    conv_im2col,
    conv_mec,
    conv_ref,
    default_thread_count,
    emit_csv,
    fill_deterministic,
    im2col_workspace_elements,
    max_rel_diff,
    mec_workspace_elements,
    output_shape,
    parse_csv,
    parse_layer_config,
    repack_weights,
    run_bench,
    smm_conv,
    smm_workspace_elements,
    sweep,
    unpack_weights,
)

__all__ = [name for name in dir() if not name.startswith("_")]
