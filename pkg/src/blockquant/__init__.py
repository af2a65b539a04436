"""Block floating-point (BFP) and scaled BFP quantization: codecs, error
bounds, extreme-value statistics of block maxima and Monte Carlo checks."""

__version__ = "0.1.0"

from .bounds import (
    BoundQuery,
    Regime,
    bfp_asymptotic_var_bound,
    bfp_hd_var_bound,
    bound_curve,
    conditional_proxy_bfp,
    conditional_proxy_sbfp,
    evaluate,
    sbfp_asymptotic_var_bound,
    sbfp_hd_var_bound,
    tail_bound,
)
from .extreme import (
    MaxAbsDistribution,
    gumbel_params,
    max_abs_cdf,
    max_abs_pdf,
    ribbon,
    yn_mean_var,
    yn_moment_numeric,
)
from .formats import (
    BlockFormatSpec,
    Format,
    QuantizedBlock,
    QuantizedTensor,
    alpha_for,
    bfp_quantize,
    dequantize,
    dot_error,
    quantize,
    quantize_tensor,
    quantized_dot,
    sbfp_quantize,
)
from .montecarlo import SimulationConfig, simulate_error, simulate_error_pair, sweep, sweep_pair
from .rebac import optimal_block_size, rebac_curve
from .tensorio import WeightTensor, analyze_layer_pair, load_tensor, save_tensor
