"""Generator and discriminator ensemble as forward passes over loadable weights."""

from .config import (
    REFERENCE_CONFIG,
    BandwidthWarning,
    NetworkConfig,
    admissible_q,
    load_config,
    validate_config,
)
from .forward import (
    ScoreAndFeatures,
    discriminator_forward,
    generator_bands,
    generator_forward,
    largest_activation,
    output_gain_bound,
)
from .graph import ConvSpec, count_params, discriminator_layers, generator_layers, tensor_shapes
from .weights import WeightStore, check_store, effective_weight, init_weights, load_weights, save_weights

__all__ = [
    "REFERENCE_CONFIG", "BandwidthWarning", "NetworkConfig", "admissible_q", "load_config",
    "validate_config", "ScoreAndFeatures", "discriminator_forward", "generator_bands",
    "generator_forward", "largest_activation", "output_gain_bound", "ConvSpec", "count_params",
    "discriminator_layers", "generator_layers", "tensor_shapes", "WeightStore", "check_store",
    "effective_weight", "init_weights", "load_weights", "save_weights",
]
