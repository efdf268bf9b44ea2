"""Fixed-rate vector-quantized packetized predictive control over lossy networks."""
from .dictionary import Dictionary, Family, build_dictionary, codewords_per_section, section_scales
from .encoder import (CodewordIndex, decode, exhaustive_encode, greedy_encode,
                      greedy_encode_reuse, greedy_encode_switched, pack_indices, unpack_indices)
from .network import IIDDropout, TwoStateDropout, mss_spectral_radius, stationary_distribution
from .plant import AggregatedModel, build_augmented
from .sim import Design, DictionarySpec, RunRecord, SimulationConfig, aggregate_runs, run_closed_loop, run_unquantized
from .synth import ControllerSynthesis, CostWeights, Plant, solve_dare, synthesize

__version__ = "0.1.0"
