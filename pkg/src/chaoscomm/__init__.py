"""Chaos-based baseband communication over multipath channels.

Waveform synthesis, multipath/AWGN channel, matched filtering, return-map
threshold detection, closed-form BER, conventional BPSK/MMSE baselines and a
seeded Monte-Carlo harness.
"""
from .analytic import (ber_optimal, ber_suboptimal, ber_suboptimal_lattice, erfc, predict,
                       required_ebn0_analytic, single_path_lower_bound)
from .baseline import ChannelEstimate, EqualizerTaps, equalize, ls_estimate, mmse_design
from .channel import (ChannelModel, NoiseSpec, add_awgn, exponential_channel, perturb_channel,
                      propagate)
from .detector import ThresholdPolicy, detect, judgment_distance, return_map
from .harness import (BerCurve, ExperimentConfig, emit, required_ebn0, run_ber_sweep,
                      run_framed_quasi_static)
from .matched_filter import (CorrelationTable, build_correlation_table, matched_filter,
                             pulse_autocorrelation, symbol_level_output)
from .waveform import SampledSignal, SymbolSequence, WaveformParams, basis_pulse, synthesize

__version__ = "0.1.0"
