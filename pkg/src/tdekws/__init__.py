"""Spiking keyword classification on formant-encoded audio.

Three architectures over a shared 32-channel spike front end: feedforward
time-difference-encoder (TDE) pairs, feedforward current-based LIF, and
recurrent current-based LIF. Includes BPTT training with a fast-sigmoid
surrogate, correlation-driven pruning, synaptic-operation accounting, and
spike-timing information analysis.
"""

from .dynamics import (
    LifParams,
    LifState,
    TdeParams,
    TdeState,
    decay_factor,
    lif_step,
    surrogate_dsigma,
    surrogate_sigma,
    tde_step,
)
from .encoding import (
    AmplitudeGrid,
    Dataset,
    FormantTrack,
    SpikeRaster,
    channel_of,
    encode_l0,
    encode_tracks,
    generate_synthetic_dataset,
    load_formant_csv,
    load_raster_file,
    quantize_to_channels,
    save_formant_csv,
    save_raster_file,
    template_track,
)
from .topology import (
    LIF,
    LIFREC,
    TDE,
    AdjointTape,
    EventLog,
    NetworkSpec,
    ParameterSet,
    RunResult,
    balance_hidden_size,
    connection_count,
    enumerate_tde_pairs,
    forward_timestep,
    full_tde_spec,
    load_model,
    run_network,
    save_model,
    tde_spec,
    trainable_parameter_count,
)
from .training import (
    Adam,
    Gradients,
    TrainConfig,
    TrainReport,
    TrainingError,
    backward,
    evaluate,
    init_parameters,
    replay_tape,
    run_comparison,
    run_training_fraction_sweep,
    spike_count_cross_entropy,
    split_dataset,
    train,
    training_forward,
)
from .analysis import (
    InfoResult,
    InterpretabilityReport,
    PairCorrelation,
    SynopsReport,
    count_synops,
    info_pattern,
    info_rate,
    init_tau_from_lags,
    interpretability_report,
    prune,
    random_prune,
    rank_pairs,
    unbiased_xcorr,
)

__version__ = "0.1.0"
