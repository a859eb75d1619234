"""qtri: singlet-based direction triangulation.

Simulates the protocol where Alice measures singlet halves along her unknown
vertical axis and announces the outcomes, leaving Bob a box of qubits about
half anti-aligned to the rest; estimates that axis with local strategies or
collectively optimal measurements found by POVM see-saw optimization.
"""

from .bloch import (
    Direction,
    SphereGrid,
    angle_between,
    direction_fidelity,
    direction_to_latlon,
    fibonacci_grid,
    random_direction,
    spin_state,
)
from .errors import (
    ChannelError,
    ConfigurationError,
    NumericalFailureError,
    PositivityError,
    QtriError,
    SizeLimitError,
)
from .estimators import (
    FrameEstimate,
    LocalMeasurementRecord,
    estimate_frame_vector,
    estimate_mle,
    simulate_local_measurement,
)
from .experiments import (
    BenchmarkConfig,
    Summary,
    TrialResult,
    export,
    fit_power_law,
    run_session,
    run_trials,
    summarize,
)
from .protocol import (
    GroundTruth,
    OutcomeRecord,
    ProtocolConfig,
    Transcript,
    alice_measure,
    bob_collapsed_state,
    pattern_state,
    sample_truth,
    transcript_to_json,
)
from .seesaw import (
    Povm,
    SeesawConfig,
    SeesawResult,
    brute_force_oracle,
    guess_update,
    mean_fidelity,
    povm_update,
    score_operators,
    seesaw_optimize,
)

__version__ = "0.1.0"

__all__ = [
    "Direction",
    "SphereGrid",
    "angle_between",
    "direction_fidelity",
    "direction_to_latlon",
    "fibonacci_grid",
    "random_direction",
    "spin_state",
    "QtriError",
    "SizeLimitError",
    "NumericalFailureError",
    "PositivityError",
    "ConfigurationError",
    "ChannelError",
    "FrameEstimate",
    "LocalMeasurementRecord",
    "simulate_local_measurement",
    "estimate_frame_vector",
    "estimate_mle",
    "GroundTruth",
    "OutcomeRecord",
    "ProtocolConfig",
    "Transcript",
    "alice_measure",
    "bob_collapsed_state",
    "pattern_state",
    "sample_truth",
    "transcript_to_json",
    "Povm",
    "SeesawConfig",
    "SeesawResult",
    "score_operators",
    "mean_fidelity",
    "povm_update",
    "guess_update",
    "seesaw_optimize",
    "brute_force_oracle",
    "BenchmarkConfig",
    "TrialResult",
    "Summary",
    "run_session",
    "run_trials",
    "summarize",
    "fit_power_law",
    "export",
]
