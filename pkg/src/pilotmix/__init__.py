"""Coded random access with pilot-mixture preambles and nested SIC over a
massive-MIMO Rayleigh block-fading uplink: link-level simulator, collision
model, and closed-form benchmarks."""

from .analysis import (
    BoundQuery,
    Scenario,
    collision_prob,
    plr_framed_nosic,
    plr_lower_bound,
    plr_slotted_nosic,
)
from .baseband import (
    PilotBook,
    SlotSignal,
    build_preamble,
    estimate_channel_mf,
    estimate_payload_mrc,
    rayleigh_channel,
    synthesize_slot,
)
from .collision import (
    FrameGrid,
    build_grid,
    enumerate_nosic_slot_plr,
    has_singleton,
    peel_frame,
    synthetic_transmission,
    transmissions_from_lines,
    transmissions_to_lines,
    unresolvable_collision_count,
)
from .core import (
    ConfigError,
    DegreeDistribution,
    ProtocolConfig,
    ReceiverMode,
    UserTransmission,
    config_from_dict,
    derive_choices,
    load_config,
    mean_degree,
    validate_config,
)
from .harness import (
    Engine,
    PlrEstimate,
    SweepSpec,
    run_sweep,
    run_trial,
    sample_frame,
    trial_rng,
    wilson_interval,
    write_csv,
)
from .receiver import (
    DecodedPacket,
    FrameState,
    inner_sic_subtract,
    outer_sic_estimate,
    outer_sic_subtract,
    process_slot,
    run_frame,
)

__version__ = "0.1.0"
