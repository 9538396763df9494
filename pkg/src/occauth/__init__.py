"""Two-channel vehicle authentication testbench.

Encode payload classes as headlight flash frames, simulate the optical
camera channel, decode with a classical slot-aligned decoder, and drive the
three-party challenge-response protocol against honest vehicles and
attackers.
"""

from .frame_codec import (
    ALL_ZERO_CODE,
    NUM_VALID_CLASSES,
    RANDOM_FLASH_CODE,
    ClassLabel,
    SecurityFrame,
    Symbol,
    decode_symbols,
    encode_class,
    mirror,
    symbol_value,
)
from .occ_channel import (
    ChannelParams,
    EmissionSchedule,
    LuminanceTrace,
    Scene,
    SceneEmitter,
    build_schedule,
    extract_rois,
    sample_trace,
    validate_params,
)
from .reference_decoder import (
    DecodeResult,
    DecoderConfig,
    decode,
    estimate_threshold,
    find_preamble,
    template_correlate,
)
from .protocol import (
    AuthSession,
    AuthToken,
    Challenge,
    HonestVehicle,
    RegistrationAuthority,
    Rsu,
    SessionState,
    VehicleCredential,
    audit_transcript,
    run_scene_sessions,
    run_session,
)
from .timing import TimingParams, flash_schedule_duration, max_bits, t_auth, t_latency
from .scenario import (
    LIGHTING_PRESETS,
    MetricsReport,
    ScenarioConfig,
    export_dataset,
    load_config,
    run_scenario,
)

__version__ = "0.1.0"
