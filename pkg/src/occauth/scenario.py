"""Batch scenario runner: config parsing, Monte Carlo campaigns, exports.

Configs are flat ``key=value`` lines with dotted section prefixes
(``timing.d=25``).  A lighting preset seeds (ambient_level, noise_sigma);
explicit ``channel.*`` keys override it.  Every run is reproducible: the same
config and master seed produce byte-identical metrics and transcripts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ._seeds import child_seed, stream
from .adversary import (
    CAMPAIGN_CSV_HEADER,
    AttackerProfile,
    CampaignResult,
    attack_guess,
    attack_obstruct,
    attack_remote,
    attack_replay,
)
from .clips import export_clip
from .frame_codec import (
    ALL_ZERO_CODE,
    NUM_VALID_CLASSES,
    RANDOM_FLASH_CODE,
    Symbol,
    decode_symbols,
    encode_class,
)
from .occ_channel import ChannelParams, build_schedule, sample_trace, validate_params
from .protocol import (
    AuthSession,
    HonestVehicle,
    RegistrationAuthority,
    Rsu,
    SessionState,
    run_scene_sessions,
    run_session,
)
from .timing import TimingParams

__all__ = [
    "LIGHTING_PRESETS",
    "ScenarioConfig",
    "MetricsReport",
    "load_config",
    "parse_config_text",
    "run_scenario",
    "export_dataset",
    "METRICS_CSV_HEADER",
]

# (ambient_level, noise_sigma) per lighting condition; implementation
# constants, chosen so daylight is the benign regime and night the harshest.
LIGHTING_PRESETS = {
    "day_sunny": (0.10, 0.05),
    "day_cloudy": (0.06, 0.07),
    "sunset": (0.15, 0.09),
    "night": (0.02, 0.12),
}

METRICS_CSV_HEADER = ("kind,trial,vehicle_id,challenge_class,decoded_code,"
                      "outcome,reason,score,alignment_s,latency_s,metric,value")

ATTACK_PROFILES = ("remote", "remote_no_credential", "replay", "guess", "obstruct")

# Scenario-level stream ids.
_STREAM_TRIAL = 0x7363
_STREAM_RECORD = 0x7265
_STREAM_EXPORT = 0x6578
_STREAM_RA = 0x656E


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    trials: int = 100
    master_seed: int = 0
    lighting_preset: str = "day_sunny"
    timing: TimingParams = TimingParams()
    channel: ChannelParams = ChannelParams()
    capture_duration: float = 1.8
    reaction_delay: float = 0.2
    nlos_latency: float = 0.05
    attack_profile: Optional[str] = None
    export_count_per_class: int = 0
    export_capture_duration: float = 2.0
    lockout_threshold: Optional[int] = None
    scene_bystander_offset_m: float = 3.5

    def validate(self) -> None:
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if self.lighting_preset not in LIGHTING_PRESETS:
            raise ValueError(f"unknown lighting preset {self.lighting_preset!r}")
        if self.attack_profile is not None and self.attack_profile not in ATTACK_PROFILES:
            raise ValueError(f"unknown attack profile {self.attack_profile!r}")
        violations = validate_params(self.channel)
        if violations:
            raise ValueError("channel constraint violations: " + "; ".join(violations))
        if self.capture_duration < self.nlos_latency + self.reaction_delay + 7 * self.timing.t_f:
            raise ValueError("capture_duration too short for a full response")

    def rsu(self) -> Rsu:
        return Rsu(channel=self.channel, timing=self.timing,
                   capture_duration=self.capture_duration,
                   nlos_latency=self.nlos_latency,
                   lockout_threshold=self.lockout_threshold)


_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _parse_value(raw: str):
    value = raw.strip()
    if value.lower() in _BOOL_VALUES:
        return _BOOL_VALUES[value.lower()]
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def parse_config_text(text: str) -> ScenarioConfig:
    entries: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno} is not key=value: {line!r}")
        key, _, raw = line.partition("=")
        entries[key.strip()] = _parse_value(raw)

    preset = str(entries.get("lighting_preset", "day_sunny"))
    ambient, noise = LIGHTING_PRESETS.get(preset, LIGHTING_PRESETS["day_sunny"])

    timing_kwargs = {}
    for key in ("d", "v", "t_f", "t_c"):
        if f"timing.{key}" in entries:
            timing_kwargs[key] = entries[f"timing.{key}"]
    timing = TimingParams(**timing_kwargs)

    channel_kwargs = {"ambient_level": ambient, "noise_sigma": noise, "seed": 0}
    for key in ("fps", "pulse_width_s", "guard_width_s", "distance_m", "ambient_level",
                "noise_sigma", "jitter_sigma", "frame_drop_prob", "mirror_view",
                "ref_luminance", "ref_distance_m"):
        if f"channel.{key}" in entries:
            channel_kwargs[key] = entries[f"channel.{key}"]
    channel = ChannelParams(**channel_kwargs)

    lockout = entries.get("session.lockout_threshold")
    return ScenarioConfig(
        name=str(entries.get("name", "scenario")),
        trials=int(entries.get("trials", 100)),
        master_seed=int(entries.get("master_seed", 0)),
        lighting_preset=preset,
        timing=timing,
        channel=channel,
        capture_duration=float(entries.get("session.capture_duration", 1.8)),
        reaction_delay=float(entries.get("session.reaction_delay", 0.2)),
        nlos_latency=float(entries.get("session.nlos_latency", 0.05)),
        attack_profile=(str(entries["attack.profile"]) if "attack.profile" in entries else None),
        export_count_per_class=int(entries.get("export.count_per_class", 0)),
        export_capture_duration=float(entries.get("export.capture_duration", 2.0)),
        lockout_threshold=(int(lockout) if lockout is not None else None),
        scene_bystander_offset_m=float(entries.get("scene.bystander_offset_m", 3.5)),
    )


def load_config(path) -> ScenarioConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


@dataclass
class MetricsReport:
    header: str = METRICS_CSV_HEADER
    trial_rows: List[str] = field(default_factory=list)
    aggregate_rows: List[str] = field(default_factory=list)
    transcripts: List[Tuple[str, str]] = field(default_factory=list)
    campaign: Optional[CampaignResult] = None

    def csv_text(self) -> str:
        return "\n".join([self.header, *self.trial_rows, *self.aggregate_rows]) + "\n"

    def aggregate(self, metric: str) -> Optional[float]:
        for row in self.aggregate_rows:
            cols = row.split(",")
            if cols[10] == metric:
                return float(cols[11]) if cols[11] not in ("", "nan") else math.nan
        return None

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(self.csv_text(), encoding="utf-8")
        tdir = out / "transcripts"
        tdir.mkdir(exist_ok=True)
        for name, text in self.transcripts:
            (tdir / name).write_text(text, encoding="utf-8")
        if self.campaign is not None:
            (out / "attack_results.csv").write_text(
                CAMPAIGN_CSV_HEADER + "\n" + self.campaign.csv_row() + "\n", encoding="utf-8")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _trial_row(trial: int, session: AuthSession) -> str:
    challenge = session.challenge
    result = session.decode_result
    latency = None
    if result is not None and challenge is not None and session.decode_done_at is not None:
        latency = session.decode_done_at - challenge.issued_at
    cols = [
        "trial", str(trial), session.vehicle_id,
        _fmt(challenge.class_label.code if challenge else None),
        _fmt(result.label.code if result else None),
        session.state.value,
        session.reject_reason or "",
        _fmt(result.score if result else None),
        _fmt(result.slot_alignment if result else None),
        _fmt(latency),
        "", "",
    ]
    return ",".join(cols)


def _aggregate_row(metric: str, value) -> str:
    return ",".join(["aggregate", "", "", "", "", "", "", "", "", "", metric, _fmt(value)])


def _honest_aggregates(sessions: List[AuthSession]) -> List[str]:
    rows = []
    n = len(sessions)
    tokens = sum(1 for s in sessions if s.state is SessionState.TOKEN_ISSUED)
    rows.append(_aggregate_row("acceptance_rate", tokens / n if n else 0.0))

    decoded = [s for s in sessions if s.decode_result is not None and s.challenge is not None]
    correct = sum(1 for s in decoded
                  if s.decode_result.label.code == s.challenge.class_label.code)
    rows.append(_aggregate_row("decode_accuracy", correct / len(decoded) if decoded else 0.0))

    latencies = [s.decode_done_at - s.challenge.issued_at for s in decoded
                 if s.decode_done_at is not None]
    rows.append(_aggregate_row("mean_decode_latency_s",
                               sum(latencies) / len(latencies) if latencies else 0.0))

    reasons: Dict[str, int] = {}
    for s in sessions:
        if s.state is SessionState.REJECTED:
            reasons[s.reject_reason or "unknown"] = reasons.get(s.reject_reason or "unknown", 0) + 1
    for reason in sorted(reasons):
        rows.append(_aggregate_row(f"rejections_{reason}", reasons[reason]))

    for k in range(1, NUM_VALID_CLASSES + 1):
        challenged = [s for s in decoded if s.challenge.class_label.code == k]
        if challenged:
            ok = sum(1 for s in challenged
                     if s.decode_result.label.code == k)
            rows.append(_aggregate_row(f"class_accuracy_{k:02d}", ok / len(challenged)))
        else:
            rows.append(_aggregate_row(f"class_accuracy_{k:02d}", None))
    return rows


def _build_parties(cfg: ScenarioConfig):
    ra = RegistrationAuthority.with_seed(child_seed(cfg.master_seed, _STREAM_RA))
    enroll_rng = stream(cfg.master_seed, _STREAM_RA, 1)
    cred = ra.enroll("veh-001", enroll_rng)
    vehicle = HonestVehicle(credential=cred, vehicle_id="veh-001",
                            reaction_delay=cfg.reaction_delay)
    return ra, cred, vehicle


def _recorded_pattern(cfg: ScenarioConfig, ra, vehicle) -> tuple:
    """Observe one honest session and keep its flash pattern for replays."""
    rsu = cfg.rsu()
    session = run_session(vehicle, rsu, ra, child_seed(cfg.master_seed, _STREAM_RECORD))
    return encode_class(session.challenge.class_label).symbols


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> MetricsReport:
    """Execute the configured trials and produce the metrics report.

    Honest scenarios run one session per trial; attack scenarios run the
    configured campaign.  Writes metrics.csv, transcripts/ and (for attacks)
    attack_results.csv under out_dir when given.
    """
    cfg.validate()
    report = MetricsReport()
    ra, cred, vehicle = _build_parties(cfg)
    rsu = cfg.rsu()

    if cfg.attack_profile is None:
        sessions = []
        for trial in range(cfg.trials):
            session = run_session(vehicle, rsu, ra,
                                  child_seed(cfg.master_seed, _STREAM_TRIAL, trial))
            sessions.append(session)
            report.trial_rows.append(_trial_row(trial, session))
            report.transcripts.append((f"trial_{trial:05d}.tsv", session.transcript_text()))
        if cfg.trials:
            report.aggregate_rows = _honest_aggregates(sessions)
    elif cfg.attack_profile == "obstruct":
        sessions_by_trial = []
        profile = AttackerProfile.camera_obstructor()
        bystander_cred = ra.enroll("veh-002", stream(cfg.master_seed, _STREAM_RA, 2))
        for trial in range(cfg.trials):
            victim = replace(vehicle)
            bystander = HonestVehicle(credential=bystander_cred, vehicle_id="veh-002",
                                      reaction_delay=cfg.reaction_delay)
            participants = [
                (victim, 0.0, cfg.channel.distance_m),
                (bystander, cfg.scene_bystander_offset_m, cfg.channel.distance_m),
            ]
            outcome = attack_obstruct(profile, participants, "veh-001", rsu, ra,
                                      child_seed(cfg.master_seed, _STREAM_TRIAL, trial))
            sessions_by_trial.append(outcome)
            for vid in ("veh-001", "veh-002"):
                report.trial_rows.append(_trial_row(trial, outcome[vid]))
                report.transcripts.append(
                    (f"trial_{trial:05d}_{vid}.tsv", outcome[vid].transcript_text()))
        flat = [s for outcome in sessions_by_trial for s in outcome.values()]
        if cfg.trials:
            report.aggregate_rows = _honest_aggregates(flat)
    else:
        pattern = _recorded_pattern(cfg, ra, vehicle)
        seed = cfg.master_seed
        if cfg.attack_profile == "remote":
            result, sessions = attack_remote(AttackerProfile.remote_impersonator(True),
                                             rsu, ra, cfg.trials, seed,
                                             stolen_credential=cred)
        elif cfg.attack_profile == "remote_no_credential":
            result, sessions = attack_remote(AttackerProfile.remote_impersonator(False),
                                             rsu, ra, cfg.trials, seed)
        elif cfg.attack_profile == "replay":
            result, sessions = attack_replay(AttackerProfile.proximity_replayer(), pattern,
                                             rsu, ra, cfg.trials, seed,
                                             stolen_credential=cred)
        else:
            result, sessions = attack_guess(AttackerProfile.uniform_guesser(), rsu, ra,
                                            cfg.trials, seed, stolen_credential=cred)
        report.campaign = result
        for trial, session in enumerate(sessions):
            report.trial_rows.append(_trial_row(trial, session))
            report.transcripts.append((f"trial_{trial:05d}.tsv", session.transcript_text()))
        if cfg.trials:
            report.aggregate_rows = [
                _aggregate_row("attack_success_rate", result.rate),
                _aggregate_row("attack_successes", result.successes),
            ]

    if out_dir is not None:
        report.write(out_dir)
    return report


_RANDOM_FLASH_SLOTS = (9, 10)


def _random_flash_pattern(rng) -> tuple:
    """Anomalous flashing: a 9-10 slot random flicker, longer than a frame.

    Real-world anomalies (hazard lights, arbitrary blinking) are not aligned
    with the frame alphabet, so patterns are rejected while any 7-slot window
    comes within one symbol of a valid frame; the slot-aligned decoder then
    classifies every window, and hence the clip, as random flashing.
    """
    valid_frames = [encode_class(k).symbols for k in range(1, NUM_VALID_CLASSES + 1)]
    n_slots = int(rng.choice(_RANDOM_FLASH_SLOTS))
    while True:
        pattern = tuple(Symbol(int(v)) for v in rng.integers(0, 4, size=n_slots))
        if sum(s is not Symbol.OFF for s in pattern) < 3:
            continue  # too dark to read as flashing
        margin = min(
            sum(a is not b for a, b in zip(pattern[i:i + 7], frame))
            for i in range(n_slots - 6)
            for frame in valid_frames)
        if margin >= 2:
            return pattern


def export_dataset(cfg: ScenarioConfig, out_dir) -> List[Path]:
    """Write a balanced synthetic clip dataset: 27 classes plus the all-zero
    and random-flash sentinels, ``export_count_per_class`` clips each."""
    cfg.validate()
    if cfg.export_count_per_class <= 0:
        raise ValueError("export.count_per_class must be set for dataset export")
    out = Path(out_dir)
    clips_dir = out / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)

    codes = list(range(1, NUM_VALID_CLASSES + 1)) + [RANDOM_FLASH_CODE, ALL_ZERO_CODE]
    written = []
    for code in codes:
        for idx in range(cfg.export_count_per_class):
            clip_seed = child_seed(cfg.master_seed, _STREAM_EXPORT, code, idx)
            rng = stream(clip_seed, 0)
            if code == ALL_ZERO_CODE:
                schedule = None
            else:
                if code == RANDOM_FLASH_CODE:
                    pattern = _random_flash_pattern(rng)
                else:
                    pattern = encode_class(code).symbols
                span = len(pattern) * cfg.timing.t_f
                lead_hi = min(0.5, cfg.export_capture_duration - span - 0.05)
                if lead_hi <= 0.1:
                    raise ValueError("export.capture_duration too short for the flash pattern")
                lead_in = float(rng.uniform(0.1, lead_hi))
                schedule = build_schedule(pattern, cfg.timing.t_f, lead_in)
            params = replace(cfg.channel, seed=clip_seed)
            trace = sample_trace(schedule, params, cfg.export_capture_duration)
            clip_dir = clips_dir / f"class_{code:02d}" / f"clip_{idx:04d}"
            manifest = {
                "fps": params.fps,
                "t_f": cfg.timing.t_f,
                "class": code,
                "seed": clip_seed,
                "distance_m": params.distance_m,
                "mirror_view": params.mirror_view,
            }
            export_clip(clip_dir, trace, manifest, ambient=params.ambient_level)
            written.append(clip_dir)
    return written
