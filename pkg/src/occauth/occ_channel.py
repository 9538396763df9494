"""Line-of-sight optical channel: emission schedules, camera sampling, scenes.

The emitter model is deliberately simple: during a flash slot an "on"
headlight is lit for the whole slot.  The camera integrates light over each
exposure window (box filter), attenuated by distance with an inverse-square
law clamped at the reference distance, plus ambient light and per-frame
Gaussian noise.  One jitter draw per trace misaligns the whole schedule;
frames drop independently.  All randomness is counter-seeded (see _seeds).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from . import _kernels
from ._seeds import child_seed, id_token, stream
from .frame_codec import SecurityFrame, Symbol

__all__ = [
    "ChannelParams",
    "ChannelParamsError",
    "SceneAmbiguityError",
    "EmissionSchedule",
    "LuminanceTrace",
    "SceneEmitter",
    "Scene",
    "validate_params",
    "build_schedule",
    "sample_trace",
    "extract_rois",
    "vehicle_channel_params",
    "frame_count",
]

# Streams hanging off ChannelParams.seed.
_STREAM_TRACE = 0x7261
_STREAM_VEHICLE = 0x7665


class ChannelParamsError(ValueError):
    """Raised when sampling is attempted with invalid channel parameters."""


class SceneAmbiguityError(ValueError):
    """Emitters too close laterally to be separated into distinct ROIs."""


@dataclass(frozen=True)
class ChannelParams:
    """Camera and channel configuration.

    The exposure window equals one frame period (T_e = 1/fps); pulse and
    guard widths describe the strictest symbol the sensor could resolve and
    must fit inside one exposure.  Distance attenuation is
    clamp(ref_luminance * (ref_distance_m / distance_m)**2, 0, 1); defaults
    put full brightness at the 25 m nominal operating distance.
    """

    fps: float = 30.0
    pulse_width_s: float = 0.010
    guard_width_s: float = 0.004
    distance_m: float = 25.0
    ambient_level: float = 0.05
    noise_sigma: float = 0.0
    jitter_sigma: float = 0.01
    frame_drop_prob: float = 0.0
    mirror_view: bool = False
    seed: int = 0
    ref_luminance: float = 1.0
    ref_distance_m: float = 25.0

    @property
    def exposure_s(self) -> float:
        return 1.0 / self.fps

    @property
    def min_duty_cycle(self) -> float:
        return self.pulse_width_s * self.fps

    @property
    def on_amplitude(self) -> float:
        return float(np.clip(
            self.ref_luminance * (self.ref_distance_m / self.distance_m) ** 2, 0.0, 1.0))


def validate_params(p: ChannelParams) -> list:
    """Return the violated channel constraints (empty list means ok).

    Exactly the four exposure/pulse relations are checked: T_e = 1/fps is
    well defined, PW_s < T_e, PW_s + PW_g < T_e, and DC_min = PW_s/T_e lies
    in (0, 1).
    """
    violations = []
    if p.fps <= 0:
        violations.append("T_e = 1/fps requires fps > 0")
        return violations
    t_e = p.exposure_s
    if not p.pulse_width_s < t_e:
        violations.append("PW_s < T_e")
    if not p.pulse_width_s + p.guard_width_s < t_e:
        violations.append("PW_s + PW_g < T_e")
    if not 0.0 < p.min_duty_cycle < 1.0:
        violations.append("DC_min = PW_s/T_e in (0,1)")
    return violations


@dataclass(frozen=True)
class EmissionSchedule:
    """Contiguous flash slots of equal duration, each carrying one symbol."""

    slots: tuple  # ((start_s, Symbol), ...)
    slot_duration: float

    def __post_init__(self):
        slots = tuple((float(t), Symbol(s)) for t, s in self.slots)
        object.__setattr__(self, "slots", slots)
        for (t0, _), (t1, _) in zip(slots, slots[1:]):
            if abs(t1 - t0 - self.slot_duration) > 1e-9:
                raise ValueError("slots must be contiguous with spacing slot_duration")

    @property
    def start_time(self) -> float:
        return self.slots[0][0] if self.slots else 0.0

    @property
    def end_time(self) -> float:
        return self.slots[-1][0] + self.slot_duration if self.slots else 0.0

    @property
    def span(self) -> float:
        return self.end_time - self.start_time

    @property
    def symbols(self) -> tuple:
        return tuple(s for _, s in self.slots)

    def bit_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        left = np.array([s.left_bit for _, s in self.slots], dtype=np.uint8)
        right = np.array([s.right_bit for _, s in self.slots], dtype=np.uint8)
        return left, right

    def shifted(self, dt: float) -> "EmissionSchedule":
        return EmissionSchedule(tuple((t + dt, s) for t, s in self.slots), self.slot_duration)

    def latest_transmission_instant(self, i: int, pulse_width_s: float, guard_width_s: float) -> float:
        """Strict-sync bound: a slot-i pulse must end (pulse+guard) before slot i+1."""
        next_start = self.slots[i][0] + self.slot_duration
        return next_start - (pulse_width_s + guard_width_s)


def build_schedule(frame, t_f: float, start: float = 0.0) -> EmissionSchedule:
    """Lay out a frame (or any symbol sequence) as flash slots of duration t_f."""
    if t_f <= 0:
        raise ValueError(f"t_f must be positive, got {t_f}")
    symbols = frame.symbols if isinstance(frame, SecurityFrame) else tuple(Symbol(s) for s in frame)
    slots = tuple((start + i * t_f, s) for i, s in enumerate(symbols))
    return EmissionSchedule(slots, t_f)


@dataclass
class LuminanceTrace:
    """Per-camera-frame ROI brightness for the two emitters.

    Dropped frames keep their timestamp and hold nan luminance; consumers
    must mask on ``valid``.
    """

    timestamps: np.ndarray
    left: np.ndarray
    right: np.ndarray
    dropped: np.ndarray
    fps: float

    @property
    def n_frames(self) -> int:
        return len(self.timestamps)

    @property
    def valid(self) -> np.ndarray:
        return ~self.dropped

    @property
    def exposure_s(self) -> float:
        return 1.0 / self.fps

    def frames(self):
        """Iterate (timestamp, left_lum, right_lum, dropped) tuples."""
        for i in range(self.n_frames):
            yield (float(self.timestamps[i]), float(self.left[i]),
                   float(self.right[i]), bool(self.dropped[i]))

    def to_tsv(self) -> str:
        """Canonical serialized form; determinism is asserted on these bytes."""
        lines = ["t\tleft\tright\tdropped"]
        for t, l, r, d in self.frames():
            lines.append(f"{t:.9f}\t{l:.9f}\t{r:.9f}\t{int(d)}")
        return "\n".join(lines) + "\n"


def frame_count(capture_duration: float, fps: float) -> int:
    """floor(capture_duration * fps), guarded against float grid wobble."""
    return int(np.floor(capture_duration * fps + 1e-9))


def _check_sampling_params(p: ChannelParams) -> None:
    violations = validate_params(p)
    if p.guard_width_s < 0:
        violations.append("PW_g >= 0")
    if not 0.0 <= p.ambient_level <= 1.0:
        violations.append("ambient_level in [0,1]")
    if p.noise_sigma < 0 or p.jitter_sigma < 0:
        violations.append("noise/jitter sigma >= 0")
    if not 0.0 <= p.frame_drop_prob <= 1.0:
        violations.append("frame_drop_prob in [0,1]")
    if p.distance_m <= 0:
        violations.append("distance_m > 0")
    if violations:
        raise ChannelParamsError("invalid channel parameters: " + "; ".join(violations))


def sample_trace(schedule: Optional[EmissionSchedule], p: ChannelParams,
                 capture_duration: float,
                 extra_ambient: Optional[np.ndarray] = None) -> LuminanceTrace:
    """Sample what the camera sees over [0, capture_duration).

    ``extra_ambient`` is an optional per-frame additive term (cross-emitter
    leakage in multi-vehicle scenes).  A ``None`` schedule means darkness.
    """
    _check_sampling_params(p)
    n = frame_count(capture_duration, p.fps)
    t = np.arange(n, dtype=np.float64) / p.fps
    if schedule is not None and capture_duration + 1e-9 < schedule.end_time:
        raise ValueError("capture_duration must cover the emission schedule")

    rng = stream(p.seed, _STREAM_TRACE)
    # Common random numbers across parameter grids: draw in fixed order and
    # scale, so e.g. a noise sweep reuses identical noise shapes.
    jitter = float(rng.standard_normal()) * p.jitter_sigma
    noise = rng.standard_normal((2, n)) * p.noise_sigma
    drop_u = rng.random(n)

    if schedule is not None and len(schedule.slots) > 0:
        lbits, rbits = schedule.bit_arrays()
        lfrac, rfrac = _kernels.frame_on_fractions(
            t, p.exposure_s, schedule.start_time + jitter, schedule.slot_duration,
            lbits, rbits)
    else:
        lfrac = np.zeros(n)
        rfrac = np.zeros(n)

    amp = p.on_amplitude
    left = p.ambient_level + amp * lfrac + noise[0]
    right = p.ambient_level + amp * rfrac + noise[1]
    if extra_ambient is not None:
        left = left + extra_ambient
        right = right + extra_ambient
    left = np.clip(left, 0.0, 1.0)
    right = np.clip(right, 0.0, 1.0)

    if p.mirror_view:
        left, right = right, left

    dropped = drop_u < p.frame_drop_prob
    left[dropped] = np.nan
    right[dropped] = np.nan
    return LuminanceTrace(timestamps=t, left=left, right=right, dropped=dropped, fps=p.fps)


@dataclass(frozen=True)
class SceneEmitter:
    vehicle_id: str
    lane_offset_m: float
    distance_m: float
    schedule: Optional[EmissionSchedule]


@dataclass(frozen=True)
class Scene:
    """Several flashing vehicles in one camera view."""

    emitters: tuple
    camera_height_m: float = 3.5

    def __post_init__(self):
        ids = [e.vehicle_id for e in self.emitters]
        if len(set(ids)) != len(ids):
            raise ValueError("vehicle ids must be unique")


def vehicle_channel_params(p: ChannelParams, emitter: SceneEmitter) -> ChannelParams:
    """Per-vehicle channel view: own distance, own counter-seeded stream."""
    return replace(p, distance_m=emitter.distance_m,
                   seed=child_seed(p.seed, _STREAM_VEHICLE, id_token(emitter.vehicle_id)))


def extract_rois(scene: Scene, p: ChannelParams, capture_duration: float,
                 leak_coeff: float = 0.5, leak_ceiling: float = 0.05,
                 min_separation_m: float = 0.5,
                 obstructed_ids=frozenset()) -> Dict[str, LuminanceTrace]:
    """One independent trace per vehicle ROI.

    Neighbours bleed into each other's ROI as extra ambient light scaled by
    inverse squared lateral separation, capped at ``leak_ceiling``.  Emitters
    closer laterally than ``min_separation_m`` cannot be separated.
    Vehicles in ``obstructed_ids`` have their ROI blocked at the camera:
    their own trace sees no emission, while their light still leaks into
    neighbouring ROIs.
    """
    for i, a in enumerate(scene.emitters):
        for b in scene.emitters[i + 1:]:
            if abs(a.lane_offset_m - b.lane_offset_m) < min_separation_m:
                raise SceneAmbiguityError(
                    f"emitters {a.vehicle_id!r} and {b.vehicle_id!r} overlap laterally")

    n = frame_count(capture_duration, p.fps)
    t = np.arange(n, dtype=np.float64) / p.fps

    # Each vehicle's combined glow (headlight average, distance-attenuated),
    # jitter-free: leakage is a coarse background term, not a decodable copy.
    glow = {}
    for e in scene.emitters:
        if e.schedule is not None and len(e.schedule.slots) > 0:
            lbits, rbits = e.schedule.bit_arrays()
            lf, rf = _kernels.frame_on_fractions(
                t, p.exposure_s, e.schedule.start_time, e.schedule.slot_duration,
                lbits, rbits)
            amp = replace(p, distance_m=e.distance_m).on_amplitude
            glow[e.vehicle_id] = amp * 0.5 * (lf + rf)
        else:
            glow[e.vehicle_id] = np.zeros(n)

    traces = {}
    for e in scene.emitters:
        leak = np.zeros(n)
        for other in scene.emitters:
            if other.vehicle_id == e.vehicle_id:
                continue
            sep = abs(e.lane_offset_m - other.lane_offset_m)
            weight = min(leak_ceiling, leak_coeff / (sep * sep))
            leak += weight * glow[other.vehicle_id]
        schedule = None if e.vehicle_id in obstructed_ids else e.schedule
        traces[e.vehicle_id] = sample_trace(
            schedule, vehicle_channel_params(p, e), capture_duration,
            extra_ambient=leak if len(scene.emitters) > 1 else None)
    return traces
