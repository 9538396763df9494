"""Attacker behaviours and Monte Carlo campaigns against the protocol.

Profiles mirror the threat model: remote impersonation (messages only, no
light), proximity replay (re-flashing a recorded response), blind uniform
guessing, and camera obstruction.  Campaigns measure token-issue rates with
Wilson intervals; the guessing bound for a fresh uniform challenge over 27
classes is 1/27 per attempt.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ._seeds import child_seed
from .frame_codec import Symbol, encode_class
from .protocol import (
    AuthSession,
    Challenge,
    RegistrationAuthority,
    Rsu,
    SessionState,
    VehicleCredential,
    run_scene_sessions,
    run_session,
)

__all__ = [
    "AttackerKind",
    "AttackerProfile",
    "CampaignResult",
    "CAMPAIGN_CSV_HEADER",
    "SilentResponder",
    "ReplayResponder",
    "GuessResponder",
    "attack_remote",
    "attack_replay",
    "attack_guess",
    "attack_obstruct",
]

_STREAM_TRIAL = 0x7472


class AttackerKind(enum.Enum):
    REMOTE_IMPERSONATOR = "remote_impersonator"
    PROXIMITY_REPLAYER = "proximity_replayer"
    UNIFORM_GUESSER = "uniform_guesser"
    CAMERA_OBSTRUCTOR = "camera_obstructor"


@dataclass(frozen=True)
class AttackerProfile:
    kind: AttackerKind
    holds_stolen_credential: bool = False
    has_los_emitter: bool = False
    can_record_los: bool = False
    can_block_camera: bool = False

    def __post_init__(self):
        if self.kind is AttackerKind.REMOTE_IMPERSONATOR and self.has_los_emitter:
            raise ValueError("a remote impersonator has no line-of-sight emitter")
        if self.kind is AttackerKind.PROXIMITY_REPLAYER and not (
                self.can_record_los and self.has_los_emitter):
            raise ValueError("a proximity replayer must record and re-emit light")

    @classmethod
    def remote_impersonator(cls, stolen_credential: bool = True) -> "AttackerProfile":
        return cls(AttackerKind.REMOTE_IMPERSONATOR,
                   holds_stolen_credential=stolen_credential)

    @classmethod
    def proximity_replayer(cls) -> "AttackerProfile":
        return cls(AttackerKind.PROXIMITY_REPLAYER, holds_stolen_credential=True,
                   has_los_emitter=True, can_record_los=True)

    @classmethod
    def uniform_guesser(cls) -> "AttackerProfile":
        return cls(AttackerKind.UNIFORM_GUESSER, holds_stolen_credential=True,
                   has_los_emitter=True)

    @classmethod
    def camera_obstructor(cls) -> "AttackerProfile":
        return cls(AttackerKind.CAMERA_OBSTRUCTOR, can_block_camera=True)


CAMPAIGN_CSV_HEADER = "profile,trials,successes,rate,ci_low,ci_high"


@dataclass
class CampaignResult:
    profile: str
    trials: int
    successes: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def wilson_ci(self, z: float = 1.96) -> Tuple[float, float]:
        if self.trials == 0:
            return 0.0, 0.0
        n, p = self.trials, self.rate
        denom = 1.0 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
        return max(0.0, center - half), min(1.0, center + half)

    def csv_row(self) -> str:
        lo, hi = self.wilson_ci()
        return f"{self.profile},{self.trials},{self.successes},{self.rate:.6f},{lo:.6f},{hi:.6f}"


@dataclass
class SilentResponder:
    """Network-only attacker: may talk to the registry but emits no light."""

    vehicle_id: str
    credential: Optional[VehicleCredential] = None
    reaction_delay: float = 0.0

    def respond(self, challenge: Challenge, rng) -> Optional[Sequence[Symbol]]:
        return None


@dataclass
class ReplayResponder:
    """Re-flashes a pattern recorded from an earlier honest session."""

    vehicle_id: str
    credential: Optional[VehicleCredential]
    recorded_pattern: tuple
    reaction_delay: float = 0.2

    def respond(self, challenge: Challenge, rng) -> Optional[Sequence[Symbol]]:
        return self.recorded_pattern


@dataclass
class GuessResponder:
    """Flashes a uniformly random valid frame each attempt."""

    vehicle_id: str
    credential: Optional[VehicleCredential]
    reaction_delay: float = 0.2

    def respond(self, challenge: Challenge, rng) -> Optional[Sequence[Symbol]]:
        return encode_class(int(rng.integers(1, 28))).symbols


def _campaign(responder, rsu: Rsu, ra: RegistrationAuthority, trials: int,
              master_seed: int, profile_name: str,
              forced_challenge: Optional[Challenge] = None):
    sessions: List[AuthSession] = []
    successes = 0
    for trial in range(trials):
        session = run_session(responder, rsu, ra, child_seed(master_seed, _STREAM_TRIAL, trial),
                              forced_challenge=forced_challenge)
        sessions.append(session)
        if session.state is SessionState.TOKEN_ISSUED:
            successes += 1
    return CampaignResult(profile_name, trials, successes), sessions


def attack_remote(profile: AttackerProfile, rsu: Rsu, ra: RegistrationAuthority,
                  trials: int, master_seed: int,
                  stolen_credential: Optional[VehicleCredential] = None):
    """Remote impersonation trials: falsified messages, no physical presence."""
    if profile.kind is not AttackerKind.REMOTE_IMPERSONATOR:
        raise ValueError(f"expected remote impersonator profile, got {profile.kind}")
    cred = stolen_credential if profile.holds_stolen_credential else None
    vid = cred.vehicle_id if cred is not None else "ghost-vehicle"
    responder = SilentResponder(vehicle_id=vid, credential=cred)
    return _campaign(responder, rsu, ra, trials, master_seed, "remote_impersonator")


def attack_replay(profile: AttackerProfile, recorded_pattern, rsu: Rsu,
                  ra: RegistrationAuthority, trials: int, master_seed: int,
                  stolen_credential: VehicleCredential,
                  reuse_challenge: Optional[Challenge] = None):
    """Replay a recorded flash pattern against fresh (or illegally reused) challenges."""
    if profile.kind is not AttackerKind.PROXIMITY_REPLAYER:
        raise ValueError(f"expected proximity replayer profile, got {profile.kind}")
    responder = ReplayResponder(vehicle_id=stolen_credential.vehicle_id,
                                credential=stolen_credential,
                                recorded_pattern=tuple(recorded_pattern))
    return _campaign(responder, rsu, ra, trials, master_seed, "proximity_replayer",
                     forced_challenge=reuse_challenge)


def attack_guess(profile: AttackerProfile, rsu: Rsu, ra: RegistrationAuthority,
                 trials: int, master_seed: int,
                 stolen_credential: VehicleCredential):
    """Uniform random guessing over the 27 valid frames."""
    if profile.kind is not AttackerKind.UNIFORM_GUESSER:
        raise ValueError(f"expected uniform guesser profile, got {profile.kind}")
    responder = GuessResponder(vehicle_id=stolen_credential.vehicle_id,
                               credential=stolen_credential)
    return _campaign(responder, rsu, ra, trials, master_seed, "uniform_guesser")


def attack_obstruct(profile: AttackerProfile, participants, victim_id: str,
                    rsu: Rsu, ra: RegistrationAuthority, seed: int) -> Dict[str, AuthSession]:
    """Blind the victim's camera ROI in a shared scene; bystanders untouched.

    Returns all concurrent sessions.  Run with the same seed and
    ``obstructed_ids=[]`` (via run_scene_sessions) for the baseline.
    """
    if profile.kind is not AttackerKind.CAMERA_OBSTRUCTOR:
        raise ValueError(f"expected camera obstructor profile, got {profile.kind}")
    ids = [vehicle.vehicle_id for vehicle, _, _ in participants]
    if victim_id not in ids:
        raise ValueError(f"victim {victim_id!r} not in scene")
    return run_scene_sessions(participants, rsu, ra, seed,
                              obstructed_ids=frozenset({victim_id}))
