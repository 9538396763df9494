"""Three-party authentication protocol: Vehicle, roadside unit, registry.

Phases: a credential check over the reliable network channel, a flash
challenge answered over the optical channel, and a final check that gates
token issuance on both factors.  Sessions are sequential state machines with
append-only transcripts; an auditor can replay any transcript and re-derive
both the state legality and the token condition.
"""

from __future__ import annotations

import enum
import hmac
import math

import numpy as np
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

from ._seeds import child_seed, id_token, stream
from .frame_codec import ClassLabel, Symbol, encode_class, render_symbols
from .occ_channel import (
    ChannelParams,
    EmissionSchedule,
    Scene,
    SceneEmitter,
    build_schedule,
    extract_rois,
    sample_trace,
)
from .reference_decoder import DecodeResult, DecoderConfig, DEFAULT_CONFIG, decode
from .timing import TimingParams, t_auth

__all__ = [
    "ProtocolError",
    "VehicleCredential",
    "Challenge",
    "AuthToken",
    "SessionState",
    "Message",
    "AuthSession",
    "RegistrationAuthority",
    "Rsu",
    "HonestVehicle",
    "nlos_authenticate",
    "issue_challenge",
    "vehicle_respond",
    "check_phase",
    "run_session",
    "run_scene_sessions",
    "audit_transcript",
]

# Stream ids under the session seed.
_STREAM_NONCE = 0x6E6F
_STREAM_CHALLENGE = 0x6368
_STREAM_CHANNEL = 0x6C6F
_STREAM_RESPONDER = 0x7273


class ProtocolError(RuntimeError):
    pass


def _nonce128(rng) -> int:
    hi, lo = rng.integers(0, 1 << 64, size=2, dtype=np.uint64)
    return (int(hi) << 64) | int(lo)


@dataclass(frozen=True)
class VehicleCredential:
    vehicle_id: str
    secret: bytes
    valid_from: float = 0.0
    valid_until: float = math.inf


@dataclass(frozen=True)
class Challenge:
    challenge_id: int      # 128-bit nonce
    class_label: ClassLabel
    issued_at: float
    deadline: float
    target_vehicle: str


@dataclass(frozen=True)
class AuthToken:
    token_id: int
    vehicle_id: str
    issued_at: float
    expires_at: float
    tag: bytes

    def signed_bytes(self) -> bytes:
        return f"{self.token_id:032x}|{self.vehicle_id}|{self.issued_at:.6f}|{self.expires_at:.6f}".encode()


class SessionState(enum.Enum):
    INIT = "Init"
    NLOS_VERIFIED = "NlosVerified"
    CHALLENGE_ISSUED = "ChallengeIssued"
    DECODED = "Decoded"
    TOKEN_ISSUED = "TokenIssued"
    REJECTED = "Rejected"


LEGAL_TRANSITIONS = {
    SessionState.INIT: {SessionState.NLOS_VERIFIED, SessionState.REJECTED},
    SessionState.NLOS_VERIFIED: {SessionState.CHALLENGE_ISSUED, SessionState.REJECTED},
    SessionState.CHALLENGE_ISSUED: {SessionState.DECODED, SessionState.REJECTED},
    SessionState.DECODED: {SessionState.TOKEN_ISSUED, SessionState.REJECTED},
    SessionState.TOKEN_ISSUED: set(),
    SessionState.REJECTED: set(),
}


@dataclass(frozen=True)
class Message:
    time: float
    sender: str
    receiver: str
    kind: str
    summary: str

    def line(self) -> str:
        return f"{self.time:.6f}\t{self.sender}\t{self.receiver}\t{self.kind}\t{self.summary}"


@dataclass
class AuthSession:
    vehicle_id: str
    state: SessionState = SessionState.INIT
    reject_reason: Optional[str] = None
    challenge: Optional[Challenge] = None
    decode_result: Optional[DecodeResult] = None
    decode_done_at: Optional[float] = None
    token: Optional[AuthToken] = None
    transcript: List[Message] = field(default_factory=list)

    def __post_init__(self):
        self.log(0.0, "session", "session", "STATE", self.state.value)

    def log(self, time: float, sender: str, receiver: str, kind: str, summary: str) -> None:
        self.transcript.append(Message(time, sender, receiver, kind, summary))

    def transition(self, new_state: SessionState, time: float,
                   reason: Optional[str] = None) -> None:
        if new_state not in LEGAL_TRANSITIONS[self.state]:
            raise ProtocolError(f"illegal transition {self.state.value} -> {new_state.value}")
        self.state = new_state
        if new_state is SessionState.REJECTED:
            self.reject_reason = reason
        self.log(time, "session", "session", "STATE", new_state.value)

    def transcript_text(self) -> str:
        return "\n".join(m.line() for m in self.transcript) + "\n"


class RegistrationAuthority:
    """Holds enrolled credentials and the token-signing key."""

    def __init__(self, ra_key: bytes, token_lifetime_s: float = 300.0):
        self.ra_key = ra_key
        self.token_lifetime_s = token_lifetime_s
        self.records: Dict[str, VehicleCredential] = {}

    @classmethod
    def with_seed(cls, seed: int, token_lifetime_s: float = 300.0) -> "RegistrationAuthority":
        return cls(stream(seed, 0x7261).bytes(32), token_lifetime_s)

    def enroll(self, vehicle_id: str, rng, valid_from: float = 0.0,
               valid_until: float = math.inf) -> VehicleCredential:
        cred = VehicleCredential(vehicle_id, rng.bytes(32), valid_from, valid_until)
        self.records[vehicle_id] = cred
        return cred

    def verify_credential(self, vehicle_id: str, mac: bytes, context: bytes,
                          now: float) -> Optional[str]:
        """None when valid, else the rejection reason."""
        record = self.records.get(vehicle_id)
        if record is None:
            return "unknown"
        if not record.valid_from <= now <= record.valid_until:
            return "expired"
        expected = hmac.new(record.secret, context, "sha256").digest()
        if not hmac.compare_digest(expected, mac):
            return "tag_mismatch"
        return None

    def issue_token(self, vehicle_id: str, now: float, token_id: int) -> AuthToken:
        token = AuthToken(token_id, vehicle_id, now, now + self.token_lifetime_s, b"")
        tag = hmac.new(self.ra_key, token.signed_bytes(), "sha256").digest()
        return replace(token, tag=tag)

    def verify_token(self, token: AuthToken) -> bool:
        expected = hmac.new(self.ra_key, token.signed_bytes(), "sha256").digest()
        return hmac.compare_digest(expected, token.tag)


@dataclass
class Rsu:
    """Roadside unit: camera, challenge logic, optional LOS-failure lockout."""

    channel: ChannelParams
    timing: TimingParams
    capture_duration: float = 1.8
    nlos_latency: float = 0.05
    decoder_config: DecoderConfig = DEFAULT_CONFIG
    lockout_threshold: Optional[int] = None
    failed_los: Dict[str, int] = field(default_factory=dict)
    seen_challenge_ids: set = field(default_factory=set)

    def locked_out(self, vehicle_id: str) -> bool:
        return (self.lockout_threshold is not None
                and self.failed_los.get(vehicle_id, 0) >= self.lockout_threshold)

    def record_los_failure(self, vehicle_id: str) -> None:
        self.failed_los[vehicle_id] = self.failed_los.get(vehicle_id, 0) + 1


@dataclass
class HonestVehicle:
    """Enrolled vehicle that flashes exactly the challenged pattern."""

    credential: Optional[VehicleCredential]
    vehicle_id: str
    reaction_delay: float = 0.2
    has_emitter: bool = True

    def respond(self, challenge: Challenge, rng) -> Optional[Sequence[Symbol]]:
        if not self.has_emitter:
            return None
        return encode_class(challenge.class_label).symbols


def nlos_authenticate(session: AuthSession, vehicle, ra: RegistrationAuthority,
                      context: bytes, now: float, latency: float) -> float:
    """First factor over the network channel; returns the time after the exchange."""
    if session.state is not SessionState.INIT:
        raise ProtocolError(f"NLOS phase requires Init state, in {session.state.value}")
    cred = getattr(vehicle, "credential", None)
    if cred is not None:
        mac = hmac.new(cred.secret, context, "sha256").digest()
    else:
        mac = b"\x00" * 32
    session.log(now, vehicle.vehicle_id, "ra", "NLOS_HELLO",
                f"vehicle={vehicle.vehicle_id} mac={mac[:8].hex()}")
    now += latency
    reason = ra.verify_credential(vehicle.vehicle_id, mac, context, now)
    if reason is None:
        session.log(now, "ra", vehicle.vehicle_id, "NLOS_RESULT", "ok")
        session.transition(SessionState.NLOS_VERIFIED, now)
    else:
        session.log(now, "ra", vehicle.vehicle_id, "NLOS_RESULT", f"reject:{reason}")
        session.transition(SessionState.REJECTED, now, reason=reason)
    return now


def issue_challenge(session: AuthSession, rng, timing: TimingParams,
                    now: float) -> Challenge:
    """Fresh uniform challenge over the 27 payload classes; single use."""
    if session.state is not SessionState.NLOS_VERIFIED:
        raise ProtocolError(f"challenge requires NlosVerified state, in {session.state.value}")
    if session.challenge is not None:
        raise ProtocolError("challenge already issued for this session")
    class_label = ClassLabel.valid(int(rng.integers(1, 28)))
    challenge_id = _nonce128(rng)
    deadline = now + t_auth(timing.d, timing.v)
    challenge = Challenge(challenge_id, class_label, now, deadline, session.vehicle_id)
    session.challenge = challenge
    session.log(now, "rsu", session.vehicle_id, "CHALLENGE",
                f"challenge_id={challenge_id:032x} class={class_label.code} deadline={deadline:.6f}")
    session.transition(SessionState.CHALLENGE_ISSUED, now)
    return challenge


def vehicle_respond(challenge: Challenge, t_f: float, receipt_time: float = 0.0,
                    reaction_delay: float = 0.0) -> EmissionSchedule:
    """The honest response schedule for a challenge."""
    frame = encode_class(challenge.class_label)
    return build_schedule(frame, t_f, start=receipt_time + reaction_delay)


def check_phase(session: AuthSession, result: DecodeResult, challenge: Challenge,
                ra: RegistrationAuthority, now: float, token_id: int):
    """Token iff the decoded class matches the challenge and arrived in time."""
    if session.state is not SessionState.DECODED:
        raise ProtocolError(f"check phase requires Decoded state, in {session.state.value}")
    if now > challenge.deadline:
        reason = "late"
    elif not result.label.is_valid:
        reason = "malformed"
    elif result.label.code != challenge.class_label.code:
        reason = "wrong_class"
    else:
        reason = None
    if reason is None:
        token = ra.issue_token(session.vehicle_id, now, token_id)
        session.token = token
        session.log(now, "ra", session.vehicle_id, "CHECK_RESULT", "token")
        session.log(now, "ra", session.vehicle_id, "TOKEN",
                    f"token_id={token.token_id:032x} expires_at={token.expires_at:.6f}")
        session.transition(SessionState.TOKEN_ISSUED, now)
        return token
    session.log(now, "ra", session.vehicle_id, "CHECK_RESULT", f"reject:{reason}")
    session.transition(SessionState.REJECTED, now, reason=reason)
    return None


def _begin_session(vehicle, rsu: Rsu, ra: RegistrationAuthority, seed: int,
                   forced_challenge: Optional[Challenge] = None):
    """NLOS phase, lockout gate and challenge issue; returns (session, challenge, capture_start)."""
    session = AuthSession(vehicle.vehicle_id)
    nonce_rng = stream(seed, _STREAM_NONCE)
    context = nonce_rng.bytes(16)
    now = nlos_authenticate(session, vehicle, ra, context, 0.0, rsu.nlos_latency)
    if session.state is SessionState.REJECTED:
        return session, None, now

    if rsu.locked_out(vehicle.vehicle_id):
        session.log(now, "rsu", vehicle.vehicle_id, "CHECK_RESULT", "reject:locked_out")
        session.transition(SessionState.REJECTED, now, reason="locked_out")
        return session, None, now

    if forced_challenge is None:
        challenge = issue_challenge(session, stream(seed, _STREAM_CHALLENGE), rsu.timing, now)
    else:
        challenge = replace(forced_challenge, issued_at=now,
                            deadline=now + t_auth(rsu.timing.d, rsu.timing.v))
        session.challenge = challenge
        session.log(now, "rsu", session.vehicle_id, "CHALLENGE",
                    f"challenge_id={challenge.challenge_id:032x} class={challenge.class_label.code}"
                    f" deadline={challenge.deadline:.6f} reused=1")
        session.transition(SessionState.CHALLENGE_ISSUED, now)
    return session, challenge, now


def _response_schedule(session: AuthSession, vehicle, rsu: Rsu, challenge: Challenge,
                       capture_start: float, seed: int) -> Optional[EmissionSchedule]:
    pattern = vehicle.respond(challenge, stream(seed, _STREAM_RESPONDER))
    if pattern is None:
        session.log(capture_start, vehicle.vehicle_id, "rsu", "LOS_RESPONSE", "pattern=none")
        return None
    start_rel = rsu.nlos_latency + getattr(vehicle, "reaction_delay", 0.0)
    schedule = build_schedule(pattern, rsu.timing.t_f, start=start_rel)
    session.log(capture_start + start_rel, vehicle.vehicle_id, "rsu", "LOS_RESPONSE",
                f"pattern={render_symbols(schedule.symbols)}")
    return schedule


def _finish_session(session: AuthSession, trace, rsu: Rsu, ra: RegistrationAuthority,
                    challenge: Challenge, capture_start: float, seed: int) -> AuthSession:
    done_at = capture_start + rsu.capture_duration + rsu.timing.t_c
    result = decode(trace, rsu.timing.t_f, mirror_view=rsu.channel.mirror_view,
                    config=rsu.decoder_config)
    session.decode_result = result
    session.decode_done_at = done_at
    session.transition(SessionState.DECODED, done_at)
    session.log(done_at, "rsu", "ra", "DECODE",
                f"code={result.label.code} score={result.score:.6f}"
                f" alignment={result.slot_alignment:.6f} done_at={done_at:.6f}")

    token_id = _nonce128(stream(seed, _STREAM_NONCE, 1))
    check_phase(session, result, challenge, ra, done_at, token_id)
    if session.state is SessionState.REJECTED:
        rsu.record_los_failure(session.vehicle_id)
    rsu.seen_challenge_ids.add(challenge.challenge_id)
    return session


def run_session(vehicle, rsu: Rsu, ra: RegistrationAuthority, seed: int,
                forced_challenge: Optional[Challenge] = None,
                obstructed: bool = False) -> AuthSession:
    """End-to-end session over the simulated channels, deterministic in seed.

    ``forced_challenge`` re-uses a given challenge instead of drawing a fresh
    one (an intentionally broken control mode for replay experiments);
    ``obstructed`` blinds the camera so the trace shows ambient light only.
    """
    session, challenge, now = _begin_session(vehicle, rsu, ra, seed, forced_challenge)
    if challenge is None:
        return session
    capture_start = now
    schedule = _response_schedule(session, vehicle, rsu, challenge, capture_start, seed)
    channel = replace(rsu.channel, seed=child_seed(seed, _STREAM_CHANNEL))
    trace = sample_trace(None if obstructed else schedule, channel, rsu.capture_duration)
    return _finish_session(session, trace, rsu, ra, challenge, capture_start, seed)


def run_scene_sessions(participants, rsu: Rsu, ra: RegistrationAuthority, seed: int,
                       obstructed_ids=frozenset()) -> Dict[str, AuthSession]:
    """Concurrent sessions for several vehicles sharing one camera view.

    ``participants`` is a sequence of (vehicle, lane_offset_m, distance_m).
    Per-vehicle randomness is keyed by vehicle id, so one vehicle's presence
    or obstruction never perturbs another's draws.
    """
    sessions: Dict[str, AuthSession] = {}
    pending = []
    emitters = []
    for vehicle, lane_offset, distance in participants:
        vid = vehicle.vehicle_id
        session_seed = child_seed(seed, id_token(vid))
        session, challenge, now = _begin_session(vehicle, rsu, ra, session_seed)
        sessions[vid] = session
        if challenge is None:
            continue
        schedule = _response_schedule(session, vehicle, rsu, challenge, now, session_seed)
        emitters.append(SceneEmitter(vid, lane_offset, distance, schedule))
        pending.append((vid, challenge, now, session_seed))

    if pending:
        scene = Scene(tuple(emitters))
        channel = replace(rsu.channel, seed=child_seed(seed, _STREAM_CHANNEL))
        traces = extract_rois(scene, channel, rsu.capture_duration,
                              obstructed_ids=frozenset(obstructed_ids))
        for vid, challenge, capture_start, session_seed in pending:
            _finish_session(sessions[vid], traces[vid], rsu, ra, challenge,
                            capture_start, session_seed)
    return sessions


# ---------------------------------------------------------------------------
# Transcript audit
# ---------------------------------------------------------------------------

@dataclass
class AuditReport:
    ok: bool
    errors: List[str]


def _summary_fields(summary: str) -> Dict[str, str]:
    out = {}
    for part in summary.split():
        if "=" in part:
            key, _, value = part.partition("=")
            out[key] = value
    return out


def audit_transcript(text: str) -> AuditReport:
    """Re-derive session legality from a serialized transcript.

    Checks that the state path follows the transition relation and that a
    token appears exactly when the network factor succeeded, the decoded
    class matches the challenged one, and decoding finished by the deadline.
    """
    errors: List[str] = []
    states: List[str] = []
    nlos_ok = False
    challenge_class = None
    deadline = None
    decoded_code = None
    decode_done_at = None
    token_seen = False

    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            errors.append(f"malformed transcript line: {line!r}")
            continue
        _, _, _, kind, summary = parts
        if kind == "STATE":
            states.append(summary)
        elif kind == "NLOS_RESULT":
            nlos_ok = summary == "ok"
        elif kind == "CHALLENGE":
            fields = _summary_fields(summary)
            challenge_class = int(fields["class"])
            deadline = float(fields["deadline"])
        elif kind == "DECODE":
            fields = _summary_fields(summary)
            decoded_code = int(fields["code"])
            decode_done_at = float(fields["done_at"])
        elif kind == "TOKEN":
            token_seen = True

    if not states or states[0] != SessionState.INIT.value:
        errors.append("transcript does not start in Init")
    by_value = {s.value: s for s in SessionState}
    for prev, cur in zip(states, states[1:]):
        if by_value[cur] not in LEGAL_TRANSITIONS[by_value[prev]]:
            errors.append(f"illegal transition {prev} -> {cur}")
    if states and states[-1] not in (SessionState.TOKEN_ISSUED.value, SessionState.REJECTED.value):
        errors.append(f"non-terminal final state {states[-1]}")

    should_token = (nlos_ok and challenge_class is not None and decoded_code == challenge_class
                    and decode_done_at is not None and deadline is not None
                    and decode_done_at <= deadline)
    if token_seen != should_token:
        errors.append(f"token presence {token_seen} contradicts conditions {should_token}")
    if token_seen and states[-1] != SessionState.TOKEN_ISSUED.value:
        errors.append("token issued but final state is not TokenIssued")

    return AuditReport(ok=not errors, errors=errors)
