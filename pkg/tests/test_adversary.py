import itertools
import math

import pytest

from occauth._seeds import child_seed, stream
from occauth.adversary import (
    AttackerKind,
    AttackerProfile,
    GuessResponder,
    ReplayResponder,
    SilentResponder,
    attack_guess,
    attack_obstruct,
    attack_remote,
    attack_replay,
)
from occauth.frame_codec import encode_class
from occauth.occ_channel import ChannelParams
from occauth.protocol import (
    HonestVehicle,
    RegistrationAuthority,
    Rsu,
    SessionState,
    run_scene_sessions,
    run_session,
)
from occauth.timing import TimingParams


def _setup(noise=0.0, ambient=0.0, seed=1):
    ra = RegistrationAuthority.with_seed(seed)
    cred = ra.enroll("veh-001", stream(seed, 50))
    rsu = Rsu(channel=ChannelParams(fps=30, noise_sigma=noise, ambient_level=ambient, seed=0),
              timing=TimingParams())
    return ra, cred, rsu


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def test_profile_structural_invariants():
    with pytest.raises(ValueError):
        AttackerProfile(AttackerKind.REMOTE_IMPERSONATOR, has_los_emitter=True)
    with pytest.raises(ValueError):
        AttackerProfile(AttackerKind.PROXIMITY_REPLAYER, can_record_los=True,
                        has_los_emitter=False)
    assert not AttackerProfile.remote_impersonator().has_los_emitter
    replayer = AttackerProfile.proximity_replayer()
    assert replayer.can_record_los and replayer.has_los_emitter


def test_attack_dispatch_checks_profile_kind():
    ra, cred, rsu = _setup()
    with pytest.raises(ValueError):
        attack_remote(AttackerProfile.proximity_replayer(), rsu, ra, 1, 0)
    with pytest.raises(ValueError):
        attack_replay(AttackerProfile.remote_impersonator(), (), rsu, ra, 1, 0,
                      stolen_credential=cred)


# ---------------------------------------------------------------------------
# remote impersonation
# ---------------------------------------------------------------------------

def test_remote_with_stolen_credential_never_gets_token():
    ra, cred, rsu = _setup()
    result, sessions = attack_remote(AttackerProfile.remote_impersonator(True),
                                     rsu, ra, 200, 11, stolen_credential=cred)
    assert result.successes == 0
    # NLOS passes, the optical factor fails: no light means the all-zero code
    assert all(s.decode_result is not None and s.decode_result.label.code == 29
               for s in sessions)
    assert all(s.reject_reason == "malformed" for s in sessions)


def test_remote_without_credential_fails_at_nlos():
    ra, cred, rsu = _setup()
    result, sessions = attack_remote(AttackerProfile.remote_impersonator(False),
                                     rsu, ra, 50, 12)
    assert result.successes == 0
    assert all(s.reject_reason == "unknown" for s in sessions)
    assert all(s.decode_result is None for s in sessions)


def test_remote_thousand_trials_zero_tokens():
    ra, cred, rsu = _setup()
    result, _ = attack_remote(AttackerProfile.remote_impersonator(True),
                              rsu, ra, 1000, 13, stolen_credential=cred)
    assert result.trials == 1000
    assert result.successes == 0
    assert result.rate == 0.0


# ---------------------------------------------------------------------------
# replay and guessing
# ---------------------------------------------------------------------------

def test_replay_success_rate_in_binomial_envelope():
    ra, cred, rsu = _setup()
    pattern = encode_class(14).symbols
    trials = 2000
    result, _ = attack_replay(AttackerProfile.proximity_replayer(), pattern,
                              rsu, ra, trials, 21, stolen_credential=cred)
    p = 1 / 27
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(result.rate - p) <= 3 * sigma


def test_replay_against_reused_challenge_succeeds():
    # control condition: freshness, not secrecy, is what defeats replay
    ra, cred, rsu = _setup()
    vehicle = HonestVehicle(credential=cred, vehicle_id="veh-001")
    honest = run_session(vehicle, rsu, ra, seed=31)
    assert honest.state is SessionState.TOKEN_ISSUED
    pattern = encode_class(honest.challenge.class_label.code).symbols
    result, sessions = attack_replay(AttackerProfile.proximity_replayer(), pattern,
                                     rsu, ra, 20, 32, stolen_credential=cred,
                                     reuse_challenge=honest.challenge)
    assert result.successes == 20


def test_guess_success_rate_in_binomial_envelope():
    ra, cred, rsu = _setup()
    trials = 2000
    result, _ = attack_guess(AttackerProfile.uniform_guesser(), rsu, ra, trials, 41,
                             stolen_credential=cred)
    p = 1 / 27
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(result.rate - p) <= 3 * sigma


def test_campaign_csv_row():
    ra, cred, rsu = _setup()
    result, _ = attack_guess(AttackerProfile.uniform_guesser(), rsu, ra, 100, 43,
                             stolen_credential=cred)
    cols = result.csv_row().split(",")
    assert cols[0] == "uniform_guesser"
    assert int(cols[1]) == 100
    lo, hi = float(cols[4]), float(cols[5])
    assert 0.0 <= lo <= result.rate <= hi <= 1.0


# ---------------------------------------------------------------------------
# obstruction
# ---------------------------------------------------------------------------

def _scene_setup(seed=61):
    ra = RegistrationAuthority.with_seed(seed)
    victim = HonestVehicle(credential=ra.enroll("veh-v", stream(seed, 1)), vehicle_id="veh-v")
    bystander = HonestVehicle(credential=ra.enroll("veh-b", stream(seed, 2)), vehicle_id="veh-b")
    rsu = Rsu(channel=ChannelParams(fps=30, noise_sigma=0.05, ambient_level=0.1, seed=0),
              timing=TimingParams())
    participants = [(victim, 0.0, 25.0), (bystander, 3.5, 25.0)]
    return ra, rsu, participants


def test_obstruction_blocks_victim_only():
    ra, rsu, participants = _scene_setup()
    outcome = attack_obstruct(AttackerProfile.camera_obstructor(), participants,
                              "veh-v", rsu, ra, seed=71)
    assert outcome["veh-v"].state is SessionState.REJECTED
    assert outcome["veh-v"].decode_result.label.code == 29
    assert outcome["veh-b"].state is SessionState.TOKEN_ISSUED


def test_obstruction_isolation_bystander_bytes_identical():
    for trial in range(5):
        seed = child_seed(81, trial)
        ra1, rsu1, participants1 = _scene_setup()
        baseline = run_scene_sessions(participants1, rsu1, ra1, seed)
        ra2, rsu2, participants2 = _scene_setup()
        attacked = attack_obstruct(AttackerProfile.camera_obstructor(), participants2,
                                   "veh-v", rsu2, ra2, seed)
        assert (attacked["veh-b"].transcript_text()
                == baseline["veh-b"].transcript_text())
        assert baseline["veh-v"].state is SessionState.TOKEN_ISSUED
        assert attacked["veh-v"].state is SessionState.REJECTED


def test_all_obstructed_all_rejected():
    ra, rsu, participants = _scene_setup()
    outcome = run_scene_sessions(participants, rsu, ra, seed=91,
                                 obstructed_ids=frozenset({"veh-v", "veh-b"}))
    assert all(s.state is SessionState.REJECTED for s in outcome.values())
    assert outcome["veh-v"].challenge is not None  # system ran, nothing crashed


def test_obstruct_requires_victim_in_scene():
    ra, rsu, participants = _scene_setup()
    with pytest.raises(ValueError):
        attack_obstruct(AttackerProfile.camera_obstructor(), participants,
                        "veh-ghost", rsu, ra, seed=1)


# ---------------------------------------------------------------------------
# capability grid: no token without both factors
# ---------------------------------------------------------------------------

def test_no_token_without_both_factors():
    ra, cred, rsu = _setup(noise=0.05, ambient=0.1)

    class FixedResponder:
        """Flashes a fixed (usually wrong) class regardless of the challenge."""

        def __init__(self, vid, credential, pattern):
            self.vehicle_id = vid
            self.credential = credential
            self.reaction_delay = 0.2
            self.pattern = pattern

        def respond(self, challenge, rng):
            return self.pattern

    for has_cred, emits in itertools.product((False, True), repeat=2):
        for trial in range(6):
            responder = FixedResponder(
                "veh-001", cred if has_cred else None,
                encode_class(14).symbols if emits else None)
            session = run_session(responder, rsu, ra, seed=child_seed(101, trial))
            challenged = session.challenge
            correct = (emits and challenged is not None
                       and challenged.class_label.code == 14)
            if not (has_cred and correct):
                assert session.token is None
            else:
                assert session.token is not None
