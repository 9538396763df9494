"""Hot numeric kernels behind the channel simulator and decoder.

Two interchangeable backends: numba ``@njit`` loops (default) and pure-numpy
broadcasting.  Set ``OCCAUTH_DISABLE_NUMBA=1`` to force the numpy path; the
numpy path is also the automatic fallback when numba is unavailable.  Both
backends are importable side by side (``NUMPY_IMPL`` / ``NUMBA_IMPL``) for
parity tests and for ``benchmarks/bench_kernels.py``.

Kernel contracts (shared by both backends):

frame_on_fractions(frame_starts, exposure, slot_start, slot_dur, left_bits, right_bits)
    Fraction of each exposure window [t, t+exposure) during which the
    left/right emitter is on, for a schedule of contiguous equal slots.

aligned_slot_means(frame_starts, exposure, left, right, valid, align, slot_dur, n_slots, margin)
    Per-slot mean luminance over frames whose exposure window lies fully
    inside the (margin-shrunk) slot; falls back to the single max-overlap
    valid frame when no frame is contained; nan when the slot saw no valid
    frame at all.

preamble_score_scan(frame_starts, exposure, left, right, valid, offsets, slot_dur, margin)
    For each candidate alignment offset, mean level of the would-be start
    slot minus mean level of the following slot, averaged over channels.

template_score_scan(frame_starts, exposure, left, right, valid, offsets, slot_dur, left_bits, right_bits)
    For each candidate alignment offset, the Pearson correlation between the
    observed (left, right) luminances and the ideal on-fractions of the given
    slot template placed at that offset.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "NUMPY_IMPL",
    "NUMBA_IMPL",
    "frame_on_fractions",
    "aligned_slot_means",
    "preamble_score_scan",
    "template_score_scan",
]

_DISABLE = os.environ.get("OCCAUTH_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _np_frame_on_fractions(frame_starts, exposure, slot_start, slot_dur, left_bits, right_bits):
    n_slots = left_bits.shape[0]
    lo = slot_start + slot_dur * np.arange(n_slots)
    a = frame_starts[:, None]
    b = a + exposure
    overlap = np.clip(np.minimum(b, lo + slot_dur) - np.maximum(a, lo), 0.0, None)
    left = overlap @ left_bits.astype(np.float64) / exposure
    right = overlap @ right_bits.astype(np.float64) / exposure
    return left, right


def _np_aligned_slot_means(frame_starts, exposure, left, right, valid, align, slot_dur, n_slots, margin):
    lmeans = np.full(n_slots, np.nan)
    rmeans = np.full(n_slots, np.nan)
    counts = np.zeros(n_slots, dtype=np.int64)
    a = frame_starts
    b = a + exposure
    for k in range(n_slots):
        lo = align + k * slot_dur
        hi = lo + slot_dur
        inside = valid & (a >= lo + margin - 1e-12) & (b <= hi - margin + 1e-12)
        if inside.any():
            counts[k] = int(inside.sum())
            lmeans[k] = left[inside].mean()
            rmeans[k] = right[inside].mean()
            continue
        overlap = np.clip(np.minimum(b, hi) - np.maximum(a, lo), 0.0, None)
        overlap[~valid] = 0.0
        j = int(np.argmax(overlap))
        if overlap[j] > 0.0:
            lmeans[k] = left[j]
            rmeans[k] = right[j]
    return lmeans, rmeans, counts


def _np_preamble_score_scan(frame_starts, exposure, left, right, valid, offsets, slot_dur, margin):
    scores = np.empty(offsets.shape[0])
    for i in range(offsets.shape[0]):
        lm, rm, _ = _np_aligned_slot_means(
            frame_starts, exposure, left, right, valid, offsets[i], slot_dur, 2, margin)
        if np.isnan(lm).any() or np.isnan(rm).any():
            scores[i] = -np.inf
        else:
            scores[i] = 0.5 * (lm[0] + rm[0]) - 0.5 * (lm[1] + rm[1])
    return scores


def _np_template_score_scan(frame_starts, exposure, left, right, valid, offsets, slot_dur, left_bits, right_bits):
    obs = np.concatenate([left[valid], right[valid]])
    obs = obs - obs.mean()
    obs_norm = np.sqrt((obs * obs).sum())
    scores = np.zeros(offsets.shape[0])
    if obs_norm <= 0.0:
        return scores
    for i in range(offsets.shape[0]):
        lf, rf = _np_frame_on_fractions(
            frame_starts, exposure, offsets[i], slot_dur, left_bits, right_bits)
        tpl = np.concatenate([lf[valid], rf[valid]])
        tpl = tpl - tpl.mean()
        tpl_norm = np.sqrt((tpl * tpl).sum())
        if tpl_norm > 0.0:
            scores[i] = float(obs @ tpl) / (obs_norm * tpl_norm)
    return scores


NUMPY_IMPL = {
    "frame_on_fractions": _np_frame_on_fractions,
    "aligned_slot_means": _np_aligned_slot_means,
    "preamble_score_scan": _np_preamble_score_scan,
    "template_score_scan": _np_template_score_scan,
}


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

NUMBA_IMPL = None

if not _DISABLE:
    try:
        from numba import njit
    except ImportError:
        njit = None

    if njit is not None:

        @njit(cache=True)
        def _nb_frame_on_fractions(frame_starts, exposure, slot_start, slot_dur, left_bits, right_bits):
            n = frame_starts.shape[0]
            n_slots = left_bits.shape[0]
            lfrac = np.zeros(n)
            rfrac = np.zeros(n)
            for i in range(n):
                a = frame_starts[i]
                b = a + exposure
                for k in range(n_slots):
                    lo = slot_start + k * slot_dur
                    hi = lo + slot_dur
                    ov = min(b, hi) - max(a, lo)
                    if ov > 0.0:
                        if left_bits[k]:
                            lfrac[i] += ov / exposure
                        if right_bits[k]:
                            rfrac[i] += ov / exposure
            return lfrac, rfrac

        @njit(cache=True)
        def _nb_aligned_slot_means(frame_starts, exposure, left, right, valid, align, slot_dur, n_slots, margin):
            n = frame_starts.shape[0]
            lmeans = np.full(n_slots, np.nan)
            rmeans = np.full(n_slots, np.nan)
            counts = np.zeros(n_slots, dtype=np.int64)
            for k in range(n_slots):
                lo = align + k * slot_dur
                hi = lo + slot_dur
                lsum = 0.0
                rsum = 0.0
                cnt = 0
                best_ov = 0.0
                best_j = -1
                for j in range(n):
                    if not valid[j]:
                        continue
                    a = frame_starts[j]
                    b = a + exposure
                    if a >= lo + margin - 1e-12 and b <= hi - margin + 1e-12:
                        lsum += left[j]
                        rsum += right[j]
                        cnt += 1
                    else:
                        ov = min(b, hi) - max(a, lo)
                        if ov > best_ov:
                            best_ov = ov
                            best_j = j
                if cnt > 0:
                    counts[k] = cnt
                    lmeans[k] = lsum / cnt
                    rmeans[k] = rsum / cnt
                elif best_j >= 0:
                    lmeans[k] = left[best_j]
                    rmeans[k] = right[best_j]
            return lmeans, rmeans, counts

        @njit(cache=True)
        def _nb_preamble_score_scan(frame_starts, exposure, left, right, valid, offsets, slot_dur, margin):
            m = offsets.shape[0]
            scores = np.empty(m)
            for i in range(m):
                lm, rm, _ = _nb_aligned_slot_means(
                    frame_starts, exposure, left, right, valid, offsets[i], slot_dur, 2, margin)
                ok = True
                for k in range(2):
                    if np.isnan(lm[k]) or np.isnan(rm[k]):
                        ok = False
                if ok:
                    scores[i] = 0.5 * (lm[0] + rm[0]) - 0.5 * (lm[1] + rm[1])
                else:
                    scores[i] = -np.inf
            return scores

        @njit(cache=True)
        def _nb_template_score_scan(frame_starts, exposure, left, right, valid, offsets, slot_dur, left_bits, right_bits):
            n = frame_starts.shape[0]
            nv = 0
            for j in range(n):
                if valid[j]:
                    nv += 1
            scores = np.zeros(offsets.shape[0])
            if nv == 0:
                return scores
            obs = np.empty(2 * nv)
            idx = np.empty(nv, dtype=np.int64)
            p = 0
            for j in range(n):
                if valid[j]:
                    obs[p] = left[j]
                    obs[nv + p] = right[j]
                    idx[p] = j
                    p += 1
            om = obs.mean()
            obs_norm = 0.0
            for q in range(2 * nv):
                obs[q] -= om
                obs_norm += obs[q] * obs[q]
            obs_norm = np.sqrt(obs_norm)
            if obs_norm <= 0.0:
                return scores
            tpl = np.empty(2 * nv)
            for i in range(offsets.shape[0]):
                lf, rf = _nb_frame_on_fractions(
                    frame_starts, exposure, offsets[i], slot_dur, left_bits, right_bits)
                for q in range(nv):
                    tpl[q] = lf[idx[q]]
                    tpl[nv + q] = rf[idx[q]]
                tm = tpl.mean()
                tpl_norm = 0.0
                dot = 0.0
                for q in range(2 * nv):
                    t = tpl[q] - tm
                    tpl_norm += t * t
                    dot += obs[q] * t
                tpl_norm = np.sqrt(tpl_norm)
                if tpl_norm > 0.0:
                    scores[i] = dot / (obs_norm * tpl_norm)
            return scores

        NUMBA_IMPL = {
            "frame_on_fractions": _nb_frame_on_fractions,
            "aligned_slot_means": _nb_aligned_slot_means,
            "preamble_score_scan": _nb_preamble_score_scan,
            "template_score_scan": _nb_template_score_scan,
        }

BACKEND = "numba" if NUMBA_IMPL is not None else "numpy"
_ACTIVE = NUMBA_IMPL if NUMBA_IMPL is not None else NUMPY_IMPL

frame_on_fractions = _ACTIVE["frame_on_fractions"]
aligned_slot_means = _ACTIVE["aligned_slot_means"]
preamble_score_scan = _ACTIVE["preamble_score_scan"]
template_score_scan = _ACTIVE["template_score_scan"]
