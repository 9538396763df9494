"""Classical slot-aligned decoder for luminance traces.

Pipeline: estimate an on/off threshold by 1-D two-means clustering, locate
the 11-00 start pattern by scanning alignment offsets at quarter-frame
granularity, threshold per-slot means into symbols, undo the camera mirror
if requested, and classify the 7-symbol estimate.  ``template_correlate`` is
the brute-force companion: it scores the trace against every ideal class
waveform and is used as an exhaustive cross-check on ``decode``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .frame_codec import (
    ALL_ZERO_CODE,
    NUM_VALID_CLASSES,
    ClassLabel,
    Symbol,
    decode_symbols,
    encode_class,
    mirror,
)
from .occ_channel import LuminanceTrace

__all__ = [
    "DecoderConfig",
    "ThresholdEstimate",
    "DecodeResult",
    "estimate_threshold",
    "find_preamble",
    "decode",
    "template_correlate",
]


@dataclass(frozen=True)
class DecoderConfig:
    """Tunables for threshold estimation and alignment search.

    search_frac bounds the alignment scan to the head of the trace (responses
    arrive on a known deadline, late starts are protocol violations).
    match_floor is the fraction of the estimated on/off gap a candidate
    start-pattern score must reach; 0.7 rejects the half-gap score of a
    single-headlight flash followed by darkness.  eps_abs is the minimum
    absolute on/off contrast treated as signal; it sits above the default
    cross-ROI leakage ceiling (0.05) so a neighbour's bleed-through never
    reads as a frame.
    """

    eps_abs: float = 0.08
    rel_gap_factor: float = 3.2
    search_frac: float = 0.4
    match_floor: float = 0.7
    slot_margin_frac: float = 0.0
    max_two_means_iter: int = 64


DEFAULT_CONFIG = DecoderConfig()


@dataclass(frozen=True)
class ThresholdEstimate:
    threshold: float
    low: float
    high: float
    all_off: bool

    @property
    def gap(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class DecodeResult:
    """Decoder verdict; label always equals the classification of the
    (mirror-corrected) per-slot symbol estimates."""

    label: ClassLabel
    score: float
    slot_alignment: float
    per_slot_symbols: tuple

    def to_csv_row(self) -> str:
        return f"{self.label.code},{self.score:.6f},{self.slot_alignment:.6f}"


def _two_means(values: np.ndarray, max_iter: int) -> Tuple[float, float, float]:
    """1-D two-means: returns (low_mean, high_mean, pooled_within_std)."""
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return lo, hi, 0.0
    c0, c1 = lo, hi
    for _ in range(max_iter):
        split = 0.5 * (c0 + c1)
        low_side = values <= split
        if not low_side.any() or low_side.all():
            break
        n0, n1 = float(values[low_side].mean()), float(values[~low_side].mean())
        if n0 == c0 and n1 == c1:
            break
        c0, c1 = n0, n1
    split = 0.5 * (c0 + c1)
    low_side = values <= split
    if not low_side.any() or low_side.all():
        return c0, c1, float(values.std())
    var0 = float(values[low_side].var())
    var1 = float(values[~low_side].var())
    w0 = low_side.mean()
    return c0, c1, math.sqrt(w0 * var0 + (1.0 - w0) * var1)


def estimate_threshold(trace: LuminanceTrace,
                       config: DecoderConfig = DEFAULT_CONFIG) -> ThresholdEstimate:
    """Midpoint between the two luminance clusters.

    When the clusters are indistinguishable (gap below the configured
    absolute floor and below rel_gap_factor times the within-cluster spread,
    which covers both a dark trace and a constant unmodulated glow) the trace
    is declared all-off.
    """
    values = np.concatenate([trace.left[trace.valid], trace.right[trace.valid]])
    if values.size == 0:
        return ThresholdEstimate(math.nan, math.nan, math.nan, True)
    low, high, within = _two_means(values, config.max_two_means_iter)
    gap = high - low
    all_off = gap <= max(config.eps_abs, config.rel_gap_factor * within)
    return ThresholdEstimate(0.5 * (low + high), low, high, all_off)


def _offset_grid(trace: LuminanceTrace, t_f: float, config: DecoderConfig) -> np.ndarray:
    duration = trace.n_frames * trace.exposure_s
    latest = min(config.search_frac * duration, duration - 2.0 * t_f)
    if latest < 0:
        return np.zeros(1)
    step = trace.exposure_s / 4.0
    return np.arange(0.0, latest + step / 2, step)


def find_preamble(trace: LuminanceTrace, t_f: float,
                  config: DecoderConfig = DEFAULT_CONFIG,
                  est: Optional[ThresholdEstimate] = None) -> Optional[float]:
    """Estimated schedule start, or None when no 11-00 opening is present.

    Scans candidate starts at quarter-frame steps; among the earliest cluster
    of candidates whose (start slot minus next slot) level difference clears
    the match floor, returns the best-scoring one.
    """
    if est is None:
        est = estimate_threshold(trace, config)
    if est.all_off:
        return None
    offsets = _offset_grid(trace, t_f, config)
    scores = _kernels.preamble_score_scan(
        trace.timestamps, trace.exposure_s, trace.left, trace.right,
        trace.valid, offsets, t_f, config.slot_margin_frac * t_f)
    floor = config.match_floor * est.gap
    qualifying = np.flatnonzero(np.isfinite(scores) & (scores >= floor))
    if qualifying.size == 0:
        return None
    first = offsets[qualifying[0]]
    window = qualifying[offsets[qualifying] < first + t_f]
    best = window[np.argmax(scores[window])]
    return float(offsets[best])


def decode(trace: LuminanceTrace, t_f: float, mirror_view: bool = False,
           config: DecoderConfig = DEFAULT_CONFIG) -> DecodeResult:
    """Total decode: every trace yields a label.

    All-off traces classify as the all-zero code; traces with light activity
    but no locatable start pattern are sliced from the trace origin and
    (barring a pathological coincidence) classify as random flashing.
    """
    est = estimate_threshold(trace, config)
    if est.all_off:
        symbols = (Symbol.OFF,) * 7
        return DecodeResult(ClassLabel.all_zero(), 0.0, math.nan, symbols)

    alignment = find_preamble(trace, t_f, config, est=est)
    slice_at = 0.0 if alignment is None else alignment
    lmeans, rmeans, _ = _kernels.aligned_slot_means(
        trace.timestamps, trace.exposure_s, trace.left, trace.right,
        trace.valid, slice_at, t_f, 7, config.slot_margin_frac * t_f)
    # nan means (slot saw no valid frame) threshold to off, the conservative side.
    symbols = tuple(
        Symbol.from_bits(int(lmeans[i] > est.threshold), int(rmeans[i] > est.threshold))
        for i in range(7))
    corrected = mirror(symbols) if mirror_view else symbols
    label = decode_symbols(corrected)
    score = _self_consistency(trace, t_f, slice_at, symbols)
    return DecodeResult(label, score, math.nan if alignment is None else alignment, symbols)


def _self_consistency(trace: LuminanceTrace, t_f: float, alignment: float,
                      symbols: tuple) -> float:
    left_bits = np.array([s.left_bit for s in symbols], dtype=np.uint8)
    right_bits = np.array([s.right_bit for s in symbols], dtype=np.uint8)
    if not (left_bits.any() or right_bits.any()):
        return 0.0
    scores = _kernels.template_score_scan(
        trace.timestamps, trace.exposure_s, trace.left, trace.right,
        trace.valid, np.array([alignment]), t_f, left_bits, right_bits)
    return float(scores[0])


def template_correlate(trace: LuminanceTrace, t_f: float,
                       config: DecoderConfig = DEFAULT_CONFIG) -> List[Tuple[ClassLabel, float]]:
    """Exhaustive matched-filter ranking over all 27 classes plus all-zero.

    Each class template is the ideal on-fraction waveform placed at the best
    alignment in the search window; its score is the Pearson correlation with
    the observed trace.  The all-zero hypothesis is flat, so correlation is
    undefined for it; it scores 1.0 when the trace shows no two-cluster
    structure and 0.0 otherwise.
    """
    est = estimate_threshold(trace, config)
    offsets = _offset_grid(trace, t_f, config)
    ranked = [(ClassLabel.all_zero(), 1.0 if est.all_off else 0.0)]
    for k in range(1, NUM_VALID_CLASSES + 1):
        frame = encode_class(k)
        lbits = np.array([s.left_bit for s in frame.symbols], dtype=np.uint8)
        rbits = np.array([s.right_bit for s in frame.symbols], dtype=np.uint8)
        scores = _kernels.template_score_scan(
            trace.timestamps, trace.exposure_s, trace.left, trace.right,
            trace.valid, offsets, t_f, lbits, rbits)
        ranked.append((ClassLabel.valid(k), float(scores.max())))
    ranked.sort(key=lambda pair: (-pair[1], pair[0].code))
    return ranked
