"""Per-chunk receive chain.

resample/matched-filter -> two-pass symbol tracking -> two-pass phase
tracking -> coherent frame sync -> soft decisions.  Demodulating a chunk is
a pure function of (chunk, tables); all mutable state is chunk-local, and
the precomputed tables are shared read-only across workers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoPeak
from ..modem import Preamble
from ..numerology import WaveformProfile
from .filters import DOWN, UP, resample_matched_filter, rx_taps
from .framesync import frame_sync
from .interp import lagrange_bank
from .phase import PhaseLoopState, track_phase_two_pass
from .softbits import SoftFrame, llr_map_deinterleave
from .timing import TimingLoopState, track_symbols_two_pass

__all__ = [
    "DemodTables",
    "ChunkDemodResult",
    "demod_chunk",
    "resample_matched_filter",
    "frame_sync",
    "track_symbols_two_pass",
    "track_phase_two_pass",
    "llr_map_deinterleave",
]


@dataclass(frozen=True)
class DemodTables:
    """Shared read-only precomputes for all workers."""

    profile: WaveformProfile
    rx_taps: np.ndarray
    preamble: Preamble

    @classmethod
    def for_profile(cls, profile: WaveformProfile) -> "DemodTables":
        preamble = Preamble.for_profile(profile)
        preamble.conj_fft(profile.frame_symbols)  # warm the FFT cache
        lagrange_bank()
        return cls(profile=profile, rx_taps=rx_taps(profile), preamble=preamble)


@dataclass
class ChunkDemodResult:
    frames: list[SoftFrame]
    skips: int = 0
    repeats: int = 0
    sync_failed: bool = False
    peak_ratio: float = 0.0
    noise_var: float = 0.0
    stage_seconds: dict = field(default_factory=dict)


# Zero samples prepended before resampling so a frame starting on the chunk's
# first sample still gets a (filter-edge-degraded) preamble and an intact
# payload; without it the interpolator window support drops that frame.
HEAD_PAD_SAMPLES = 16
# Resampled samples (and symbols) at the chunk head covered by pad/filter
# edges: tracked with frozen loops, excluded from backward warmup.
HEAD_GUARD_RESAMPLED = 40
HEAD_GUARD_SYMBOLS = 24


def demod_chunk(
    chunk,
    tables: DemodTables,
    taps=None,
) -> ChunkDemodResult:
    """Demodulate one chunk into soft frames tagged with absolute boundaries.

    `taps` is an optional monitor tap set; when absent the probe cost is a
    single None check per stage.
    """
    profile = tables.profile
    stage_t: dict[str, float] = {}
    t0 = time.perf_counter()

    padded = np.concatenate(
        [np.zeros(HEAD_PAD_SAMPLES, np.complex64), np.asarray(chunk.samples, np.complex64)]
    )
    resampled = resample_matched_filter(padded, tables.rx_taps)
    t1 = time.perf_counter()
    stage_t["resample"] = t1 - t0
    if taps is not None:
        taps.offer("resampler", resampled)

    warmup = min(2 * profile.warmup_symbols, resampled.size // 2)
    tstate = TimingLoopState.for_bandwidth(profile.timing_loop_bw)
    tracked = track_symbols_two_pass(
        resampled, tstate, warmup=warmup, head_guard=HEAD_GUARD_RESAMPLED
    )
    t2 = time.perf_counter()
    stage_t["timing"] = t2 - t1
    if taps is not None:
        taps.offer("timing", tracked.symbols)

    pstate = PhaseLoopState.for_bandwidth(profile.phase_loop_bw)
    warmup_ph = min(profile.warmup_symbols, tracked.symbols.size // 2)
    derotated = track_phase_two_pass(
        tracked.symbols, pstate, warmup_ph, head_guard=HEAD_GUARD_SYMBOLS
    )
    t3 = time.perf_counter()
    stage_t["phase"] = t3 - t2
    if taps is not None:
        taps.offer("phase", derotated)

    try:
        sync = frame_sync(derotated, tables.preamble, profile.frame_symbols)
    except NoPeak:
        return ChunkDemodResult(
            frames=[],
            skips=tracked.skips,
            repeats=tracked.repeats,
            sync_failed=True,
            stage_seconds=stage_t,
        )
    t4 = time.perf_counter()
    stage_t["framesync"] = t4 - t3
    if taps is not None:
        taps.offer("framesync", sync.payloads.reshape(-1))

    # map each frame boundary to its transmit-time sample number: the tracker
    # positions are indices into the 2/sps stream; input time is 4/5 of that.
    # A chunk only owns frames it fully contains (the overlap guarantees a
    # partially-covered frame belongs to a neighboring chunk), which also
    # keeps duplicate blocks bit-identical across chunks.
    rotation = np.exp(-1j * sync.rotation).astype(np.complex64)
    frames: list[SoftFrame] = []
    frame_samples = profile.frame_samples
    chunk_first = chunk.first_sample_number
    chunk_end = chunk_first + len(chunk.samples)
    for i, start_sym in enumerate(sync.frame_starts):
        pos = tracked.positions[start_sym]
        abs_est = chunk_first - HEAD_PAD_SAMPLES + pos * (DOWN / UP)
        start = frame_samples * int(round(abs_est / frame_samples))
        if start < chunk_first or start + frame_samples > chunk_end:
            continue
        frames.append(
            llr_map_deinterleave(
                sync.payloads[i] * rotation,
                sync.noise_var,
                start_sample_number=start,
                expected_symbols=profile.payload_symbols,
                columns=profile.bits_per_symbol,
            )
        )
    t5 = time.perf_counter()
    stage_t["softbits"] = t5 - t4
    if taps is not None:
        taps.offer("softbits", frames[-1].llrs if frames else np.zeros(0, np.float32))

    return ChunkDemodResult(
        frames=frames,
        skips=tracked.skips,
        repeats=tracked.repeats,
        peak_ratio=sync.peak_ratio,
        noise_var=sync.noise_var,
        stage_seconds=stage_t,
    )
