"""Blind symbol tracking with a polyphase Lagrange resampler.

The loop consumes matched-filtered samples at 2/symbol and emits one symbol
per two inputs (plus or minus clock-slip corrections).  The NCO holds a
fractional delay quantized to the 128-filter bank; a sample is repeated when
the filter index wraps below 0 and skipped when it wraps past 128.  The loop
updates once per 64 interpolated outputs; each update reads 64 + 8 inputs
(the 8-tap window flush).

Two-pass operation: the loop first runs backward over the chunk head (on the
time-reversed samples) until it converges at sample 0, then the whole chunk
is processed forward from the converged state, so no output symbols are
sacrificed to the acquisition transient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import WarmupExceedsChunk
from .interp import N_FILTERS, lagrange_bank

BLOCK_OUT = 64  # interpolated samples per loop update
FLUSH = 8  # extra inputs read per update (window memory)
_WIN_LEFT = 3  # window reaches 3 samples left, 4 right of the base index

# Gardner detector slope for the power-normalized error on random 8PSK
# (measured; error per sample of timing offset).
DETECTOR_GAIN = 0.39


def loop_gains(loop_bw_per_update: float, detector_gain: float, damping: float = 0.707):
    """Proportional/integrator gains of a second-order PI loop."""
    theta = loop_bw_per_update / (damping + 1.0 / (4.0 * damping))
    denom = 1.0 + 2.0 * damping * theta + theta * theta
    kp = 4.0 * damping * theta / (denom * detector_gain)
    ki = 4.0 * theta * theta / (denom * detector_gain)
    return kp, ki


def timing_gains(loop_bw_per_symbol: float) -> tuple[float, float]:
    return loop_gains(loop_bw_per_symbol * (BLOCK_OUT // 2), DETECTOR_GAIN)


def gardner_ted(early, ontime, late) -> float:
    """Timing error from the half-early, on-time, and half-late interpolants.

    Inputs are the interpolated values over a block of symbol periods (arrays
    of equal length, or scalars); the error is the sum over the block of
    ontime * (late - early), real and imaginary parts separately.  Sign
    convention: sampling late yields a negative error.
    """
    early = np.asarray(early)
    ontime = np.asarray(ontime)
    late = np.asarray(late)
    diff = late - early
    return float(np.sum(ontime.real * diff.real) + np.sum(ontime.imag * diff.imag))


# Widest clock offset the rate accumulator may represent (samples/sample).
# 20x the nominal 10 ppm bound; keeps integrator windup from a start at the
# unstable (half-symbol) equilibrium from running away before lock.
RATE_LIMIT = 2e-4


@dataclass
class TimingLoopState:
    """Second-order timing NCO state; direction-reversible."""

    kp: float
    ki: float
    filter_index: float = 0.0  # fractional position in [0, 128)
    rate: float = 0.0  # estimated drift, samples per output sample
    rate_limit: float = RATE_LIMIT
    direction: int = 1
    skips: int = 0
    repeats: int = 0

    @classmethod
    def for_bandwidth(cls, loop_bw_per_symbol: float, **kw) -> "TimingLoopState":
        kp, ki = timing_gains(loop_bw_per_symbol)
        return cls(kp=kp, ki=ki, **kw)


@dataclass
class TrackedSymbols:
    """Tracker output: symbols plus their positions in the 2/sps input."""

    symbols: np.ndarray  # complex64
    positions: np.ndarray  # float64, fractional index into the tracker input
    state: TimingLoopState
    consumed_samples: int  # inputs covered by the forward pass
    skips: int
    repeats: int


class _PassResult:
    __slots__ = ("q", "tau", "rate", "skips", "repeats", "q_start")

    def __init__(self, q, tau, rate, skips, repeats, q_start):
        self.q = q
        self.tau = tau
        self.rate = rate
        self.skips = skips
        self.repeats = repeats
        self.q_start = q_start


def _run_pass(
    x: np.ndarray,
    q0: int,
    tau0: float,
    rate0: float,
    kp: float,
    ki: float,
    collect: bool,
    freeze_below: int = 0,
    rate_limit: float = RATE_LIMIT,
):
    """One directional pass; x is already oriented in processing order.

    Blocks starting below `freeze_below` are interpolated and emitted but do
    not update the loop (the chunk head's filter-edge samples would poison
    the converged state).
    """
    bank = lagrange_bank()
    windows = sliding_window_view(x, FLUSH)
    n_rows = windows.shape[0]
    q, tau, rate = q0, float(tau0), float(rate0)
    skips = repeats = 0
    prev_mid = 0.0 + 0.0j
    centers_out: list[np.ndarray] = []
    pos_out: list[np.ndarray] = []

    while q >= _WIN_LEFT and q - _WIN_LEFT + BLOCK_OUT <= n_rows:
        fi = int(tau * N_FILTERS + 0.5)
        if fi >= N_FILTERS:
            fi = N_FILTERS - 1
        y = windows[q - _WIN_LEFT : q - _WIN_LEFT + BLOCK_OUT] @ bank[fi]
        centers = y[0::2]
        mids = y[1::2]
        if collect:
            centers_out.append(centers)
            pos_out.append(q + tau + 2.0 * np.arange(BLOCK_OUT // 2))
        early = np.empty_like(mids)
        early[0] = prev_mid
        early[1:] = mids[:-1]
        prev_mid = mids[-1]
        if q >= freeze_below:
            power = np.mean(y.real**2 + y.imag**2) + 1e-30
            err = gardner_ted(early, centers, mids) / ((BLOCK_OUT // 2) * power)
            rate += ki * err
            if rate > rate_limit:
                rate = rate_limit
            elif rate < -rate_limit:
                rate = -rate_limit
            tau += BLOCK_OUT * rate + kp * err
        else:
            tau += BLOCK_OUT * rate
        q += BLOCK_OUT
        while tau >= 1.0:
            tau -= 1.0
            q += 1
            skips += 1
        while tau < 0.0:
            tau += 1.0
            q -= 1
            repeats += 1

    result = _PassResult(q, tau, rate, skips, repeats, q0)
    if not collect:
        return result, None, None
    symbols = (
        np.concatenate(centers_out).astype(np.complex64)
        if centers_out
        else np.zeros(0, np.complex64)
    )
    positions = np.concatenate(pos_out) if pos_out else np.zeros(0)
    return result, symbols, positions


def track_symbols_two_pass(
    samples: np.ndarray,
    state: TimingLoopState,
    warmup: int,
    head_guard: int = 0,
) -> TrackedSymbols:
    """Backward warmup pass, then a forward pass over the whole input.

    `warmup` is the number of leading samples (at 2/symbol) the backward pass
    converges over; 0 runs single-pass from the initial state.  The backward
    pass runs the forward kernel on the time-reversed head; handing the state
    over flips the sign of the second-order (rate) accumulator and mirrors
    the fractional delay while the proportional path is untouched.
    `head_guard` excludes that many leading samples (chunk-edge junk) from
    the backward pass and freezes loop updates over them going forward.
    """
    x = np.ascontiguousarray(samples)
    if warmup > x.size:
        raise WarmupExceedsChunk(f"warmup {warmup} exceeds {x.size} samples")

    tau0 = (state.filter_index % N_FILTERS) / N_FILTERS
    rate0 = state.rate
    q0 = _WIN_LEFT
    if warmup:
        if warmup <= head_guard + 2 * BLOCK_OUT:
            raise WarmupExceedsChunk(
                f"warmup {warmup} leaves no samples past the {head_guard} head guard"
            )
        xr = x[head_guard:warmup][::-1]
        back, _, _ = _run_pass(
            xr, _WIN_LEFT, tau0, rate0, state.kp, state.ki, collect=False,
            rate_limit=state.rate_limit,
        )
        # next-output position in reversed coords -> forward coords
        p_rev = back.q + back.tau
        cf = (warmup - 1) - p_rev
        cf += 2.0 * np.ceil((_WIN_LEFT - cf) / 2.0)  # earliest on-grid center >= 3
        q0 = int(np.floor(cf))
        tau0 = cf - q0
        rate0 = -back.rate

    fwd, symbols, positions = _run_pass(
        x, q0, tau0, rate0, state.kp, state.ki, collect=True, freeze_below=head_guard,
        rate_limit=state.rate_limit,
    )
    state.filter_index = fwd.tau * N_FILTERS
    state.rate = fwd.rate
    state.skips += fwd.skips
    state.repeats += fwd.repeats
    return TrackedSymbols(
        symbols=symbols,
        positions=positions,
        state=state,
        consumed_samples=fwd.q - fwd.q_start,
        skips=fwd.skips,
        repeats=fwd.repeats,
    )
