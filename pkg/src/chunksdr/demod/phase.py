"""Decision-directed carrier phase/frequency tracking.

The loop updates once every 8 symbols.  Within a block the correction phase
is the ramp theta_k = theta + k*phi (phi = frequency estimate, radians per
symbol); the error is Im(x * conj(xhat)) with xhat the sliced 8PSK point,
averaged over the block and power-normalized.  Two-pass operation mirrors
the symbol tracker: backward warmup on the reversed head, then a full
forward pass from the converged state (frequency sign flips at handoff).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..modem import GRAY_LABELS
from .timing import loop_gains

PHASE_BLOCK = 8
_POINTS = np.exp(1j * np.pi / 4 * np.arange(8)).astype(np.complex64)
_LABELS = np.array(GRAY_LABELS)
_BITS = np.array([[(g >> 2) & 1, (g >> 1) & 1, g & 1] for g in GRAY_LABELS], dtype=np.uint8)


def slice_8psk(x: complex) -> tuple[complex, tuple[int, int, int]]:
    """Nearest constellation point by angle, plus its 3 bits (MSB first).

    Angle ties break toward the smaller Gray label; zero input returns the
    label-0 point by convention.
    """
    if x == 0:
        pos = int(np.nonzero(_LABELS == 0)[0][0])
        return complex(_POINTS[pos]), tuple(_BITS[pos])
    scaled = np.angle(x) * 4.0 / np.pi
    lo = int(np.floor(scaled))
    frac = scaled - lo
    if abs(frac - 0.5) < 1e-9:  # boundary: pick the smaller label
        a, b = lo % 8, (lo + 1) % 8
        pos = a if _LABELS[a] < _LABELS[b] else b
    else:
        pos = int(np.floor(scaled + 0.5)) % 8
    return complex(_POINTS[pos]), tuple(int(b) for b in _BITS[pos])


def slice_positions(x: np.ndarray) -> np.ndarray:
    """Vectorized nearest-point circle positions (ties round half-even)."""
    scaled = np.angle(x) * 4.0 / np.pi
    return np.round(scaled).astype(np.int64) % 8


# Widest carrier offset the frequency accumulator may represent (rad/symbol);
# offsets are assumed small, and the cap keeps integrator windup bounded
# while the loop is still hunting for a lock point.
FREQ_LIMIT = 0.05


@dataclass
class PhaseLoopState:
    """Second-order phase loop accumulators; direction-reversible."""

    kp: float
    ki: float
    theta: float = 0.0  # radians, wrapped to (-pi, pi]
    freq: float = 0.0  # radians per symbol
    freq_limit: float = FREQ_LIMIT
    direction: int = 1

    @classmethod
    def for_bandwidth(cls, loop_bw_per_symbol: float, **kw) -> "PhaseLoopState":
        kp, ki = loop_gains(loop_bw_per_symbol * PHASE_BLOCK, detector_gain=1.0)
        return cls(kp=kp, ki=ki, **kw)


def _wrap(theta: float) -> float:
    return float((theta + np.pi) % (2.0 * np.pi) - np.pi)


_RAMP = np.arange(1, PHASE_BLOCK + 1, dtype=np.float64)


def _run_pass(
    x: np.ndarray,
    theta: float,
    freq: float,
    kp: float,
    ki: float,
    collect: bool,
    freeze_below: int = 0,
    freq_limit: float = FREQ_LIMIT,
):
    n_blocks = x.size // PHASE_BLOCK
    out = np.empty(x.size, dtype=np.complex64) if collect else None
    for b in range(n_blocks):
        seg = x[b * PHASE_BLOCK : (b + 1) * PHASE_BLOCK]
        phases = theta + freq * _RAMP
        y = seg * np.exp(-1j * phases)
        if collect:
            out[b * PHASE_BLOCK : (b + 1) * PHASE_BLOCK] = y
        if b * PHASE_BLOCK < freeze_below:
            theta = _wrap(theta + freq * PHASE_BLOCK)
            continue
        hats = _POINTS[slice_positions(y)]
        err = y * np.conj(hats)
        power = np.mean(err.real**2 + err.imag**2) + 1e-30
        e = float(np.mean(err.imag)) / power
        theta = _wrap(theta + freq * PHASE_BLOCK + kp * e)
        freq += ki * e
        if freq > freq_limit:
            freq = freq_limit
        elif freq < -freq_limit:
            freq = -freq_limit
    # tail shorter than a block: apply the last ramp, no update
    tail = x.size - n_blocks * PHASE_BLOCK
    if tail and collect:
        phases = theta + freq * _RAMP[:tail]
        out[n_blocks * PHASE_BLOCK :] = x[n_blocks * PHASE_BLOCK :] * np.exp(-1j * phases)
    return theta, freq, out


def track_phase_two_pass(
    symbols: np.ndarray,
    state: PhaseLoopState,
    warmup_symbols: int,
    head_guard: int = 0,
) -> np.ndarray:
    """Derotate a symbol stream; backward warmup then full forward pass.

    `head_guard` symbols at the front are excluded from the backward pass and
    derotated with frozen loop state on the forward pass (chunk-edge junk).
    """
    x = np.ascontiguousarray(symbols, dtype=np.complex64)
    warmup = min(warmup_symbols, x.size)
    theta, freq = state.theta, state.freq
    if warmup > head_guard + 2 * PHASE_BLOCK:
        theta, freq, _ = _run_pass(
            x[head_guard:warmup][::-1], theta, -freq, state.kp, state.ki,
            collect=False, freq_limit=state.freq_limit,
        )
        freq = -freq  # second-order term flips with processing direction
        # theta converged at the guard boundary; rewind the ramp to symbol 0
        theta = _wrap(theta - freq * head_guard)
    theta, freq, out = _run_pass(
        x, theta, freq, state.kp, state.ki, collect=True, freeze_below=head_guard,
        freq_limit=state.freq_limit,
    )
    state.theta = theta
    state.freq = freq
    return out
