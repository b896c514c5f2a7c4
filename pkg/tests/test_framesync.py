"""Coherent frame synchronization."""

import numpy as np
import pytest

from chunksdr.demod.framesync import coherent_offset, frame_sync
from chunksdr.errors import NoPeak
from chunksdr.fec import PassthroughCodec
from chunksdr.modem import Preamble, build_frame
from chunksdr.numerology import scaled_profile


def make_symbol_stream(profile, n_frames, seed=0, lead_symbols=0):
    """Frames of random payload symbols behind the profile preamble."""
    codec = PassthroughCodec(profile.payload_bits)
    rng = np.random.default_rng(seed)
    frames = [
        build_frame(rng.integers(0, 2, codec.k).astype(np.uint8), profile, codec)
        for _ in range(n_frames)
    ]
    stream = np.concatenate(frames)
    if lead_symbols:
        lead = np.exp(2j * np.pi * rng.random(lead_symbols)).astype(np.complex64)
        stream = np.concatenate([lead, stream])
    return stream


class TestOffsets:
    def test_aligned_frames(self, desk_plan):
        profile = desk_plan.profile
        stream = make_symbol_stream(profile, 17, seed=1)
        result = frame_sync(stream, Preamble.for_profile(profile), profile.frame_symbols)
        assert result.offset == 0
        np.testing.assert_array_equal(
            result.frame_starts, profile.frame_symbols * np.arange(17)
        )
        assert result.payloads.shape == (17, profile.payload_symbols)

    def test_offset_detected(self, desk_plan):
        profile = desk_plan.profile
        stream = make_symbol_stream(profile, 17, seed=2, lead_symbols=311)
        result = frame_sync(stream, Preamble.for_profile(profile), profile.frame_symbols)
        assert result.offset == 311
        assert result.frame_starts.size == 17

    def test_extra_frame_when_offset_small(self, desk_plan):
        """A chunk starting just before a frame start can yield one more
        complete frame than the nominal count."""
        profile = desk_plan.profile
        f = profile.frame_symbols
        stream = make_symbol_stream(profile, 18, seed=3)[f - 1 : 2 * f - 1 + 16 * f + 40]
        result = frame_sync(stream, Preamble.for_profile(profile), f)
        assert result.offset == 1
        assert result.frame_starts.size == 17

    def test_discards_tail_partial_frame(self, desk_plan):
        profile = desk_plan.profile
        f = profile.frame_symbols
        stream = make_symbol_stream(profile, 5, seed=4)[: 4 * f + 100]
        result = frame_sync(stream, Preamble.for_profile(profile), f)
        assert result.frame_starts.size == 4

    def test_rotation_estimate(self, desk_plan):
        profile = desk_plan.profile
        stream = make_symbol_stream(profile, 6, seed=5) * np.exp(1j * np.pi / 4)
        result = frame_sync(stream, Preamble.for_profile(profile), profile.frame_symbols)
        assert abs(result.rotation - np.pi / 4) < 0.02

    def test_noise_var_estimate(self, desk_plan):
        profile = desk_plan.profile
        rng = np.random.default_rng(6)
        stream = make_symbol_stream(profile, 8, seed=6)
        sigma2 = 0.1
        noise = rng.normal(scale=np.sqrt(sigma2 / 2), size=stream.size)
        noise = noise + 1j * rng.normal(scale=np.sqrt(sigma2 / 2), size=stream.size)
        result = frame_sync(
            stream + noise.astype(np.complex64),
            Preamble.for_profile(profile),
            profile.frame_symbols,
        )
        assert abs(result.noise_var - sigma2) / sigma2 < 0.3


class TestNoPeak:
    def test_pure_noise_raises(self, desk_plan):
        profile = desk_plan.profile
        rng = np.random.default_rng(7)
        noise = (rng.normal(size=4 * profile.frame_symbols)
                 + 1j * rng.normal(size=4 * profile.frame_symbols)).astype(np.complex64)
        with pytest.raises(NoPeak):
            frame_sync(noise, Preamble.for_profile(profile), profile.frame_symbols)

    def test_too_short_raises(self, desk_plan):
        profile = desk_plan.profile
        with pytest.raises(NoPeak):
            frame_sync(
                np.zeros(profile.frame_symbols, np.complex64),
                Preamble.for_profile(profile),
                profile.frame_symbols,
            )


class TestCoherentGain:
    """Summing frames before correlating beats single-frame detection."""

    @staticmethod
    def _profile():
        from chunksdr.numerology import desk_profile

        profile, _ = desk_profile()
        # short preamble so the single-frame detector visibly struggles at 0 dB
        return scaled_profile(profile, preamble_symbols=16, payload_symbols=1034,
                              codec="passthrough")

    def test_detection_rates_at_0db(self):
        profile = self._profile()
        f = profile.frame_symbols
        preamble = Preamble.for_profile(profile)
        rng = np.random.default_rng(8)
        trials = 60
        coherent_hits = single_hits = 0
        clean = make_symbol_stream(profile, 17, seed=9)
        for t in range(trials):
            noise = (rng.normal(size=clean.size) + 1j * rng.normal(size=clean.size)).astype(
                np.complex64
            )  # Es/N0 = 0 dB: unit noise power per symbol
            x = clean + noise
            off_c, _ = coherent_offset(x, preamble, f)
            off_s, _ = coherent_offset(x[:f], preamble, f, n_sum=1)
            coherent_hits += off_c == 0
            single_hits += off_s == 0
        assert coherent_hits >= 0.95 * trials
        assert coherent_hits > single_hits
