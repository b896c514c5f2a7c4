"""FEC: alist loading, encoder, min-sum decoder, batch contract."""

from itertools import combinations

import numpy as np
import pytest

from chunksdr.demod.softbits import SoftFrame
from chunksdr.errors import DimensionMismatch, LengthMismatch, ParseError
from chunksdr.fec import (
    BATCH_SIZE,
    LdpcCodec,
    PassthroughCodec,
    decode_batch,
    get_codec,
    load_matrix,
)
from importlib import resources


@pytest.fixture(scope="module")
def toy96():
    return get_codec("ldpc_96_48")


@pytest.fixture(scope="module")
def desk_code():
    return get_codec("ldpc_3060_1530")


def _alist_path(name):
    return str(resources.files("chunksdr.data").joinpath(f"{name}.alist"))


class TestLoadMatrix:
    def test_toy_dimensions(self):
        mat = load_matrix(_alist_path("ldpc_96_48"))
        assert mat.n == 96 and mat.m == 48
        assert mat.n - mat.m == 48

    def test_every_column_nonzero(self):
        mat = load_matrix(_alist_path("ldpc_3060_1530"))
        assert all(rows.size > 0 for rows in mat.col_rows)

    def test_truncated_file(self, tmp_path):
        text = resources.files("chunksdr.data").joinpath("ldpc_96_48.alist").read_text()
        p = tmp_path / "trunc.alist"
        p.write_text("\n".join(text.splitlines()[:20]))
        with pytest.raises(ParseError):
            load_matrix(p)

    def test_empty_column_rejected(self, tmp_path):
        p = tmp_path / "bad.alist"
        p.write_text("2 2\n1 1\n1 0\n1 1\n1\n0\n1\n2\n")
        with pytest.raises((ParseError, DimensionMismatch)):
            load_matrix(p)

    def test_girth_at_least_six(self):
        """No two columns share two rows (the generator's girth check)."""
        for name in ("ldpc_96_48", "ldpc_3060_1530"):
            mat = load_matrix(_alist_path(name))
            seen = set()
            for rows in mat.col_rows:
                for pair in combinations(sorted(rows.tolist()), 2):
                    assert pair not in seen, f"4-cycle in {name}"
                    seen.add(pair)


class TestEncoder:
    def test_all_zero_info(self, toy96, desk_code):
        for codec in (toy96, desk_code):
            cw = codec.encode(np.zeros(codec.k, np.uint8))
            assert not cw.any()

    @pytest.mark.parametrize("name", ["ldpc_96_48", "ldpc_3060_1530"])
    def test_zero_syndrome(self, name):
        codec = get_codec(name)
        rng = np.random.default_rng(1)
        for _ in range(20):
            cw = codec.encode(rng.integers(0, 2, codec.k, dtype=np.uint8))
            assert codec.syndrome(cw).max() == 0

    def test_length_mismatch(self, toy96):
        with pytest.raises(LengthMismatch):
            toy96.encode(np.zeros(10, np.uint8))

    def test_passthrough_identity(self):
        codec = PassthroughCodec(12)
        bits = np.arange(12) % 2
        np.testing.assert_array_equal(codec.encode(bits), bits)


def _brute_force_coset_oracle(codec, received_hard, max_weight=3):
    """Smallest error pattern (weight <= max_weight) with zero syndrome."""
    syn = codec.syndrome(received_hard)
    if not syn.any():
        return received_hard.copy()
    syn_int = int("".join(map(str, syn)), 2)
    col_syn = []
    for c in range(codec.n):
        e = np.zeros(codec.n, np.uint8)
        e[c] = 1
        col_syn.append(int("".join(map(str, codec.syndrome(e))), 2))
    for w in range(1, max_weight + 1):
        for combo in combinations(range(codec.n), w):
            acc = 0
            for c in combo:
                acc ^= col_syn[c]
            if acc == syn_int:
                fixed = received_hard.copy()
                for c in combo:
                    fixed[c] ^= 1
                return fixed
    return None


class TestDecoder:
    def test_noiseless_converges_immediately(self, toy96):
        rng = np.random.default_rng(2)
        cw = toy96.encode(rng.integers(0, 2, toy96.k, dtype=np.uint8))
        llrs = (1.0 - 2.0 * cw).astype(np.float32) * 30
        bits, ok, iterations = toy96.decode(llrs)
        assert ok[0] and iterations == 0
        np.testing.assert_array_equal(bits[0], cw)

    def test_three_flips_match_coset_oracle(self, toy96):
        """Weak-LLR triple flips: decoder output equals the brute-force
        minimum-weight coset decoding of the same received word."""
        rng = np.random.default_rng(3)
        info = rng.integers(0, 2, toy96.k, dtype=np.uint8)
        cw = toy96.encode(info)
        received = cw.copy()
        flips = rng.choice(toy96.n, 3, replace=False)
        received[flips] ^= 1
        llrs = (1.0 - 2.0 * received).astype(np.float32) * 4.0
        bits, ok, _ = toy96.decode(llrs)
        oracle = _brute_force_coset_oracle(toy96, received)
        assert oracle is not None
        assert ok[0]
        np.testing.assert_array_equal(bits[0], oracle)
        np.testing.assert_array_equal(bits[0], cw)

    def test_roundtrip_many(self, toy96):
        """decode(encode(x)) == x for strong LLRs, 1000 random words."""
        rng = np.random.default_rng(4)
        infos = rng.integers(0, 2, (1000, toy96.k), dtype=np.uint8)
        cws = np.array([toy96.encode(u) for u in infos])
        llrs = (1.0 - 2.0 * cws).astype(np.float32) * 20
        for i in range(0, 1000, BATCH_SIZE):
            bits, ok, _ = toy96.decode(llrs[i : i + BATCH_SIZE])
            assert ok.all()
            np.testing.assert_array_equal(bits[:, : toy96.k], infos[i : i + BATCH_SIZE])

    def test_early_termination_equivalence(self, toy96):
        """Early termination never changes the decoded output (100 noisy
        trials; both modes capture the first syndrome-zero decision)."""
        rng = np.random.default_rng(5)
        for trial in range(100):
            cw = toy96.encode(rng.integers(0, 2, toy96.k, dtype=np.uint8))
            x = 1.0 - 2.0 * cw.astype(np.float32)
            y = x + rng.normal(scale=0.7, size=toy96.n)
            llrs = (2.0 * y / 0.49).astype(np.float32)
            bits_et, ok_et, _ = toy96.decode(llrs, early_termination=True)
            bits_full, ok_full, _ = toy96.decode(llrs, early_termination=False)
            np.testing.assert_array_equal(bits_et, bits_full)
            np.testing.assert_array_equal(ok_et, ok_full)

    def test_batch_invariance(self, toy96):
        """Decoding words individually equals decoding them in one batch."""
        rng = np.random.default_rng(6)
        words = []
        for _ in range(BATCH_SIZE):
            cw = toy96.encode(rng.integers(0, 2, toy96.k, dtype=np.uint8))
            y = (1.0 - 2.0 * cw.astype(np.float32)) + rng.normal(scale=0.6, size=toy96.n)
            words.append((2.0 * y / 0.36).astype(np.float32))
        llrs = np.stack(words)
        batch_bits, batch_ok, _ = toy96.decode(llrs)
        for i in range(BATCH_SIZE):
            bits, ok, _ = toy96.decode(llrs[i : i + 1])
            np.testing.assert_array_equal(bits[0], batch_bits[i])
            assert ok[0] == batch_ok[i]

    def test_wrong_length_rejected(self, toy96):
        with pytest.raises(LengthMismatch):
            toy96.decode(np.zeros(95, np.float32))


class TestDecodeBatch:
    def _frame(self, codec, seed, start):
        rng = np.random.default_rng(seed)
        info = rng.integers(0, 2, codec.k, dtype=np.uint8)
        cw = codec.encode(info)
        llrs = (1.0 - 2.0 * cw).astype(np.float32) * 15
        return SoftFrame(start_sample_number=start, llrs=llrs), info

    def test_single_frame_padded_to_sixteen(self, toy96):
        """1 real + 15 all-zero pads in, exactly 1 block out."""
        frame, info = self._frame(toy96, 7, start=1680)
        blocks = decode_batch([frame], toy96)
        assert len(blocks) == 1
        assert blocks[0].start_sample_number == 1680
        assert not blocks[0].failed
        np.testing.assert_array_equal(blocks[0].info_bits, info)

    def test_full_batch(self, toy96):
        frames, infos = zip(*(self._frame(toy96, 100 + i, i * 96) for i in range(16)))
        blocks = decode_batch(list(frames), toy96)
        assert len(blocks) == 16
        for block, info in zip(blocks, infos):
            np.testing.assert_array_equal(block.info_bits, info)

    def test_failure_flagged_not_dropped(self, toy96):
        rng = np.random.default_rng(8)
        garbage = SoftFrame(
            start_sample_number=0,
            llrs=rng.normal(scale=2.0, size=toy96.n).astype(np.float32),
        )
        blocks = decode_batch([garbage], toy96, early_termination=True)
        assert len(blocks) == 1
        assert blocks[0].failed

    def test_batch_size_limits(self, toy96):
        frame, _ = self._frame(toy96, 9, 0)
        with pytest.raises(LengthMismatch):
            decode_batch([frame] * 17, toy96)
        with pytest.raises(LengthMismatch):
            decode_batch([], toy96)


class TestRegistry:
    def test_unknown_codec(self):
        with pytest.raises(ValueError):
            get_codec("nope")

    def test_payload_binding(self):
        with pytest.raises(DimensionMismatch):
            get_codec("ldpc_96_48", payload_bits=3060)

    def test_custom_alist_path(self, tmp_path):
        src = resources.files("chunksdr.data").joinpath("ldpc_96_48.alist").read_text()
        p = tmp_path / "my.alist"
        p.write_text(src)
        codec = get_codec(str(p))
        assert isinstance(codec, LdpcCodec)
        assert codec.n == 96
