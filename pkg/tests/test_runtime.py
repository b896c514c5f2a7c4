"""Worker-pool pipeline and the benchmark harness."""

import json
import threading

import numpy as np
import pytest

from chunksdr.distributor import ChunkRecord
from chunksdr.e2e import run_e2e
from chunksdr.runtime import (
    bench,
    default_workers,
    make_bench_corpus,
    run_pipeline,
    run_pipeline_processes,
)


@pytest.fixture(scope="module")
def small_corpus(desk_ctx):
    return make_bench_corpus(desk_ctx, n_chunks=4, seed=3)


def _bitstream(blocks):
    return np.concatenate([b.info_bits for b in blocks]) if blocks else np.zeros(0, np.uint8)


class TestRunPipeline:
    def test_worker_count_invariance(self, desk_ctx, small_corpus):
        """1 worker and 8 workers produce the identical combined output."""
        one = run_pipeline(small_corpus, desk_ctx, workers=1)
        eight = run_pipeline(small_corpus, desk_ctx, workers=8)
        assert [b.start_sample_number for b in one.blocks] == [
            b.start_sample_number for b in eight.blocks
        ]
        np.testing.assert_array_equal(_bitstream(one.blocks), _bitstream(eight.blocks))

    def test_lossless_frame_accounting(self, desk_ctx):
        """A lossless desk run recovers every scored frame (the generator
        ground truth bounds head/tail losses to one)."""
        result = run_e2e(desk_ctx, frames=64, esn0_db=12.0, workers=2, seed=9)
        assert result.frames_recovered >= 63
        assert result.ber == 0.0

    def test_stats_counters(self, desk_ctx, small_corpus):
        result = run_pipeline(small_corpus, desk_ctx, workers=2)
        stats = result.stats
        assert stats.chunks_in == len(small_corpus)
        assert stats.chunks_ok == len(small_corpus)
        assert stats.frames_out == len(result.blocks)
        assert len(stats.chunk_seconds) == len(small_corpus)
        assert set(stats.stage_seconds) >= {"resample", "timing", "phase", "framesync", "fec"}

    def test_workers_drain_and_exit(self, desk_ctx, small_corpus):
        """All worker threads terminate once the chunk source is exhausted."""
        before = threading.active_count()
        run_pipeline(iter(small_corpus), desk_ctx, workers=4)
        assert threading.active_count() == before

    def test_propagates_failures_as_counts(self, desk_ctx):
        """A noise-only chunk fails sync but never halts the stream."""
        rng = np.random.default_rng(5)
        n = desk_ctx.plan.chunk.chunk_samples
        noise = (rng.normal(size=n) + 1j * rng.normal(size=n)).astype(np.complex64)
        chunks = [ChunkRecord(0, noise)]
        result = run_pipeline(chunks, desk_ctx, workers=1)
        assert result.stats.sync_failures == 1
        assert result.blocks == []

    def test_pathological_chunk_counted_not_fatal(self, desk_ctx, small_corpus):
        """A chunk too short to filter is a counted error; the rest decode."""
        chunks = [ChunkRecord(0, np.zeros(10, np.complex64))] + list(small_corpus)
        result = run_pipeline(chunks, desk_ctx, workers=2)
        assert result.stats.chunk_errors == 1
        assert result.stats.chunks_ok == len(small_corpus)
        assert result.blocks


class TestProcessBackend:
    def test_matches_thread_backend(self, desk_ctx, small_corpus):
        threaded = run_pipeline(small_corpus, desk_ctx, workers=2)
        blocks, times = run_pipeline_processes(small_corpus, desk_ctx.plan, workers=2)
        assert [b.start_sample_number for b in blocks] == [
            b.start_sample_number for b in threaded.blocks
        ]
        np.testing.assert_array_equal(_bitstream(blocks), _bitstream(threaded.blocks))
        assert len(times) == len(small_corpus)


class TestBench:
    def test_report_shapes_and_serialization(self, desk_ctx):
        report = bench(desk_ctx, [1, 2], n_chunks=3, backend="thread", seed=1)
        assert [e.workers for e in report.entries] == [1, 2]
        loaded = json.loads(report.to_json())
        assert loaded["profile"] == "desk"
        assert len(loaded["entries"]) == 2
        csv = report.to_csv()
        assert csv.splitlines()[0].startswith("workers,")
        assert len(csv.splitlines()) == 3

    def test_stage_shares_sum_to_one(self, desk_ctx):
        report = bench(desk_ctx, [1], n_chunks=3, backend="thread", seed=2)
        shares = report.entries[0].stage_shares
        assert abs(sum(shares.values()) - 1.0) <= 0.01

    def test_default_workers_reserves_two_cores(self, monkeypatch):
        import os

        monkeypatch.setattr(os, "cpu_count", lambda: 8)
        assert default_workers() == 6
        monkeypatch.setattr(os, "cpu_count", lambda: 2)
        assert default_workers() == 1
