"""Command-line front end.

Subcommands compose via files: `txgen | channel | demod | stitch` over cf32
and block-message files reproduces the in-process `e2e` loop bit-exactly.
Exit codes: 0 success, 1 runtime failure (one-line diagnostic), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import iqfile
from .channel import ChannelConfig, apply as chan_apply
from .combiner import ReorderBuffer, decode_block_stream, encode_block
from .distributor import UdpMulticastTransport, packetize, subscribe_and_assemble
from .e2e import DEFAULT_FULL_SCALE, run_e2e
from .errors import ChunkSdrError
from .monitor import MonitorServer, monitor_grab, monitor_ls
from .numerology import load_numerology
from .runtime import ReceiverContext, bench, default_workers, run_pipeline
from .modem import generate_stream


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def cmd_txgen(args) -> int:
    ctx = ReceiverContext.build(args.profile)
    stream = generate_stream(ctx.plan.profile, ctx.codec, args.frames, seed=args.seed)
    iqfile.write_cf32(args.output, stream.samples)
    if args.bits_out:
        np.packbits(stream.info_bits.reshape(-1)).tofile(args.bits_out)
    print(f"wrote {stream.samples.size} samples ({args.frames} frames) to {args.output}")
    return 0


def cmd_channel(args) -> int:
    samples = iqfile.read_cf32(args.input)
    cfg = ChannelConfig(
        clock_offset_ppm=args.ppm,
        carrier_freq_offset=args.freq,
        initial_phase=args.phase,
        esn0_db=args.esn0,
        seed=args.seed,
    )
    out = chan_apply(samples, cfg)
    iqfile.write_cf32(args.output, out)
    print(f"impaired {samples.size} -> {out.size} samples to {args.output}")
    return 0


def cmd_distribute(args) -> int:
    plan = load_numerology(args.profile, servers=args.servers)
    samples = iqfile.read_cf32(args.input)
    packed = packetize(samples, plan, full_scale=args.full_scale)
    if args.udp:
        transport = UdpMulticastTransport(plan)
        rng = np.random.default_rng(args.seed)
        sent = 0
        for pkt in packed.packets:
            if args.loss_rate and rng.random() < args.loss_rate:
                continue
            transport.send(pkt)
            sent += 1
        transport.close()
        print(f"sent {sent}/{len(packed.packets)} packets over UDP multicast")
    else:
        with open(args.output, "wb") as f:
            rng = np.random.default_rng(args.seed)
            sent = 0
            for pkt in packed.packets:
                if args.loss_rate and rng.random() < args.loss_rate:
                    continue
                f.write(pkt.to_wire())
                sent += 1
        print(f"wrote {sent}/{len(packed.packets)} packets to {args.output}")
    if packed.residual_samples:
        print(f"residual {packed.residual_samples} samples not packetized")
    return 0


def cmd_demod(args) -> int:
    ctx = ReceiverContext.build(args.profile, servers=args.servers)
    plan = ctx.plan
    samples = iqfile.read_cf32(args.input)
    packed = packetize(samples, plan, full_scale=args.full_scale)
    chunks = []
    for server in range(plan.distribution.num_servers):
        server_chunks, _ = subscribe_and_assemble(
            packed.packets, plan, server, full_scale=args.full_scale
        )
        chunks.extend(server_chunks)
    chunks.sort(key=lambda c: c.first_sample_number)
    result = run_pipeline(chunks, ctx, workers=args.workers)
    with open(args.output, "wb") as f:
        for block in result.blocks:
            f.write(encode_block(block))
    stats = result.stats
    print(
        f"demodulated {stats.chunks_in} chunks -> {stats.frames_out} blocks "
        f"({stats.decode_failures} failed) to {args.output}"
    )
    return 0


def cmd_stitch(args) -> int:
    blocks = []
    for path in args.inputs:
        with open(path, "rb") as f:
            blocks.extend(decode_block_stream(f.read()))
    # offline inputs merge by key; the buffer still dedups and logs gaps
    blocks.sort(key=lambda b: b.start_sample_number)
    buffer = ReorderBuffer(block_spacing=args.block_spacing, capacity=args.capacity) if blocks else None
    emitted = []
    if buffer is not None:
        for block in blocks:
            emitted.extend(buffer.submit(block))
        emitted.extend(buffer.flush())
    bits = np.concatenate([b.info_bits for b in emitted]) if emitted else np.zeros(0, np.uint8)
    out = sys.stdout.buffer if args.output == "-" else open(args.output, "wb")
    np.packbits(bits).tofile(out)
    if out is not sys.stdout.buffer:
        out.close()
    if buffer is not None:
        s = buffer.stats
        log = {
            "blocks": s.emitted,
            "duplicates": s.duplicates,
            "gaps": s.gaps,
            "stale": s.stale,
            "failed": sum(1 for b in emitted if b.failed),
        }
        print(json.dumps(log), file=sys.stderr)
    return 0


def cmd_e2e(args) -> int:
    ctx = ReceiverContext.build(args.profile, servers=args.servers)
    monitor = None
    taps_factory = None
    if args.monitor_port is not None:
        monitor = MonitorServer(port=args.monitor_port)
        from .monitor import TapSet

        taps_factory = lambda name: TapSet(name, registry=monitor)
        print(f"monitor on {monitor.address[0]}:{monitor.address[1]}", file=sys.stderr)
    result = run_e2e(
        ctx,
        frames=args.frames,
        esn0_db=args.esn0,
        ppm=args.ppm,
        freq_per_symbol=args.freq,
        workers=args.workers,
        seed=args.seed,
        loss_rate=args.loss_rate,
        taps_factory=taps_factory,
    )
    if monitor is not None:
        monitor.close()
    if args.json:
        print(json.dumps(result.summary()))
    else:
        s = result.summary()
        print(
            f"BER={s['ber']:.3g} frames={s['frames_recovered']}/{s['frames']} "
            f"duplicates={s['duplicates']} dropped_chunks={s['chunks_dropped']} "
            f"in {s['seconds']}s"
        )
    return 0 if result.bits_compared else 1


def cmd_bench(args) -> int:
    ctx = ReceiverContext.build(args.profile)
    workers = [int(w) for w in args.workers.split(",")]
    report = bench(ctx, workers, n_chunks=args.chunks, backend=args.backend,
                   seed=args.seed, seconds=args.seconds)
    if args.out:
        with open(args.out, "w") as f:
            f.write(report.to_json())
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.to_csv())
    if args.json:
        print(report.to_json())
    else:
        for e in report.entries:
            print(
                f"workers={e.workers} throughput={e.input_samples_per_second/1e6:.2f} Msps "
                f"t_p={e.t_p_mean*1e3:.0f}ms realtime_ok={e.realtime_ok}"
            )
    return 0


def cmd_monitor(args) -> int:
    addr = _parse_addr(args.addr)
    if args.monitor_cmd == "ls":
        for ad in monitor_ls(addr):
            print(f"{ad.name}\t{ad.dtype}\thost={ad.host_id}\tthread={ad.thread_id}")
        return 0
    data = monitor_grab(addr, args.name, args.count)
    if data.dtype == np.complex64:
        iqfile.write_cf32(args.output, data)
    else:
        data.astype("<f4").tofile(args.output)
    print(f"captured {data.size} samples to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chunksdr", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, profile=True):
        if profile:
            sp.add_argument("--profile", default="desk", help="profile name or path")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("txgen", help="synthesize a framed waveform")
    common(sp)
    sp.add_argument("--frames", type=int, default=64)
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--bits-out", help="also write the packed payload bits")
    sp.set_defaults(func=cmd_txgen)

    sp = sub.add_parser("channel", help="apply channel impairments to an IQ file")
    common(sp, profile=False)
    sp.add_argument("-i", "--input", required=True)
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--ppm", type=float, default=0.0, help="clock offset, ppm")
    sp.add_argument("--freq", type=float, default=0.0, help="carrier offset, cycles/sample")
    sp.add_argument("--phase", type=float, default=0.0, help="initial phase, radians")
    sp.add_argument("--esn0", type=float, default=None, help="Es/N0 in dB (omit: noiseless)")
    sp.set_defaults(func=cmd_channel)

    sp = sub.add_parser("distribute", help="packetize and distribute an IQ file")
    common(sp)
    sp.add_argument("-i", "--input", required=True)
    sp.add_argument("-o", "--output", help="packet wire-format output file")
    sp.add_argument("--servers", type=int, default=1)
    sp.add_argument("--loss-rate", type=float, default=0.0)
    sp.add_argument("--full-scale", type=float, default=DEFAULT_FULL_SCALE)
    sp.add_argument("--udp", action="store_true", help="send over UDP multicast instead")
    sp.set_defaults(func=cmd_distribute)

    sp = sub.add_parser("demod", help="demodulate an IQ file into decoded blocks")
    common(sp)
    sp.add_argument("-i", "--input", required=True)
    sp.add_argument("-o", "--output", required=True, help="block-message output file")
    sp.add_argument("--servers", type=int, default=1)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--full-scale", type=float, default=DEFAULT_FULL_SCALE)
    sp.set_defaults(func=cmd_demod)

    sp = sub.add_parser("stitch", help="reorder decoded-block files into a bitstream")
    sp.add_argument("inputs", nargs="+", help="block-message files")
    sp.add_argument("-o", "--output", required=True, help="output file or - for stdout")
    sp.add_argument("--block-spacing", type=int, required=True, help="nominal samples per block")
    sp.add_argument("--capacity", type=int, default=64)
    sp.set_defaults(func=cmd_stitch)

    sp = sub.add_parser("e2e", help="full tx -> channel -> distribute -> demod -> stitch loop")
    common(sp)
    sp.add_argument("--frames", type=int, default=64)
    sp.add_argument("--esn0", type=float, default=12.0)
    sp.add_argument("--ppm", type=float, default=0.0)
    sp.add_argument("--freq", type=float, default=0.0, help="carrier offset, cycles/SYMBOL")
    sp.add_argument("--workers", type=int, default=default_workers())
    sp.add_argument("--servers", type=int, default=1)
    sp.add_argument("--loss-rate", type=float, default=0.0)
    sp.add_argument("--monitor-port", type=int, default=None)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_e2e)

    sp = sub.add_parser("bench", help="throughput sweep over worker counts")
    common(sp)
    sp.add_argument("--workers", default="1,2,4")
    sp.add_argument("--chunks", type=int, default=8, help="corpus size (chunks)")
    sp.add_argument("--seconds", type=float, default=None,
                    help="cycle the corpus for this long per worker count")
    sp.add_argument("--backend", choices=["process", "thread"], default="process")
    sp.add_argument("--out", help="JSON report path")
    sp.add_argument("--csv", help="CSV report path")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("monitor", help="query a running monitor endpoint")
    msub = sp.add_subparsers(dest="monitor_cmd", required=True)
    mls = msub.add_parser("ls")
    mls.add_argument("--addr", required=True, help="host:port from the advert")
    mls.set_defaults(func=cmd_monitor)
    mgrab = msub.add_parser("grab")
    mgrab.add_argument("name")
    mgrab.add_argument("-n", "--count", type=int, default=4096)
    mgrab.add_argument("-o", "--output", required=True)
    mgrab.add_argument("--addr", required=True)
    mgrab.set_defaults(func=cmd_monitor)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChunkSdrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
