"""Experiment runner CLI.

Subcommands::

    run        one backend over one trace -> CSV row(s) + summary
    compare    several backends over a shared trace -> CSV table
    analyze    security math: combination counts, guessing probabilities
    gen-trace  write a synthetic trace to a text file
    selftest   quick cross-module invariant suite

Configuration comes from flags, optionally seeded from a ``key=value`` file
(``--config``); explicit flags win.  Exit codes: 0 success, 1 usage or
configuration error, 2 tamper alarm under ``--strict``.
"""

import argparse
import sys

import numpy as np

from .analysis import SecurityParams, comb, p1, p2, secrecy_exhaustive
from .codec import CodecParams
from .ctr_baseline import CtrConfig
from .engine import (
    BACKEND_NAMES,
    ExperimentConfig,
    TimingConfig,
    build_backend,
    compare,
    run,
    run_experiment,
    to_csv,
)
from .layout import GeometryConfig
from .pathoram import OramConfig
from .stash import StashConfig
from .workloads import TraceSpec, events_of, load_trace, write_trace


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_geometry_flags(p):
    p.add_argument("--logical-blocks", type=int, default=1024)
    p.add_argument("--k", type=int, default=32, help="shares per logical block")
    p.add_argument("--t", type=int, default=None, help="reconstruction threshold")
    p.add_argument("--w", type=int, default=8, help="8-byte segments per block")
    p.add_argument("--n-seed", type=int, default=1, help="integrity seed coefficients")
    p.add_argument("--s", type=int, default=4, help="share slots per physical block")
    p.add_argument("--d", type=int, default=16, help="dummy blocks per access")
    p.add_argument("--physical-blocks", type=int, default=None)
    p.add_argument("--slack", type=float, default=1.1)
    p.add_argument("--stash-bytes", type=int, default=32768)
    p.add_argument("--high-watermark", type=float, default=0.75)
    p.add_argument("--low-watermark", type=float, default=0.5)
    p.add_argument("--oram-height", type=int, default=27)
    p.add_argument("--bucket-size", type=int, default=4)
    p.add_argument("--oram-stash-bytes", type=int, default=32768)
    p.add_argument("--utilization", type=float, default=0.5)


def _add_timing_flags(p):
    p.add_argument("--block-ns", type=float, default=50.0)
    p.add_argument("--width", type=int, default=8, help="overlapped transactions")
    p.add_argument("--seg-ns", type=float, default=19.0)
    p.add_argument("--recon-ns", type=float, default=60.0)
    p.add_argument("--aes-ns", type=float, default=40 / 3.0)


def _add_trace_flags(p):
    p.add_argument(
        "--trace", default="rand", choices=["seq", "rand", "conv", "dlrm", "file"]
    )
    p.add_argument("--trace-file", default=None)
    p.add_argument("--count", type=int, default=100000)
    p.add_argument("--read-fraction", type=float, default=0.5)
    p.add_argument("--stride", type=int, default=1)


def _experiment_config(args):
    return ExperimentConfig(
        logical_blocks=args.logical_blocks,
        codec=CodecParams(k=args.k, t=args.t, w=args.w, n_seed=args.n_seed),
        geom=GeometryConfig(
            args.logical_blocks, args.s, args.physical_blocks, args.slack
        ),
        stash=StashConfig(args.stash_bytes, args.high_watermark, args.low_watermark),
        d=args.d,
        oram=OramConfig(
            args.oram_height, args.bucket_size, args.oram_stash_bytes, args.utilization
        ),
        ctr=CtrConfig(),
        timing=TimingConfig(
            args.block_ns, args.width, args.seg_ns, args.recon_ns, args.aes_ns
        ),
        trace=TraceSpec(
            kind=args.trace,
            count=args.count,
            read_fraction=args.read_fraction,
            stride=args.stride,
            seed=args.seed,
            path=args.trace_file,
        ),
        seed=args.seed,
    )


def _emit_csv(text, out):
    if out and out != "-":
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _summarize(reports, file=sys.stderr):
    for r in reports:
        print(
            f"[{r.backend}] ops={r.logical_ops} reads={r.block_reads} "
            f"writes={r.block_writes} hits={r.stash_hits} "
            f"alarms={r.tamper_alarms} time={r.simulated_ns / 1e6:.3f} ms "
            f"normalized={r.normalized_time:.3f}",
            file=file,
        )


class _CorruptingBackend:
    """Diagnostics wrapper: flips one stored share bit after op N."""

    def __init__(self, inner, after, rng):
        self._inner = inner
        self._after = after
        self._rng = rng
        self._count = 0
        self.name = inner.name

    def handle(self, is_read, addr, data=None):
        if self._count == self._after:
            self._flip()
        self._count += 1
        return self._inner.handle(is_read, addr, data)

    def _flip(self):
        # spray distinct bit flips over a quarter of the stored shares so a
        # following reconstruction is certain to pick up a corrupted one
        ctl = self._inner.controller
        occupied = np.flatnonzero(ctl.map.reverse >= 0)
        n = max(1, occupied.size // 4)
        slots = self._rng.choice(occupied, size=n, replace=False)
        bits = np.uint64(1) << self._rng.integers(0, 64, size=n, dtype=np.uint64)
        ctl.mem.reshape(-1, 2)[slots, 1] ^= bits

    def __getattr__(self, name):
        return getattr(self._inner, name)


def _cmd_run(args):
    ecfg = _experiment_config(args)
    if args.corrupt_after is not None:
        if not args.backend.startswith("ssm"):
            raise UsageError("--corrupt-after only applies to ssm backends")
        is_read, addrs = load_trace(ecfg.trace, ecfg.logical_blocks)
        backend = _CorruptingBackend(
            build_backend(args.backend, ecfg),
            args.corrupt_after,
            np.random.default_rng(ecfg.seed ^ 0xC044),
        )
        report = run(
            backend, is_read, addrs, ecfg.timing,
            trace_label=ecfg.trace_label(), seed=ecfg.seed, verify_data=False,
        )
        report.normalized_time = float("nan")
        reports = [report]
    else:
        report, _ = run_experiment(args.backend, ecfg)
        reports = [report]
    _emit_csv(to_csv(reports), args.out)
    _summarize(reports)
    if args.strict and any(r.tamper_alarms for r in reports):
        return 2
    return 0


def _cmd_compare(args):
    names = [n.strip() for n in args.backends.split(",") if n.strip()]
    for n in names:
        if n not in BACKEND_NAMES:
            raise UsageError(f"unknown backend {n!r}; choose from {BACKEND_NAMES}")
    ecfg = _experiment_config(args)
    reports = compare(names, ecfg)
    _emit_csv(to_csv(reports), args.out)
    _summarize(reports)
    if args.strict and any(r.tamper_alarms for r in reports):
        return 2
    return 0


def _cmd_analyze(args):
    params = SecurityParams(
        total=args.total, k=args.k, t=args.t if args.t is not None else args.k // 2,
        d=args.d, s=args.s, n_accesses=args.n,
    )
    rows = []
    if args.comb:
        c = comb(params.k, params.t)
        rows.append(("C(k,t)", f"{c}", f"{np.log10(float(c)):.6f}"))
    if args.p1:
        r = p1(params)
        rows.append(("p1", f"{r.value:.6e}", f"{r.log10:.6f}"))
    if args.p2:
        v = p2(params)
        rows.append(("p2", f"{v:.6e}", f"{np.log10(v):.6f}"))
    if not rows:
        raise UsageError("analyze: pick at least one of --comb, --p1, --p2")
    width = max(len(r[0]) for r in rows)
    print(f"{'quantity':<{width}}  {'value':>14}  {'log10':>12}")
    for name, value, log in rows:
        print(f"{name:<{width}}  {value:>14}  {log:>12}")
    return 0


def _cmd_gen_trace(args):
    if args.trace == "file":
        raise UsageError("gen-trace generates synthetic kinds, not 'file'")
    spec = TraceSpec(
        kind=args.trace,
        count=args.count,
        read_fraction=args.read_fraction,
        stride=args.stride,
        seed=args.seed,
    )
    is_read, addrs = load_trace(spec, args.logical_blocks)
    write_trace(events_of(is_read, addrs), args.out)
    print(f"wrote {len(addrs)} events to {args.out}", file=sys.stderr)
    return 0


def _cmd_selftest(args):
    from . import selftest

    return selftest.run_all(verbose=True)


def _load_config_defaults(argv):
    """Pull `--config FILE` out of argv and parse key=value defaults."""
    defaults = {}
    rest = []
    i = 0
    while i < len(argv):
        if argv[i] == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a file argument")
            path = argv[i + 1]
            i += 2
            with open(path) as fh:
                for lineno, line in enumerate(fh, start=1):
                    text = line.strip()
                    if not text or text.startswith("#"):
                        continue
                    if "=" not in text:
                        raise UsageError(f"{path}:{lineno}: expected key=value")
                    key, value = text.split("=", 1)
                    defaults[key.strip().replace("-", "_")] = value.strip()
        else:
            rest.append(argv[i])
            i += 1
    return defaults, rest


def _apply_config_defaults(parser, defaults):
    """Install config-file values as typed defaults on every subcommand."""
    sub_actions = parser._subparsers._group_actions[0].choices.values()
    known = set()
    for sp in sub_actions:
        updates = {}
        for action in sp._actions:
            if action.dest not in defaults:
                continue
            known.add(action.dest)
            raw = defaults[action.dest]
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    value = action.type(raw)
                except ValueError:
                    raise UsageError(
                        f"config key {action.dest}: bad value {raw!r}"
                    ) from None
            else:
                value = raw
            if action.choices is not None and value not in action.choices:
                raise UsageError(
                    f"config key {action.dest}: {value!r} not in {action.choices}"
                )
            updates[action.dest] = value
        sp.set_defaults(**updates)
    unknown = set(defaults) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")


def build_parser():
    parser = _Parser(prog="scattermem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run")
    p_run.add_argument("--backend", default="ssm", choices=BACKEND_NAMES)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", default="-")
    p_run.add_argument("--strict", action="store_true")
    p_run.add_argument(
        "--corrupt-after", type=int, default=None,
        help="diagnostics: flip one stored share bit after op N",
    )
    _add_geometry_flags(p_run)
    _add_timing_flags(p_run)
    _add_trace_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare")
    p_cmp.add_argument("--backends", default="np,sgx,ssm")
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--out", default="-")
    p_cmp.add_argument("--strict", action="store_true")
    _add_geometry_flags(p_cmp)
    _add_timing_flags(p_cmp)
    _add_trace_flags(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_an = sub.add_parser("analyze")
    p_an.add_argument("--p1", action="store_true")
    p_an.add_argument("--p2", action="store_true")
    p_an.add_argument("--comb", action="store_true")
    p_an.add_argument("--total", type=int, default=2 * 10**9)
    p_an.add_argument("--k", type=int, default=32)
    p_an.add_argument("--t", type=int, default=None)
    p_an.add_argument("--d", type=int, default=16)
    p_an.add_argument("--s", type=int, default=4)
    p_an.add_argument("--n", type=int, default=1, help="accesses between write-backs")
    p_an.set_defaults(func=_cmd_analyze)

    p_gen = sub.add_parser("gen-trace")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    _add_geometry_flags(p_gen)
    _add_trace_flags(p_gen)
    p_gen.set_defaults(func=_cmd_gen_trace)

    p_self = sub.add_parser("selftest")
    p_self.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        defaults, rest = _load_config_defaults(argv)
        parser = build_parser()
        if defaults:
            _apply_config_defaults(parser, defaults)
        args = parser.parse_args(rest)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
