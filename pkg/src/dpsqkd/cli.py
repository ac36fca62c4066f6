"""Command-line entry point: ``dpsqkd <subcommand>``.

Exit status is 0 on success, 1 on a configuration error and 2 on an I/O
error.
"""

import argparse
import csv
import io
import sys
from dataclasses import replace

import numpy as np

from . import harness, protocol
from .exceptions import ConfigurationError, ProtocolDesyncError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _host_port(text):
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host, int(port)


def build_parser():
    p = _Parser(prog="dpsqkd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def output_opts(sp):
        sp.add_argument("--out", help="write here instead of stdout")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--workers", type=int, default=1)
    output_opts(run)
    net = run.add_mutually_exclusive_group()
    net.add_argument("--announce-listen", type=int, metavar="PORT",
                     help="publish Bob's announcements to one TCP client")
    net.add_argument("--announce-connect", type=_host_port, metavar="HOST:PORT",
                     help="sift with announcements read from a TCP peer")

    ab = sub.add_parser("ablate", help="Faraday versus plain mirrors")
    ab.add_argument("--config", required=True)
    ab.add_argument("--workers", type=int, default=1)
    output_opts(ab)

    sw = sub.add_parser("sweep", help="interference power versus phase difference")
    sw.add_argument("--points", type=int, default=64)
    sw.add_argument("--dalpha", type=float, default=0.0)
    sw.add_argument("--dbeta", type=float, default=0.0)
    sw.add_argument("--seed", type=int, default=None,
                    help="randomize fibers and channel with this seed")
    sw.add_argument("--out")

    tb = sub.add_parser("table", help="key creation efficiency per scheme")
    tb.add_argument("--schemes", default="single:3,series:2,series:3,parallel:3")
    tb.add_argument("--frames", type=int, default=100_000)
    tb.add_argument("--seed", type=int, default=0)
    tb.add_argument("--workers", type=int, default=1)
    tb.add_argument("--out")

    sd = sub.add_parser("servo-demo", help="same drifting link with servo off and on")
    sd.add_argument("--config", required=True)
    output_opts(sd)
    return p


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def _cmd_run(args):
    cfg = harness.ExperimentConfig.load(args.config)
    run = harness.simulate(cfg, args.workers)
    announcements = None
    if args.announce_listen is not None:
        server = protocol.AnnouncementServer(args.announce_listen, host="0.0.0.0")
        print(f"announcements on port {server.port}", file=sys.stderr)
        server.send([protocol.announce(e) for e in run.events])
    elif args.announce_connect is not None:
        announcements = protocol.fetch_announcements(*args.announce_connect)
    _write(harness.render([harness.summarize(run, announcements)], args.format), args.out)


def _cmd_ablate(args):
    cfg = harness.ExperimentConfig.load(args.config)
    faraday, plain = harness.ablate_mirrors(cfg, args.workers)
    print("rows: faraday, plain", file=sys.stderr)
    _write(harness.render([faraday, plain], args.format), args.out)


def _cmd_sweep(args):
    if args.points < 1:
        raise ConfigurationError("--points must be >= 1")
    grid = np.linspace(0, 2 * np.pi, args.points, endpoint=False)
    rng = None if args.seed is None else np.random.default_rng(args.seed)
    res = harness.cosine_sweep(grid, args.dalpha, args.dbeta, rng)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("dphi", "power", "model"))
    model = res.scale * (1 + np.cos(args.dalpha + args.dbeta + grid))
    for row in zip(grid, res.power, model):
        w.writerow(f"{v:.12g}" for v in row)
    print(f"scale {res.scale:.12g} max_residual {res.max_residual:.3e}", file=sys.stderr)
    _write(buf.getvalue(), args.out)


def _cmd_table(args):
    labels = [s for s in args.schemes.split(",") if s]
    rows = harness.efficiency_table(labels, args.frames, args.seed, args.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scheme", "pulses", "predicted", "measured"))
    for r in rows:
        w.writerow((r.scheme, r.pulses, f"{r.predicted:.12g}", f"{r.measured:.12g}"))
    _write(buf.getvalue(), args.out)


def _cmd_servo_demo(args):
    cfg = harness.ExperimentConfig.load(args.config)
    results = []
    for enabled in (False, True):
        run = harness.simulate(replace(cfg, servo=replace(cfg.servo, enabled=enabled)))
        results.append(harness.summarize(run))
        print(f"servo {'on ' if enabled else 'off'}: mean |phase error| "
              f"{run.mean_abs_residual():.4f} rad", file=sys.stderr)
    print("rows: servo off, servo on", file=sys.stderr)
    _write(harness.render(results, args.format), args.out)


_COMMANDS = {
    "run": _cmd_run,
    "ablate": _cmd_ablate,
    "sweep": _cmd_sweep,
    "table": _cmd_table,
    "servo-demo": _cmd_servo_demo,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (ConfigurationError, ProtocolDesyncError, protocol.AnnouncementParseError) as exc:
        print(f"dpsqkd: configuration error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"dpsqkd: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
