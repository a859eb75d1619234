"""Command-line interface.

Subcommands: simulate, optimize, bench, alice, bob, latlon.  Exit codes:
0 success, 2 argument error, 3 protocol error, 4 numerical failure or
non-convergence.  QTRI_SEED sets the default seed; an explicit --seed wins.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from typing import Optional

from .bloch import Direction, direction_to_latlon
from .channel import (
    DEFAULT_PORT,
    StreamTransport,
    alice_endpoint,
    bob_endpoint,
)
from .errors import ChannelError, ConfigurationError, NumericalFailureError, SizeLimitError
from .experiments import (
    BenchmarkConfig,
    export,
    fit_power_law,
    run_session,
    run_trials,
    summarize,
    summary_csv_path,
)
from .bloch import fibonacci_grid
from .protocol import GroundTruth, ProtocolConfig, sample_truth, transcript_to_json
from .seesaw import SeesawConfig, default_outcomes, result_to_json_dict, seesaw_optimize
from .serialize import canonical_json

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_PROTOCOL = 3
EXIT_NUMERIC = 4


def _default_seed() -> int:
    env = os.environ.get("QTRI_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigurationError(f"QTRI_SEED must be an integer, got {env!r}") from exc
    return 0


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host and not _:
        host, port = text, ""
        if host.isdigit():
            host, port = "", host
    try:
        return host or "127.0.0.1", int(port) if port else DEFAULT_PORT
    except ValueError as exc:
        raise ConfigurationError(f"bad address {text!r}, expected HOST[:PORT]") from exc


def _open_transport(listen: Optional[str], connect: Optional[str]) -> StreamTransport:
    if listen is not None:
        host, port = _parse_addr(listen)
        server = socket.create_server((host, port))
        conn, _ = server.accept()
        server.close()
        return StreamTransport.from_socket(conn)
    host, port = _parse_addr(connect)
    return StreamTransport.from_socket(socket.create_connection((host, port)))


def _add_net_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--listen", metavar="HOST[:PORT]", help=f"accept one session (default port {DEFAULT_PORT})")
    group.add_argument("--connect", metavar="HOST[:PORT]", help="connect to a waiting peer")


def _hemisphere(arg: Optional[str]) -> Optional[Direction]:
    if arg is None:
        return None
    try:
        x, y, z = (float(v) for v in arg.split(","))
        return Direction.normalized(x, y, z)
    except ValueError as exc:
        raise ConfigurationError(f"bad hemisphere {arg!r}, expected X,Y,Z") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtri", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one protocol round in process")
    p.add_argument("--n", type=int, default=96, help="number of particles (default 96)")
    p.add_argument("--seed", type=int, default=None, help="session seed (default QTRI_SEED or 0)")
    p.add_argument("--strategy", choices=("frame", "mle", "collective"), default="mle")
    p.add_argument("--grid", type=int, default=2000, help="sphere grid size for mle (default 2000)")
    p.add_argument("--hemisphere", default=None, help="prior hint X,Y,Z restricting the truth hemisphere")

    p = sub.add_parser("optimize", help="optimize a collective measurement for a pattern")
    p.add_argument("--pattern", required=True, help="aligned/anti-aligned pattern, e.g. u, ud, uudd")
    p.add_argument("--grid", type=int, default=2000, help="sphere grid size (default 2000)")
    p.add_argument("--outcomes", type=int, default=None, help="POVM outcome count (default 30 per qubit)")
    p.add_argument("--tol", type=float, default=1e-8, help="relative objective stall tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="iteration cap (default 500)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--compare", default=None, metavar="PATTERN", help="also optimize this pattern and report both")

    p = sub.add_parser("bench", help="Monte Carlo benchmark across particle counts")
    p.add_argument("--strategy", choices=("frame", "mle", "collective"), required=True)
    p.add_argument("--n", required=True, help="comma list of particle counts, e.g. 8,16,32")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid", type=int, default=2000)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: available parallelism)")
    p.add_argument("--hemisphere", default=None)
    p.add_argument("--out", default=None, help="output path (.csv or .json decides the format)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="override format inferred from --out")

    p = sub.add_parser("alice", help="networked Alice endpoint")
    _add_net_flags(p)
    p.add_argument("--n", type=int, default=96)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("bob", help="networked Bob endpoint")
    _add_net_flags(p)
    p.add_argument("--strategy", choices=("frame", "mle", "collective"), default="mle")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid", type=int, default=2000)

    p = sub.add_parser("latlon", help="convert a direction to latitude/longitude")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--z", type=float, required=True)

    return parser


def _cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    config = ProtocolConfig(args.n, seed, _hemisphere(args.hemisphere))
    grid = fibonacci_grid(args.grid) if args.strategy in ("mle", "collective") else None
    transcript = run_session(config, args.strategy, grid=grid)
    print(transcript_to_json(transcript))
    lat, lon = direction_to_latlon(transcript.estimate.direction)
    print(f"lat {lat} lon {lon}")
    return EXIT_OK


def _optimize_one(pattern: str, args) -> tuple[dict, bool]:
    seed = args.seed if args.seed is not None else _default_seed()
    outcomes = args.outcomes if args.outcomes is not None else default_outcomes(len(pattern))
    config = SeesawConfig(
        n_outcomes=outcomes,
        grid_size=args.grid,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=seed,
    )
    result = seesaw_optimize(pattern, config)
    return result_to_json_dict(pattern, config, result), result.converged


def _cmd_optimize(args) -> int:
    primary, converged = _optimize_one(args.pattern, args)
    if args.compare is None:
        print(canonical_json(primary))
        return EXIT_OK if converged else EXIT_NUMERIC
    other, other_converged = _optimize_one(args.compare, args)
    doc = {
        "primary": primary,
        "compare": other,
        "fidelity_gap": primary["fidelity"] - other["fidelity"],
    }
    print(canonical_json(doc))
    return EXIT_OK if (converged and other_converged) else EXIT_NUMERIC


def _cmd_bench(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        n_values = tuple(int(v) for v in args.n.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad --n {args.n!r}, expected a comma list of integers") from exc
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    config = BenchmarkConfig(
        strategy=args.strategy,
        n_values=n_values,
        trials=args.trials,
        master_seed=seed,
        grid_size=args.grid,
        hemisphere_hint=_hemisphere(args.hemisphere),
        threads=max(1, threads),
    )
    results = run_trials(config)
    summaries = summarize(results)
    exponent = None
    positive = [s for s in summaries if s.mean_angle_deg > 0]
    if len({s.n for s in positive}) >= 3:
        exponent = fit_power_law(positive)
    doc = {
        "summaries": [
            {
                "n": s.n, "strategy": s.strategy, "trials": s.trials,
                "mean_fidelity": s.mean_fidelity, "std_err": s.std_err,
                "mean_angle_deg": s.mean_angle_deg,
            }
            for s in summaries
        ],
        "power_law_exponent": exponent,
    }
    print(canonical_json(doc))
    if args.out is not None:
        fmt = args.format or ("json" if args.out.endswith(".json") else "csv")
        export(results, summaries, fmt, args.out)
        if fmt == "csv":
            print(f"wrote {args.out} and {summary_csv_path(args.out)}", file=sys.stderr)
        else:
            print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_alice(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    config = ProtocolConfig(args.n, seed)
    truth = sample_truth(config)
    transport = _open_transport(args.listen, args.connect)
    try:
        transcript = alice_endpoint(truth, config, transport)
    finally:
        transport.close()
    print(transcript_to_json(transcript))
    return EXIT_OK


def _cmd_bob(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    transport = _open_transport(args.listen, args.connect)
    try:
        transcript = bob_endpoint(args.strategy, transport, seed, grid_size=args.grid)
    finally:
        transport.close()
    print(transcript_to_json(transcript))
    return EXIT_OK


def _cmd_latlon(args) -> int:
    direction = Direction.normalized(args.x, args.y, args.z)
    lat, lon = direction_to_latlon(direction)
    print(f"lat {lat} lon {lon}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "optimize": _cmd_optimize,
    "bench": _cmd_bench,
    "alice": _cmd_alice,
    "bob": _cmd_bob,
    "latlon": _cmd_latlon,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, SizeLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except ChannelError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
