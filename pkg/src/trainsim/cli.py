"""Command-line entry point.

    trainsim run CONFIG [--trace FILE]
    trainsim sweep CONFIG --axis n=10,100 | --axis topo=star,line,tree:2 [--out FILE]
    trainsim chain gen --seed HEX --m INT [--out FILE]
    trainsim chain show FILE
    trainsim trace show FILE [--kind KIND] [--limit N]

Exit status: 0 success, 2 usage or configuration error, 3 internal invariant
violation.  Results go to stdout as JSON or CSV; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import crypto, metrics
from .errors import ChainFormatError, ConfigError, InvalidParameter, TrainError
from .simnet import load_scenario, run
from .simnet.engine import RunResult, feasibility_warnings
from .simnet.trace import decode_records

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INTERNAL = 3


class InvariantViolation(TrainError):
    pass


def _load(path: str):
    scenario = load_scenario(path)
    env = os.environ.get("TRAIN_SEED")
    if env is not None:
        try:
            seed = int(env, 0)
        except ValueError:
            raise ConfigError(f"not an integer: {env!r}", "TRAIN_SEED") from None
        scenario = scenario.with_(seed=seed)
    return scenario


def check_invariants(result: RunResult) -> None:
    last = None
    for rec in result.trace.records:
        if last is not None and rec.time < last:
            raise InvariantViolation(f"trace time went backwards at t={rec.time}")
        last = rec.time
    everyone = set(range(1, result.topology.n + 1))
    for o in result.outcomes:
        if o.tally is None:
            continue
        a, f, r = o.tally.attest, o.tally.fail, o.tally.norep
        if a & f or a & r or f & r or (a | f | r) != everyone:
            raise InvariantViolation(f"instance {o.index}: tally sets do not partition the provers")


def _warn(messages) -> None:
    for msg in messages:
        print(f"warning: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    scenario = _load(args.config)
    _warn(feasibility_warnings(scenario))
    result = run(scenario)
    check_invariants(result)
    per_instance = {m.instance: m for m in metrics.instance_metrics(result)}
    tallies, mets = [], []
    for o in result.outcomes:
        m = per_instance[o.index]
        entry = {"instance": o.index, "t_attest": o.t_attest}
        if o.tally is not None:
            entry.update(o.tally.to_json(o.t_attest, m.toctou_sa_us))
        entry["renewal"] = [{"kind": e.kind, "index": e.index} for e in o.renewal]
        tallies.append(entry)
        met = m.to_json()
        try:
            met["strawman_toctou_us"] = metrics.strawman_toctou(result.trace, o.index)
        except TrainError:
            met["strawman_toctou_us"] = None
        mets.append(met)
    doc = {"tally": tallies, "metrics": mets, "chain_depleted": result.depleted}
    if args.trace:
        result.trace.write(args.trace)
    json.dump(doc, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    if result.depleted:
        print(f"error: chain_m: hash chain exhausted after {len(result.outcomes)} instance(s)",
              file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_sweep(args) -> int:
    axis, values = metrics.parse_axis(args.axis)
    base = _load(args.config)
    scenarios = metrics.sweep_scenarios(base, axis, values)
    if scenarios:
        _warn(feasibility_warnings(scenarios[0]))
    rows = [metrics.sweep_point(sc) for sc in scenarios]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            metrics.write_csv(rows, fh)
    else:
        metrics.write_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_chain_gen(args) -> int:
    try:
        seed = bytes.fromhex(args.seed)
    except ValueError:
        raise ConfigError("seed must be hex", "--seed") from None
    if args.m < 1:
        raise ConfigError("must be >= 1", "--m")
    root = crypto.H(b"train-chain-root" + seed)
    text = crypto.generate_chain(root, args.m).to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_chain_show(args) -> int:
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read chain file: {exc.strerror}", args.file) from None
    chain = crypto.HashChain.from_text(text)
    print(f"m={chain.m}")
    print(f"x_0 {chain.root.hex()}  root")
    for i, value in enumerate(chain.links, start=1):
        print(f"x_{i} {value.hex()}{'  anchor' if i == chain.m else ''}")
    return EXIT_OK


def cmd_trace_show(args) -> int:
    try:
        blob = Path(args.file).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc.strerror}", args.file) from None
    try:
        shown = 0
        for rec in decode_records(blob):
            if args.kind and rec.kind != args.kind:
                continue
            row = rec._asdict()
            row["data"] = rec.data.hex() if rec.data else None
            print(json.dumps(row, sort_keys=True))
            shown += 1
            if args.limit and shown >= args.limit:
                break
    except (ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"malformed trace file ({exc})", args.file) from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainsim", description="TRAIN network attestation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and print tally and metrics JSON")
    p_run.add_argument("config")
    p_run.add_argument("--trace", help="write the binary trace here (plus a .json sidecar)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one scenario per axis value and print CSV")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, help="n=10,100,... or topo=star,line,tree:2")
    p_sweep.add_argument("--out", help="write CSV here instead of stdout")
    p_sweep.set_defaults(func=cmd_sweep)

    p_chain = sub.add_parser("chain", help="hash-chain utilities")
    chain_sub = p_chain.add_subparsers(dest="chain_command", required=True)
    p_gen = chain_sub.add_parser("gen", help="generate a chain from a hex seed")
    p_gen.add_argument("--seed", required=True)
    p_gen.add_argument("--m", type=int, required=True)
    p_gen.add_argument("--out")
    p_gen.set_defaults(func=cmd_chain_gen)
    p_show = chain_sub.add_parser("show", help="validate and list a chain file")
    p_show.add_argument("file")
    p_show.set_defaults(func=cmd_chain_show)

    p_trace = sub.add_parser("trace", help="trace inspection")
    trace_sub = p_trace.add_subparsers(dest="trace_command", required=True)
    p_tshow = trace_sub.add_parser("show", help="print trace records as JSON lines")
    p_tshow.add_argument("file")
    p_tshow.add_argument("--kind")
    p_tshow.add_argument("--limit", type=int, default=0)
    p_tshow.set_defaults(func=cmd_trace_show)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ChainFormatError, InvalidParameter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except TrainError as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
