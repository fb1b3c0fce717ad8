"""Command line entry point: map generation, rollouts, metrics, serving, replay."""

from __future__ import annotations

import argparse
import json
import sys
import time

from dojo.env import EpisodeConfig, load_episode_config
from dojo.roadgen import export_map, generate_map, validate

from dojo.harness.metrics import rates
from dojo.harness.protocol import build_manifest
from dojo.harness.render import render_episode, render_map
from dojo.harness.rollout import parse_seed_range, run_rollouts
from dojo.harness.server import serve


def _load_config(path: str | None) -> EpisodeConfig:
    return load_episode_config(path) if path else EpisodeConfig()


def cmd_gen_map(args) -> int:
    network = generate_map(args.scenario, args.seed)
    report = validate(network)
    if not report.ok:
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1
    if args.out:
        export_map(network, args.out)
        print(f"wrote {args.out}")
    else:
        print(f"{args.scenario} seed {args.seed}: "
              f"{len(network.lanes)} lanes, {len(network.junctions)} junctions, valid")
    return 0


def cmd_rollout(args) -> int:
    config = _load_config(args.config)
    seeds = parse_seed_range(args.seeds)
    records = run_rollouts(config, args.policy, seeds, out_dir=args.out)
    for r in records:
        print(f"seed {r.seed:>6}  {r.outcome:<9} return {r.total_return:8.2f} "
              f"steps {r.steps:>4}  completion {r.completion:.2f}")
    return 0


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    seeds = parse_seed_range(args.seeds)
    t0 = time.perf_counter()
    records = run_rollouts(config, args.policy, seeds)
    elapsed = time.perf_counter() - t0
    report = rates(records)
    for line in report.lines():
        print(line)
    steps = sum(r.steps for r in records)
    print(f"steps/s          {steps / elapsed:.0f}")
    return 0


def cmd_serve(args) -> int:
    config = _load_config(args.config)
    server = serve(args.bind, args.instances, config)
    host, port = server.address
    print(f"serving up to {args.instances} instances on {host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_replay(args) -> int:
    frames = render_episode(args.log, args.render)
    print(f"wrote {len(frames)} frames to {args.render}")
    return 0


def cmd_spec(args) -> int:
    config = _load_config(args.config)
    print(json.dumps(build_manifest(config), indent=2, sort_keys=True))
    return 0


def cmd_render_map(args) -> int:
    network = generate_map(args.scenario, args.seed)
    render_map(network, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dojo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-map", help="generate and validate a map")
    g.add_argument("--scenario", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="write the map as JSON")
    g.set_defaults(func=cmd_gen_map)

    r = sub.add_parser("rollout", help="run episodes and persist logs")
    r.add_argument("--config", help="episode config YAML")
    r.add_argument("--policy", choices=("random", "follow"), default="random")
    r.add_argument("--seeds", required=True, help="a..b, a,b,c or a single seed")
    r.add_argument("--out", help="directory for episode logs")
    r.set_defaults(func=cmd_rollout)

    b = sub.add_parser("bench", help="run episodes and report metrics")
    b.add_argument("--config", help="episode config YAML")
    b.add_argument("--policy", choices=("random", "follow"), default="random")
    b.add_argument("--seeds", required=True)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("serve", help="host environment instances over TCP")
    s.add_argument("--bind", default="127.0.0.1:7007")
    s.add_argument("--instances", type=int, default=8)
    s.add_argument("--config", help="default episode config YAML")
    s.set_defaults(func=cmd_serve)

    rp = sub.add_parser("replay", help="render an episode log to frames")
    rp.add_argument("--log", required=True)
    rp.add_argument("--render", required=True, help="output directory")
    rp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("spec", help="print the spec manifest for a config")
    sp.add_argument("--config", help="episode config YAML")
    sp.set_defaults(func=cmd_spec)

    rm = sub.add_parser("render-map", help="render a map to a PNG")
    rm.add_argument("--scenario", required=True)
    rm.add_argument("--seed", type=int, default=0)
    rm.add_argument("--out", required=True)
    rm.set_defaults(func=cmd_render_map)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
