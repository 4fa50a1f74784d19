"""Command-line entry point: ``ehc run | suite | inspect | seed``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from ehc.config import MODES, load_config
from ehc.errors import EHCError
from ehc.experience import seed_memory
from ehc.harness import generate_suite, inspect_memory, make_agent, make_backend, run_benchmark, task_to_json
from ehc.memory import HierarchicalMemory
from ehc.store import save_store

log = logging.getLogger("ehc")


def _parser() -> argparse.ArgumentParser:
    def globals_parser(default):
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", default=default, help="flat key = value config file")
        g.add_argument("--seed", type=int, default=default, help="override the config seed")
        g.add_argument("--trace", action="store_true", default=default,
                       help="log prompts, replies and HTTP traffic")
        return g

    # global flags are accepted before or after the verb
    common = globals_parser(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="ehc", description=__doc__, parents=[globals_parser(None)])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one benchmark mode end to end")
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--tasks-per-category", type=int)
    run.add_argument("--report", help="report file path ({mode} is substituted)")
    run.add_argument("--store", help="write the final memory store here")

    suite = sub.add_parser("suite", parents=[common], help="print the synthetic task suite as JSON lines")
    suite.add_argument("--tasks-per-category", type=int)
    suite.add_argument("--out", help="write to a file instead of stdout")

    ins = sub.add_parser("inspect", parents=[common], help="tally a store file or dry-run a query")
    ins.add_argument("store")
    ins.add_argument("--query")
    ins.add_argument("-k", type=int, default=5)
    ins.add_argument("--category")
    ins.add_argument("--theta", type=float)

    seed = sub.add_parser("seed", parents=[common], help="create a store holding only seed exemplars")
    seed.add_argument("--store", required=True)
    seed.add_argument("--examples-per-category", type=int)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.trace else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        overrides = {"seed": args.seed}
        if args.command == "run":
            overrides.update({
                "mode": args.mode,
                "tasks_per_category": args.tasks_per_category,
                "report_path": args.report,
                "store_path": args.store,
            })
        elif args.command == "suite":
            overrides["tasks_per_category"] = args.tasks_per_category
        elif args.command == "seed":
            overrides["examples_per_category"] = args.examples_per_category
        cfg = load_config(args.config, overrides)

        if args.command == "run":
            run_benchmark(cfg, llm=make_backend(cfg, trace=args.trace), out=sys.stdout)
        elif args.command == "suite":
            lines = [task_to_json(t) for t in generate_suite(cfg.seed, cfg.tasks_per_category)]
            text = "".join(line + "\n" for line in lines)
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
        elif args.command == "inspect":
            theta = cfg.theta if args.theta is None else args.theta
            inspect_memory(args.store, args.query, args.k, args.category, theta, out=sys.stdout)
        elif args.command == "seed":
            agent = make_agent(cfg)
            memory = HierarchicalMemory(cfg.capacity, agent.embedder.dim, cfg.deep_theta_gate)
            n = seed_memory(memory, agent.categories, cfg.examples_per_category, cfg.seed_corpus or None)
            save_store(args.store, memory)
            print(f"seeded {n} records into {args.store}")
    except EHCError as exc:
        print(f"ehc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
