"""Command-line interface: ``hmt <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

from . import __version__
from .decoding import decode
from .errors import HmtError
from .formats import (csv_text, dump_json, file_digest, fmt, model_parameters, read_forest, read_model,
                      write_forest, write_model)
from .inference import forest_log_likelihoods
from .learning import FitConfig, fit
from .oracle import enumerate_tree
from .selfcheck import DEFAULT_THRESHOLD, self_consistency_report
from .simulate import SimConfig, sample_forest


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _manifest(args, inputs: dict, path) -> None:
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    dump_json({
        "subcommand": args.command,
        "flags": flags,
        "inputs": {name: {"path": str(p), "sha256": file_digest(p)} for name, p in inputs.items() if p},
        "seed": getattr(args, "seed", None),
        "threads": args.threads,
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }, path)


def _manifest_path(out) -> Path:
    return Path(str(out) + ".manifest.json")


def cmd_simulate(args) -> None:
    model = read_model(args.model).check()
    cfg = SimConfig(args.trees, args.depth, args.branching, args.seed, args.emit_hidden)
    forest, hidden = sample_forest(model, cfg)
    write_forest(forest, args.out)
    if args.emit_hidden:
        rows = [(k, c, int(s)) for k, h in enumerate(hidden) for c, s in enumerate(h)]
        Path(str(args.out) + ".hidden.csv").write_text(csv_text(["tree_index", "node_id", "state"], rows))
    _manifest(args, {"model": args.model}, _manifest_path(args.out))


def cmd_likelihood(args) -> None:
    model = read_model(args.model).check()
    forest = read_forest(args.data)
    lls = forest_log_likelihoods(model, forest)
    rows = [(k, fmt(v)) for k, v in enumerate(lls)] + [("total", fmt(lls.sum()))]
    _emit(csv_text(["tree_index", "log_likelihood"], rows), args.out)
    if args.out:
        _manifest(args, {"model": args.model, "data": args.data}, _manifest_path(args.out))


def cmd_decode(args) -> None:
    model = read_model(args.model).check()
    forest = read_forest(args.data)
    rows = []
    for k, (t, obs) in enumerate(forest):
        res = decode(model, t, obs, args.criterion)
        rows.extend((k, c, int(s), fmt(res.log_score)) for c, s in enumerate(res.states))
    _emit(csv_text(["tree_index", "node_id", "state", "log_score"], rows), args.out)
    if args.out:
        _manifest(args, {"model": args.model, "data": args.data}, _manifest_path(args.out))


def cmd_learn(args) -> None:
    forest = read_forest(args.data)
    init_model = None
    if args.init.startswith("file:"):
        init_model = read_model(args.init[len("file:"):]).check()
    elif args.init != "kmeans":
        raise UsageError(f"--init must be 'kmeans' or 'file:PATH', got {args.init!r}")
    if init_model is None and args.states is None:
        raise UsageError("--states is required with --init kmeans")
    cfg = FitConfig(args.max_iters, args.tol, args.seed, init_model if init_model is not None else "kmeans",
                    args.std_floor)
    trace = fit(forest, cfg, states=args.states)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_model(trace.model, out / "model.json")
    rows = []
    for it, (m, ll) in enumerate(zip(trace.models, trace.log_likelihoods)):
        rows.extend((it, fmt(ll), name, fmt(v)) for name, v in model_parameters(m))
    (out / "trace.csv").write_text(csv_text(["iteration", "log_likelihood", "param_name", "value"], rows))
    inputs = {"data": args.data}
    if init_model is not None:
        inputs["init"] = args.init[len("file:"):]
    _manifest(args, inputs, out / "manifest.json")
    print(f"{trace.reason} after {trace.iterations} iterations, log-likelihood {trace.log_likelihood:.10g}")


def cmd_selfcheck(args) -> None:
    forest = read_forest(args.data)
    model = read_model(args.model)
    rep = self_consistency_report(forest, model, args.seed, args.threshold, args.max_distance)
    rows = [(r.m, r.n, r.pair_count, fmt(r.r_data), fmt(r.r_sim), fmt(r.abs_diff)) for r in rep.rows]
    text = csv_text(["m", "n", "pair_count", "r_data", "r_sim", "abs_diff"], rows)
    if args.out:
        Path(args.out).write_text(text)
        _manifest(args, {"model": args.model, "data": args.data}, _manifest_path(args.out))
    else:
        sys.stdout.write(text)
    print("PASS" if rep.passed else "FAIL")


def cmd_oracle(args) -> None:
    model = read_model(args.model).check()
    forest = read_forest(args.data)
    t, obs = forest.trees[args.tree_index], forest.observations[args.tree_index]
    res = enumerate_tree(model, t, obs, args.budget)
    print(json.dumps({
        "likelihood": res.likelihood,
        "map_assignment": res.map_assignment.tolist(),
        "map_score": res.map_score,
        "gamma": res.gamma_oracle.tolist(),
    }))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hmt", description="Hidden Markov trees with coupled branches.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: $HMT_THREADS, else 1); trees are processed in one vectorized sweep")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    s = sub.add_parser("simulate", help="sample a forest from a model")
    s.add_argument("--model", required=True)
    s.add_argument("--trees", type=int, required=True)
    s.add_argument("--depth", type=int, required=True, help="number of node levels")
    s.add_argument("--branching", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--emit-hidden", action="store_true", help="also write OUT.hidden.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("likelihood", help="per-tree log-likelihoods as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_likelihood)

    s = sub.add_parser("decode", help="most likely hidden states as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--criterion", choices=["map", "posterior"], default="map")
    s.add_argument("--out")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("learn", help="fit a model by expectation-maximization")
    s.add_argument("--data", required=True)
    s.add_argument("--states", type=int)
    s.add_argument("--max-iters", type=int, default=500)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init", default="kmeans", help="'kmeans' or 'file:PATH'")
    s.add_argument("--std-floor", type=float, default=1e-6)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("selfcheck", help="lineage-correlation consistency of a fitted model")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-distance", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_selfcheck)

    s = sub.add_parser("oracle")  # brute-force debugging aid, left out of the help listing
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--tree-index", type=int, default=0)
    s.add_argument("--budget", type=int, default=10**7)
    s.set_defaults(func=cmd_oracle)
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "oracle"]
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("hmt: a subcommand is required")
        if args.threads is None:
            args.threads = int(os.environ.get("HMT_THREADS", "1"))
        if args.threads < 1:
            raise UsageError("hmt: --threads must be positive")
        args.func(args)
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return 0
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except HmtError as e:
        print(f"error: {e.name}: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
