"""Single command-line entry point: datasets, solving, training, evaluation,
analysis, and weight tooling. Every command writes a run manifest; seeds
default to 0 and are always printed.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .manifest import write_manifest


def _error(msg: str, code: int = 1) -> int:
    print(json.dumps({"error": msg}), file=sys.stderr)
    return code


def _load_levels(path: str, split: str | None = None):
    from .levels import load_collection

    p = Path(path)
    if p.exists():
        return load_collection(p, split=split)
    raise FileNotFoundError(f"level source not found: {path}")


def _load_model(weights: str):
    """Infer the architecture from a weight file's tensor names and load it."""
    from .models import DRCConfig, DRCModel, ResNetModel, ResNetConfig
    from .weights_io import load_into, load_weights

    names = set(load_weights(weights))
    if any(n.startswith("resnet.") for n in names):
        model = ResNetModel(ResNetConfig())
    else:
        depth = 1 + max(int(n.split(".")[1][1:]) for n in names if n.startswith("drc.l"))
        ticks = 3 if depth == 3 else 1
        model = DRCModel(DRCConfig(depth=depth, ticks=ticks))
    load_into(model.params, weights)
    return model


# ---------------------------------------------------------------------------
# subcommands


def cmd_dataset_fetch(args) -> int:
    from .levels import fetch_dataset

    level_set = fetch_dataset(args.split, args.dest, base_url=args.base_url)
    write_manifest(args.dest, "dataset fetch", vars(args) | {"levels": len(level_set)},
                   seed=0, inputs={"base_url": args.base_url})
    print(json.dumps({"split": args.split, "levels": len(level_set)}))
    return 0


def cmd_dataset_info(args) -> int:
    level_set = _load_levels(args.path)
    print(json.dumps({
        "split": level_set.split,
        "levels": len(level_set),
        "files": {name: count for name, count in level_set.file_counts},
    }, indent=1))
    return 0


def cmd_play(args) -> int:
    from .engine import replay_records

    level_set = _load_levels(args.levels)
    file_idx, level_idx = (int(x) for x in args.level.split(":"))
    level = level_set.by_id(file_idx, level_idx)
    records = replay_records(level, args.actions)
    print(json.dumps({
        "rewards": [r["reward"] for r in records],
        "solved": bool(records and records[-1]["done"] and
                       sum(r["reward"] for r in records) > 9),
        "records": records,
    }, indent=1))
    return 0


def cmd_solve(args) -> int:
    from .solver import solve_batch

    level_set = _load_levels(args.levels)
    levels = list(level_set.levels)[: args.limit] if args.limit else list(level_set.levels)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    results, summary = solve_batch(levels, node_budget=args.node_budget,
                                   time_budget=args.time_budget, workers=args.workers,
                                   out_path=out)
    write_manifest(out.parent, "solve", vars(args), seed=0,
                   inputs={"levels": args.levels}, outputs=[str(out)])
    print(json.dumps(summary))
    return 0


def cmd_train(args) -> int:
    from .procgen import one_box_training_set
    from .rl import DESK_PROFILE, LossConfig, TrainConfig, VTraceConfig, train

    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
    if args.profile == "desk":
        overrides = DESK_PROFILE | overrides

    def pick(cls):
        fields = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in overrides.items() if k in fields})

    try:
        cfg = pick(TrainConfig)
        vt = pick(VTraceConfig)
        loss = pick(LossConfig)
    except (TypeError, ValueError) as e:
        print(json.dumps({"error": f"invalid config: {e}"}), file=sys.stderr)
        return 2
    if args.levels:
        levels = _load_levels(args.levels)
    else:
        levels = one_box_training_set()
    write_manifest(args.out, "train", overrides | {"arch": args.arch}, seed=cfg.seed,
                   inputs={"levels": args.levels or "builtin fixture set"})
    print(json.dumps({"seed": cfg.seed}))
    result = train(cfg, args.arch, args.out, levels, eval_levels=levels,
                   vtrace_cfg=vt, loss_cfg=loss)
    print(json.dumps({k: result[k] for k in ("env_steps", "stop_reason", "final_weights")}))
    return 0


def cmd_eval(args) -> int:
    from .rl.evaluate import evaluate

    model = _load_model(args.weights)
    levels = _load_levels(args.levels)
    res = evaluate(model, levels, sample=args.sample, deterministic=args.deterministic,
                   seed=args.seed)
    if args.out:
        write_manifest(args.out, "eval", vars(args), seed=args.seed,
                       inputs={"weights": args.weights, "levels": args.levels})
    print(json.dumps({"seed": args.seed, "n": res["n"], "success_rate": res["success_rate"],
                      "mean_return": res["mean_return"], "mean_length": res["mean_length"]}))
    return 0


def _parse_ns(text: str) -> tuple[int, ...]:
    ns = tuple(int(x) for x in text.split(","))
    if any(n < 0 for n in ns):
        raise argparse.ArgumentTypeError("--ns entries must be >= 0")
    return ns


def cmd_analyze(args) -> int:
    from .analysis import (
        categorize, cycle_start_histogram, detect_cycles, difficulty_join,
        thinking_sweep, time_to_box_table, solved_at_b_not_a, write_category_csv,
        write_sweep_csv,
    )

    model = _load_model(args.weights)
    levels = _load_levels(args.levels)
    if args.sample:
        from .levels import sample_levels

        chosen = sample_levels(levels, args.sample, args.seed)
    else:
        chosen = list(levels.levels)
    out = Path(args.out)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    write_manifest(out, f"analyze {args.what}", vars(args), seed=args.seed,
                   inputs={"weights": args.weights, "levels": args.levels})
    print(json.dumps({"seed": args.seed}))

    ns = args.ns
    if args.what == "thinking":
        table, records = thinking_sweep(model, chosen, ns=ns)
        write_sweep_csv(out / "tables" / "thinking_sweep.csv", records)
        (out / "tables" / "thinking_sweep.json").write_text(json.dumps(table, indent=1))
        print(json.dumps(table))
        return 0
    if args.what == "cycles":
        _, records = thinking_sweep(model, chosen, ns=(0,))
        hist = cycle_start_histogram(records[0])
        rows = []
        for rec in records[0]:
            for cyc in detect_cycles(rec):
                rows.append({"level_id": list(rec.level_id), "start": cyc.start,
                             "length": cyc.length})
        (out / "tables" / "cycles.json").write_text(json.dumps(
            {"histogram": hist, "cycles": rows}, indent=1))
        print(json.dumps({"total_cycles": len(rows)}))
        return 0
    if args.what == "ttb":
        _, records = thinking_sweep(model, chosen, ns=ns)
        table = time_to_box_table(records)
        sub = None
        if 0 in records and 6 in records:
            sub = solved_at_b_not_a(records[0], records[6])
            sub_table = time_to_box_table(records, subgroup_ids=sub)
        else:
            sub_table = []
        payload = {"all_levels": table, "solved_at_6_not_0": sub_table}
        (out / "tables" / "time_to_box.json").write_text(json.dumps(payload, indent=1))
        print(json.dumps(payload))
        return 0
    if args.what == "categorize":
        _, records = thinking_sweep(model, chosen, ns=(0, args.think))
        table = categorize(records[0], records[args.think])
        write_category_csv(out / "tables" / "categorization.csv", table)
        (out / "tables" / "categorization.json").write_text(
            json.dumps(table.percentages, indent=1))
        print(json.dumps(table.percentages))
        return 0
    if args.what == "difficulty":
        if not args.solver_cache:
            print(json.dumps({"error": "--solver-cache required for difficulty"}), file=sys.stderr)
            return 2
        from .solver import _record_to_result

        solver_results = {}
        for line in Path(args.solver_cache).read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                solver_results[tuple(rec["level_id"])] = {
                    "optimal_len": rec["optimal_len"],
                    "expanded_nodes": rec["expanded_nodes"],
                }
        _, records = thinking_sweep(model, chosen, ns=ns)
        joined = difficulty_join(records, solver_results)
        (out / "tables" / "difficulty.json").write_text(json.dumps(joined, indent=1))
        print(json.dumps(joined["groups"]))
        return 0
    print(json.dumps({"error": f"unknown analysis {args.what!r}"}), file=sys.stderr)
    return 2


def cmd_weights_info(args) -> int:
    from .weights_io import weights_info

    print(json.dumps(weights_info(args.file), indent=1))
    return 0


def cmd_weights_probe(args) -> int:
    from .weights_io import run_probe

    report = run_probe(args.file, args.probe)
    print(json.dumps(report, indent=1))
    return 0 if report["pass"] else 1


def cmd_nn_gradcheck(args) -> int:
    from .nn.gradcheck import primitive_check_suite

    results = primitive_check_suite(seed=args.seed)
    print(json.dumps({"seed": args.seed, "max_rel_err": results}, indent=1))
    return 0 if max(results.values()) < 1e-4 else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sokolab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="fetch or inspect Boxoban level data")
    ds_sub = ds.add_subparsers(dest="subcommand", required=True)
    fetch = ds_sub.add_parser("fetch")
    fetch.add_argument("--split", required=True)
    fetch.add_argument("--dest", required=True)
    fetch.add_argument("--base-url", default=None)
    fetch.set_defaults(func=cmd_dataset_fetch)
    info = ds_sub.add_parser("info")
    info.add_argument("--path", required=True)
    info.set_defaults(func=cmd_dataset_info)

    play = sub.add_parser("play", help="replay an action string on a level")
    play.add_argument("--levels", required=True)
    play.add_argument("--level", required=True, help="file:index")
    play.add_argument("--actions", required=True, help="string of UDLR")
    play.set_defaults(func=cmd_play)

    solve = sub.add_parser("solve", help="A*-solve a level collection")
    solve.add_argument("--levels", required=True)
    solve.add_argument("--limit", type=int, default=0)
    solve.add_argument("--node-budget", type=int, default=5_000_000)
    solve.add_argument("--time-budget", type=float, default=900.0)
    solve.add_argument("--workers", type=int, default=1)
    solve.add_argument("--out", required=True)
    solve.set_defaults(func=cmd_solve)

    tr = sub.add_parser("train", help="IMPALA training")
    tr.add_argument("--config", default=None, help="flat JSON config file")
    tr.add_argument("--profile", choices=["paper", "desk"], default="paper")
    tr.add_argument("--arch", choices=["drc33", "drc11", "resnet"], required=True)
    tr.add_argument("--levels", default=None, help="level dir/file (default: builtin fixtures)")
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a weight file on a level set")
    ev.add_argument("--weights", required=True)
    ev.add_argument("--levels", required=True)
    ev.add_argument("--sample", type=int, default=None)
    ev.add_argument("--deterministic", action="store_true")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_eval)

    an = sub.add_parser("analyze", help="behavioral analysis suites")
    an.add_argument("what", choices=["thinking", "cycles", "ttb", "categorize", "difficulty"])
    an.add_argument("--weights", required=True)
    an.add_argument("--levels", required=True)
    an.add_argument("--ns", type=_parse_ns, default=(0, 1, 2, 4, 6, 8, 10, 12, 16))
    an.add_argument("--think", type=int, default=6, help="thinking steps for categorize")
    an.add_argument("--sample", type=int, default=None)
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--solver-cache", default=None)
    an.add_argument("--out", required=True)
    an.set_defaults(func=cmd_analyze)

    wt = sub.add_parser("weights", help="weight-file tooling")
    wt_sub = wt.add_subparsers(dest="subcommand", required=True)
    winfo = wt_sub.add_parser("info")
    winfo.add_argument("file")
    winfo.set_defaults(func=cmd_weights_info)
    wprobe = wt_sub.add_parser("probe")
    wprobe.add_argument("file")
    wprobe.add_argument("--probe", required=True)
    wprobe.set_defaults(func=cmd_weights_probe)

    nn_p = sub.add_parser("nn", help="numerics tooling")
    nn_sub = nn_p.add_subparsers(dest="subcommand", required=True)
    gc = nn_sub.add_parser("gradcheck")
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=cmd_nn_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "base_url", "sentinel") is None:
        from .levels import DEFAULT_BASE_URL

        args.base_url = DEFAULT_BASE_URL
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as e:
        return _error(str(e), 2)
    except Exception as e:  # noqa: BLE001 - CLI boundary
        return _error(f"{type(e).__name__}: {e}", 1)


if __name__ == "__main__":
    sys.exit(main())
