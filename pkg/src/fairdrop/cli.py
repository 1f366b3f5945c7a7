"""Command-line front end: synth, train, repair, sweep, and oracle runs.

Every command reads a JSON experiment config (sections ``dataset``,
``model``, ``search``, ``oracle``, plus ``seeds`` and ``output_dir``) and
accepts flag overrides; flags win over file values.  All machine-readable
outputs embed the fully resolved config, and every file is written
atomically.  Exit codes: 0 on success, 1 on operational errors, 2 on usage
errors, and 3 from ``repair`` when at least one run finished below the F1
floor.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .dataset import (DatasetSchema, SplitDataset, TabularDataset, load_csv, split,
                      synthesize_biased)
from .ioutil import atomic_write_text
from .metrics import accuracy, confusion, f1, fairness
from .model import (MlpArchitecture, MlpModel, TrainConfig, load_model, predict_batch,
                    save_model, train)
from .oracle import (DEFAULT_ENUMERATION_BUDGET, EnumerationBudgetError, census,
                     enumerate_best, per_state_cost_rows, single_neuron_baseline)
from .search import (SearchConfig, SearchSpaceBounds, baseline_cost_params, run_search,
                     write_trace_csv)

DEFAULT_SEEDS = list(range(1, 11))
DEFAULT_SWEEP_P_VALUES = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
CI_FORMULA = "mean +/- 1.96*sd/sqrt(n), sample sd (ddof=1)"


class CliError(RuntimeError):
    """Operational CLI failure, reported on stderr with exit code 1."""


# ---------------------------------------------------------------- config

def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config file {path} is not valid JSON: {exc}") from exc


def resolve_config(raw: dict, args) -> dict:
    """Fill defaults and apply flag overrides (flags win)."""
    cfg = {
        "dataset": dict(raw.get("dataset", {})),
        "model": dict(raw.get("model", {})),
        "search": dict(raw.get("search", {})),
        "oracle": dict(raw.get("oracle", {})),
        "seeds": list(raw.get("seeds", DEFAULT_SEEDS)),
        "output_dir": raw.get("output_dir", "out"),
    }
    model = cfg["model"]
    model.setdefault("hidden_sizes", [16, 16])
    tr = model.setdefault("train", {})
    tr.setdefault("learning_rate", 0.05)
    tr.setdefault("epochs", 30)
    tr.setdefault("batch_size", 128)
    tr.setdefault("train_dropout_prob", 0.1)
    search = cfg["search"]
    search.setdefault("alg_type", "sa")
    search.setdefault("p", 3.0)
    search.setdefault("t", 0.98)
    search.setdefault("n_l", 2)
    search.setdefault("n_u", None)  # None -> 25% of hidden neurons, at least n_l + 1
    search.setdefault("t0_mode", "ben_ameur")
    search.setdefault("t0_value", None)
    search.setdefault("target_acceptance", 0.75)
    search.setdefault("t0_sample_size", 100)
    cfg["oracle"].setdefault("budget", DEFAULT_ENUMERATION_BUDGET)
    cfg["oracle"].setdefault("good_margin", 0.05)

    if getattr(args, "seeds", None):
        cfg["seeds"] = [int(s) for s in args.seeds.split(",")]
    if getattr(args, "out", None):
        cfg["output_dir"] = args.out
    for flag, key in (("alg", "alg_type"), ("p", "p"), ("t", "t"),
                      ("n_l", "n_l"), ("n_u", "n_u"),
                      ("iterations", "max_iterations"), ("time_limit_s", "time_limit_s")):
        value = getattr(args, flag, None)
        if value is not None:
            search[key] = value
    # only after flag overrides: a stopping criterion must exist, and the
    # deterministic iteration cap is the default one
    if search.get("max_iterations") is None and search.get("time_limit_s") is None:
        search["max_iterations"] = 20_000
    if not cfg["seeds"]:
        raise CliError("seeds list must not be empty")
    return cfg


def default_n_u(n_l: int, hidden_total: int) -> int:
    return max(n_l + 1, math.ceil(0.25 * hidden_total))


def build_dataset(cfg: dict) -> TabularDataset:
    ds = cfg["dataset"]
    if "synth" in ds:
        s = ds["synth"]
        return synthesize_biased(int(s.get("n_rows", 10_000)),
                                 int(s.get("n_features", 10)),
                                 float(s.get("bias_strength", 0.5)),
                                 int(s.get("seed", 1)))
    if "csv" in ds:
        if "schema" not in ds:
            raise CliError("dataset.csv needs a companion dataset.schema path")
        return load_csv(ds["csv"], DatasetSchema.load(ds["schema"]))
    raise CliError("config needs dataset.synth parameters or dataset.csv + dataset.schema")


def model_path(cfg: dict, seed: int) -> str:
    return os.path.join(cfg["output_dir"], f"model_seed{seed}.json")


def search_config(cfg: dict, seed: int, hidden_total: int, params) -> SearchConfig:
    s = cfg["search"]
    n_l = int(s["n_l"])
    n_u = int(s["n_u"]) if s["n_u"] is not None else default_n_u(n_l, hidden_total)
    return SearchConfig(
        alg_type=s["alg_type"],
        bounds=SearchSpaceBounds(n_total=hidden_total, n_l=n_l, n_u=n_u),
        cost_params=params,
        seed=seed,
        max_iterations=(None if s.get("max_iterations") is None else int(s["max_iterations"])),
        time_limit_s=(None if s.get("time_limit_s") is None else float(s["time_limit_s"])),
        t0_mode=s["t0_mode"],
        t0_value=s.get("t0_value"),
        target_acceptance=float(s["target_acceptance"]),
        t0_sample_size=int(s["t0_sample_size"]),
    )


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _split_metrics(model: MlpModel, data: TabularDataset, mask=None) -> dict:
    preds = predict_batch(model, data, mask)
    counts = confusion(preds, data.labels)
    report = fairness(preds, data.labels, data.protected)
    return {
        "eod": "undefined" if report.eod is None else report.eod,
        "f1": f1(counts),
        "accuracy": accuracy(counts),
    }


def mean_ci(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if len(arr) < 2:
        return {"mean": mean, "ci95": 0.0, "n": int(len(arr))}
    sd = float(arr.std(ddof=1))
    return {"mean": mean, "ci95": 1.96 * sd / math.sqrt(len(arr)), "n": int(len(arr))}


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    if not 0.0 <= args.bias_strength <= 1.0:
        raise UsageError("--bias-strength must lie in [0, 1]")
    data = synthesize_biased(args.n_rows, args.n_features, args.bias_strength, args.seed)
    os.makedirs(args.out, exist_ok=True)
    buf = io.StringIO()
    header = list(data.feature_names) + ["group", "label"]
    buf.write(",".join(header) + "\n")
    for i in range(data.n_rows):
        cells = [repr(float(v)) for v in data.features[i]]
        cells.append(str(int(data.protected[i])))
        cells.append(str(int(data.labels[i])))
        buf.write(",".join(cells) + "\n")
    csv_path = os.path.join(args.out, "synthetic.csv")
    atomic_write_text(csv_path, buf.getvalue())
    schema = DatasetSchema(
        column_names=tuple(header),
        categorical_columns=frozenset(),
        numerical_columns=frozenset(data.feature_names),
        protected_column="group",
        protected_values={"0": 0, "1": 1},
        label_column="label",
        label_values={"0": 0, "1": 1},
        scaling="min_max",
        drop_protected_from_features=False,
    )
    schema.dump(os.path.join(args.out, "synthetic_schema.json"))
    print(f"wrote {csv_path} ({data.n_rows} rows, {len(data.feature_names)} features) "
          f"and synthetic_schema.json")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(load_config(args.config), args)
    data = build_dataset(cfg)
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    hidden = [int(h) for h in cfg["model"]["hidden_sizes"]]
    arch = MlpArchitecture(tuple([data.features.shape[1]] + hidden + [1]))
    tr = cfg["model"]["train"]
    per_seed = {}
    for seed in cfg["seeds"]:
        parts = split(data, seed)
        model = train(parts, arch, TrainConfig(
            learning_rate=float(tr["learning_rate"]),
            epochs=int(tr["epochs"]),
            batch_size=int(tr["batch_size"]),
            train_dropout_prob=float(tr["train_dropout_prob"]),
            seed=seed,
        ))
        path = model_path(cfg, seed)
        save_model(model, path)
        per_seed[str(seed)] = {
            "model_file": os.path.basename(path),
            "validation": _split_metrics(model, parts.validation),
            "test": _split_metrics(model, parts.test),
        }
        v, t = per_seed[str(seed)]["validation"], per_seed[str(seed)]["test"]
        print(f"seed {seed}: val EOD {_pct(v['eod'])} F1 {v['f1']:.3f} acc {v['accuracy']:.3f} "
              f"| test EOD {_pct(t['eod'])} F1 {t['f1']:.3f} acc {t['accuracy']:.3f}")
    write_json(os.path.join(out, "train_report.json"),
               {"config": cfg, "runs": per_seed})
    print(f"wrote {len(per_seed)} model file(s) and train_report.json to {out}")
    return 0


def _pct(value) -> str:
    return "undefined" if value == "undefined" else f"{100.0 * value:.3f}%"


def _load_instance(cfg: dict, data: TabularDataset, seed: int) -> tuple[SplitDataset, MlpModel]:
    parts = split(data, seed)
    path = model_path(cfg, seed)
    if not os.path.exists(path):
        raise CliError(f"model file {path} not found; run `train` first")
    return parts, load_model(path)


def _repair_one(cfg: dict, data: TabularDataset, seed: int, p: float | None = None) -> dict:
    parts, model = _load_instance(cfg, data, seed)
    s = cfg["search"]
    params = baseline_cost_params(model, parts.validation,
                                  p=float(s["p"] if p is None else p), t=float(s["t"]))
    config = search_config(cfg, seed, model.hidden_total, params)
    result = run_search(model, parts.validation, config)
    dropped = model.masked_units_per_layer(result.best_state)
    return {
        "seed": seed,
        "result": result,
        "model": model,
        "parts": parts,
        "params": params,
        "record": {
            "seed": seed,
            "alg_type": config.alg_type,
            "p": params.p,
            "t": params.t,
            "bounds": {"n_l": config.bounds.n_l, "n_u": config.bounds.n_u},
            "t0": result.t0,
            "best_state_hex": result.best_state.key_hex(),
            "dropped_per_layer": dropped,
            "best_cost": result.best_cost,
            "initial_cost": result.initial_cost,
            "success": result.success,
            "evaluations": result.evaluations,
            "baseline": {
                "validation": _split_metrics(model, parts.validation),
                "test": _split_metrics(model, parts.test),
            },
            "repaired": {
                "validation": _split_metrics(model, parts.validation, result.best_state),
                "test": _split_metrics(model, parts.test, result.best_state),
            },
        },
    }


def cmd_repair(args) -> int:
    cfg = resolve_config(load_config(args.config), args)
    data = build_dataset(cfg)
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    alg = cfg["search"]["alg_type"]
    records = []
    for seed in cfg["seeds"]:
        run = _repair_one(cfg, data, seed)
        trace_file = os.path.join(out, f"trace_seed{seed}_{alg}.csv")
        write_trace_csv(trace_file, run["result"].trace)
        record = dict(run["record"])
        record["trace_file"] = os.path.basename(trace_file)
        write_json(os.path.join(out, f"repair_seed{seed}_{alg}.json"),
                   {"config": cfg, "run": record})
        records.append(record)
        rep, base = record["repaired"], record["baseline"]
        print(f"seed {seed}: {'ok' if record['success'] else 'FAILED F1 floor'} "
              f"| val EOD {_pct(base['validation']['eod'])} -> {_pct(rep['validation']['eod'])} "
              f"| val F1 {base['validation']['f1']:.3f} -> {rep['validation']['f1']:.3f}")

    summary = {
        "config": cfg,
        "ci_formula": CI_FORMULA,
        "seeds": cfg["seeds"],
        "successes": sum(1 for r in records if r["success"]),
        "runs": len(records),
    }
    for phase in ("validation", "test"):
        for metric in ("eod", "f1", "accuracy"):
            base_vals = [r["baseline"][phase][metric] for r in records
                         if r["baseline"][phase][metric] != "undefined"]
            rep_vals = [r["repaired"][phase][metric] for r in records
                        if r["repaired"][phase][metric] != "undefined"]
            if base_vals:
                summary[f"baseline_{phase}_{metric}"] = mean_ci(base_vals)
            if rep_vals:
                summary[f"repaired_{phase}_{metric}"] = mean_ci(rep_vals)
    write_json(os.path.join(out, f"repair_summary_{alg}.json"), summary)

    if "repaired_validation_eod" in summary and "baseline_validation_eod" in summary:
        b = summary["baseline_validation_eod"]
        r = summary["repaired_validation_eod"]
        print(f"validation EOD mean {_pct(b['mean'])} -> {_pct(r['mean'])} "
              f"(+/- {100.0 * r['ci95']:.3f} points, {CI_FORMULA})")
    print(f"{summary['successes']}/{summary['runs']} runs met the F1 floor; "
          f"reports in {out}")
    return 0 if summary["successes"] == summary["runs"] else 3


def cmd_sweep(args) -> int:
    cfg = resolve_config(load_config(args.config), args)
    p_values = ([float(v) for v in args.p_values.split(",")]
                if args.p_values else list(DEFAULT_SWEEP_P_VALUES))
    data = build_dataset(cfg)
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    rows = ["p,seed,validation_eod,test_eod,success"]
    for p in p_values:
        for seed in cfg["seeds"]:
            run = _repair_one(cfg, data, seed, p=p)
            rec = run["record"]
            val_eod = rec["repaired"]["validation"]["eod"]
            test_eod = rec["repaired"]["test"]["eod"]
            rows.append(",".join((
                repr(p), str(seed),
                "undefined" if val_eod == "undefined" else repr(val_eod),
                "undefined" if test_eod == "undefined" else repr(test_eod),
                "1" if rec["success"] else "0",
            )))
            print(f"p={p} seed={seed}: val EOD {_pct(val_eod)} "
                  f"{'ok' if rec['success'] else 'FAILED F1 floor'}")
    csv_path = os.path.join(out, "sweep.csv")
    atomic_write_text(csv_path, "\n".join(rows) + "\n")
    write_json(os.path.join(out, "sweep.json"),
               {"config": cfg, "p_values": p_values, "rows": len(rows) - 1,
                "csv_file": os.path.basename(csv_path)})
    print(f"wrote {csv_path} ({len(rows) - 1} rows)")
    return 0


def cmd_oracle(args) -> int:
    cfg = resolve_config(load_config(args.config), args)
    data = build_dataset(cfg)
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    seed = args.seed if args.seed is not None else cfg["seeds"][0]
    parts, model = _load_instance(cfg, data, seed)
    s = cfg["search"]
    params = baseline_cost_params(model, parts.validation, p=float(s["p"]), t=float(s["t"]))
    config = search_config(cfg, seed, model.hidden_total, params)
    budget = int(cfg["oracle"]["budget"])
    try:
        best_state, best_cost = enumerate_best(model, parts.validation, config.bounds,
                                               params, budget=budget)
        counts = census(model, parts.validation, config.bounds, params,
                        good_margin=float(cfg["oracle"]["good_margin"]), budget=budget)
    except EnumerationBudgetError as exc:
        print(f"refusing to enumerate: {exc}", file=sys.stderr)
        return 1
    baseline = single_neuron_baseline(model, parts.validation, parts.test, params)
    report = {
        "config": cfg,
        "seed": seed,
        "cardinality": config.bounds.size(),
        "optimal_state_hex": best_state.key_hex(),
        "optimal_cost": best_cost,
        "census": counts.to_dict(),
        "single_neuron_baseline": baseline,
    }
    if args.sa_result:
        with open(args.sa_result, encoding="utf-8") as fh:
            sa_doc = json.load(fh)
        sa_cost = sa_doc["run"]["best_cost"] if "run" in sa_doc else sa_doc["best_cost"]
        report["sa_best_cost"] = sa_cost
        report["eod_delta"] = sa_cost - best_cost
    if args.dump_costs:
        buf = io.StringIO()
        buf.write("state_key_hex,cost,eod,f1\n")
        for key, c, eod, f1_s in per_state_cost_rows(model, parts.validation,
                                                     config.bounds, params, budget=budget):
            eod_text = "undefined" if math.isnan(eod) else repr(eod)
            buf.write(f"{key},{c!r},{eod_text},{f1_s!r}\n")
        atomic_write_text(os.path.join(out, "oracle_costs.csv"), buf.getvalue())
    write_json(os.path.join(out, "oracle_report.json"), report)
    print(f"enumerated {report['cardinality']} states: optimal cost {best_cost:.6f} "
          f"(state {report['optimal_state_hex']}), census best/good/bad = "
          f"{counts.best_count}/{counts.good_count}/{counts.bad_count}")
    if "eod_delta" in report:
        print(f"EOD delta vs supplied search result: {report['eod_delta']:.6f}")
    print(f"wrote oracle_report.json to {out}")
    return 0


class UsageError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdrop",
        description="Repair group unfairness in a ReLU classifier by searching "
                    "inference-time dropout masks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic biased dataset")
    p_synth.add_argument("--out", default="out", help="output directory")
    p_synth.add_argument("--n-rows", type=int, default=10_000)
    p_synth.add_argument("--n-features", type=int, default=10)
    p_synth.add_argument("--bias-strength", type=float, default=0.5)
    p_synth.add_argument("--seed", type=int, default=1)
    p_synth.set_defaults(func=cmd_synth)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config JSON")
    common.add_argument("--seeds", help="comma-separated seed list override")
    common.add_argument("--out", help="output directory override")
    common.add_argument("--alg", choices=["sa", "rw"], help="search algorithm override")
    common.add_argument("--p", type=float, help="penalty multiplier override")
    common.add_argument("--t", type=float, help="threshold multiplier override")
    common.add_argument("--n-l", dest="n_l", type=int, help="minimum neurons to drop")
    common.add_argument("--n-u", dest="n_u", type=int, help="maximum neurons to drop")
    common.add_argument("--iterations", type=int, help="max_iterations override")
    common.add_argument("--time-limit-s", dest="time_limit_s", type=float,
                        help="wall-clock limit override (seconds)")

    p_train = sub.add_parser("train", parents=[common],
                             help="train per-seed baseline models")
    p_train.set_defaults(func=cmd_train)

    p_repair = sub.add_parser("repair", parents=[common],
                              help="search dropout masks per seed and report")
    p_repair.set_defaults(func=cmd_repair)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="repeat repair across penalty multipliers")
    p_sweep.add_argument("--p-values", help="comma-separated penalty multipliers")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", parents=[common],
                              help="enumerate the space, census it, and run the "
                                   "single-neuron baseline")
    p_oracle.add_argument("--seed", type=int, help="which seed's instance to enumerate")
    p_oracle.add_argument("--sa-result", help="repair result JSON to compare against")
    p_oracle.add_argument("--dump-costs", action="store_true",
                          help="write per-state costs CSV")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CliError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
