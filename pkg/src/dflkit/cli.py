"""Command line front end for reproducible runs.

Subcommands chain through files only: gen-data writes a dataset CSV
plus a provenance JSON, train writes a checkpoint and a loss CSV,
decide writes decisions, evaluate writes a regret report, landscape
writes a value grid, and bench runs the whole pipeline across seeds
and methods. Every artifact embeds the config and seed that made it.

Exit codes: 0 success, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import baselines as bl
from . import evaluation as ev
from . import objectives as ob
from . import simdata as sd
from . import surrogate as sg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse would print usage and exit; we want one diagnostic line
    # naming the offending flag and a controlled exit code
    def error(self, message):
        raise ConfigError(message)


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{what}: no such file {path!r}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what}: invalid JSON in {path!r} ({e})")


def _require(cfg: dict, field: str, what: str):
    if field not in cfg:
        raise ConfigError(f"{what}: missing field {field!r}")
    return cfg[field]


def _sidecar(path: str) -> str:
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + ".provenance.json"


def _loss_path(path: str) -> str:
    stem = path[:-5] if path.endswith(".json") else path
    return stem + ".loss.csv"


def _write_json(path: str, blob: dict) -> None:
    with open(path, "w") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepend_comment(path: str, cfg: dict) -> None:
    """First line `# config: {...}` so the artifact carries its config."""
    with open(path) as fh:
        body = fh.read()
    with open(path, "w") as fh:
        fh.write("# config: " + json.dumps(cfg, sort_keys=True) + "\n" + body)


def _read_csv_rows(path: str, what: str) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            return [row for row in csv.reader(fh)
                    if row and not row[0].startswith("#")]
    except FileNotFoundError:
        raise ConfigError(f"{what}: no such file {path!r}")


# ------------------------------------------------------------- gen-data


def cmd_gen_data(args) -> int:
    task_cfg = _load_json(args.task_config, "--task-config") \
        if args.task_config else {}
    try:
        ratios = tuple(float(t) for t in args.split.split(","))
    except ValueError:
        raise ConfigError(f"--split: not a comma list of floats: {args.split!r}")
    if args.task == "synthetic":
        gen = sd.make_gmm_generator(
            p=int(task_cfg.get("p", 2)), m=int(task_cfg.get("m", 2)),
            seed=int(task_cfg.get("generator_seed", 0)),
            weights=tuple(task_cfg.get("weights", (0.3, 0.3, 0.4))),
            noise_var=float(task_cfg.get("noise_var", 0.1)))
        ds = sd.generate(gen, args.n, seed=args.seed)
    elif args.task in ("wind", "inventory"):
        ds = sd.synth_timeseries(args.task, args.n, seed=args.seed,
                                 cfg=task_cfg)
    elif args.task == "vaccine":
        ds = sd.synth_timeseries("od", args.n, seed=args.seed, cfg=task_cfg)
    else:  # argparse choices guard this; keep the diagnostic anyway
        raise ConfigError(f"--task: unknown task {args.task!r}")
    try:
        ds = sd.split(ds, ratios, seed=args.seed)
    except ValueError as e:
        raise ConfigError(f"--split: {e}")
    sd.save(ds, args.out)
    _write_json(_sidecar(args.out), {
        "command": "gen-data",
        "config": {"task": args.task, "n": args.n, "seed": args.seed,
                   "split": list(ratios), "task_config": task_cfg},
        "dataset": ds.provenance,
    })
    return EXIT_OK


# ---------------------------------------------------------------- train


def _objective_from_cfg(cfg: dict, what: str):
    obj_cfg = _require(cfg, "objective", what)
    if isinstance(obj_cfg, str):
        obj_cfg = {"objective": obj_cfg}
    try:
        return sg._objective_from_json(obj_cfg), obj_cfg
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"{what}: bad objective config ({e})")


def _load_dataset(path: str, what: str) -> sd.Dataset:
    try:
        ds = sd.load(path)
    except FileNotFoundError:
        raise ConfigError(f"{what}: no such file {path!r}")
    except ValueError as e:
        raise ConfigError(f"{what}: {e}")
    if len(ds) == 0:
        raise ConfigError(f"{what}: empty dataset in {path!r}")
    return ds


def cmd_train(args) -> int:
    cfg = _load_json(args.config, "--config")
    objective, obj_cfg = _objective_from_cfg(cfg, "--config")
    ds = _load_dataset(args.data, "--data")
    X_tr, _ = ds.subset("train")
    if X_tr.shape[0] == 0:
        raise ConfigError(f"--data: empty dataset (no train rows) in "
                          f"{args.data!r}")
    seed = int(cfg.get("seed", 0))
    x_dim = ds.X.shape[1]
    hidden = tuple(cfg.get("hidden", (64, 64)))
    if args.method == "df2":
        model = sg.make_surrogate(objective, x_dim,
                                  S=cfg.get("S"), d=int(cfg.get("d", 16)),
                                  seed=seed, hidden=hidden,
                                  frozen_values=bool(
                                      cfg.get("frozen_values", False)))
        if cfg.get("key_init", "query") == "query":
            sg.init_attention_points(model, ds, seed=seed)
        else:
            model.values = sg.init_values_from_labels(ds, model.S, seed=seed)
        tc = sg.TrainConfig(epochs=int(cfg.get("epochs", 100)),
                            batch_size=int(cfg.get("batch_size", 32)),
                            lr=float(cfg.get("lr", 1e-3)),
                            J=int(cfg.get("J", 100)), seed=seed,
                            patience=int(cfg.get("patience", 10)))
        curve = sg.train(model, ds, tc)
        sg.save_surrogate(model, args.out)
        sg.save_loss_csv(curve, _loss_path(args.out))
    elif args.method == "two-stage":
        fc = bl.make_forecaster(x_dim, objective.outcome_dim,
                                C=int(cfg.get("components", 3)), seed=seed,
                                hidden=hidden)
        fit = bl.FitConfig(epochs=int(cfg.get("epochs", 200)),
                           batch_size=int(cfg.get("batch_size", 32)),
                           lr=float(cfg.get("lr", 1e-3)), seed=seed,
                           patience=int(cfg.get("patience", 10)))
        loss = cfg.get("loss", "nll")
        if loss not in ("nll", "mse"):
            raise ConfigError(f"--config: field 'loss' must be nll or mse, "
                              f"got {loss!r}")
        curve = bl.train_two_stage(fc, ds, fit, loss=loss)
        bl.save_forecaster(fc, args.out)
        _save_generic_loss_csv(curve, _loss_path(args.out))
    elif args.method == "policy":
        pn = bl.make_policy(x_dim, objective.feasible, seed=seed,
                            hidden=hidden)
        fit = bl.FitConfig(epochs=int(cfg.get("epochs", 200)),
                           batch_size=int(cfg.get("batch_size", 32)),
                           lr=float(cfg.get("lr", 1e-3)), seed=seed,
                           patience=int(cfg.get("patience", 10)))
        curve = bl.policy_train(pn, ds, objective, fit)
        bl.save_policy(pn, args.out)
        _save_generic_loss_csv(curve, _loss_path(args.out))
    else:
        raise ConfigError(f"--method: unknown method {args.method!r}")
    run_cfg = {"method": args.method, "config": cfg, "data": args.data,
               "seed": seed, "objective": obj_cfg}
    with open(args.out) as fh:
        blob = json.load(fh)
    blob["run_config"] = run_cfg
    with open(args.out, "w") as fh:
        json.dump(blob, fh)
    _prepend_comment(_loss_path(args.out), run_cfg)
    return EXIT_OK


def _save_generic_loss_csv(curve: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for row in curve:
            w.writerow([row["epoch"], repr(float(row["train_loss"])),
                        repr(float(row["val_loss"]))])


# --------------------------------------------------------------- decide


def _load_checkpoint(path: str):
    blob = _load_json(path, "--model")
    if "keys" in blob and "values" in blob:
        return "df2", sg.load_surrogate(path), blob
    if "head_mean" in blob:
        return "two-stage", bl.load_forecaster(path), blob
    if "feasible" in blob:
        return "policy", bl.load_policy(path), blob
    raise ConfigError(f"--model: {path!r} is not a known checkpoint format")


def _objective_for_checkpoint(kind, model, blob, solver_cfg, what):
    if kind == "df2":
        return model.objective
    if "objective" in solver_cfg:
        return sg._objective_from_json(solver_cfg["objective"])
    run_cfg = blob.get("run_config", {})
    if "objective" in run_cfg:
        return sg._objective_from_json(run_cfg["objective"])
    raise ConfigError(f"{what}: no objective in the solver config or the "
                      f"checkpoint's run_config")


def _split_rows(ds: sd.Dataset, which: str) -> np.ndarray:
    if which == "all":
        return np.arange(len(ds))
    idx = np.flatnonzero(ds.split == which)
    if idx.size == 0:
        raise ConfigError(f"--data: no rows tagged {which!r}")
    return idx


def cmd_decide(args) -> int:
    solver_cfg = _load_json(args.solver_config, "--solver-config") \
        if args.solver_config else {}
    kind, model, blob = _load_checkpoint(args.model)
    objective = _objective_for_checkpoint(kind, model, blob, solver_cfg,
                                          "--solver-config")
    ds = _load_dataset(args.data, "--data")
    which = solver_cfg.get("split", "test")
    if which not in ("all", "train", "val", "test"):
        raise ConfigError(f"--solver-config: field 'split' must be one of "
                          f"all/train/val/test, got {which!r}")
    rows = _split_rows(ds, which)
    X = ds.X[rows]
    iters = int(solver_cfg.get("iters", 500))
    lr = solver_cfg.get("lr")
    restarts = int(solver_cfg.get("restarts", 1))
    seed = int(solver_cfg.get("seed", 0))
    if kind == "df2":
        A, _ = sg.decide_batch(model, X, iters=iters, lr=lr,
                               restarts=restarts, seed=seed)
    elif kind == "two-stage":
        decider = solver_cfg.get("decider", "saa")
        if decider == "saa":
            A = bl.saa_decide_batch(model, X, objective,
                                    n_samples=int(
                                        solver_cfg.get("n_samples", 100)),
                                    seed=seed, iters=iters, lr=lr,
                                    restarts=restarts)
        elif decider == "point":
            A = bl.point_estimate_decide_batch(model, X, objective,
                                               iters=iters, lr=lr,
                                               restarts=restarts, seed=seed)
        else:
            raise ConfigError(f"--solver-config: field 'decider' must be "
                              f"saa or point, got {decider!r}")
    else:
        A = bl.policy_decide_batch(model, X)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row"] + [f"a_{j}" for j in range(A.shape[1])])
        for r, a in zip(rows, A):
            w.writerow([int(r)] + [repr(float(v)) for v in a])
    _prepend_comment(args.out, {
        "command": "decide", "model": args.model, "data": args.data,
        "split": which, "solver_config": solver_cfg, "seed": seed,
    })
    return EXIT_OK


# ------------------------------------------------------------- evaluate


def _load_decisions(path: str, m: int) -> dict[int, np.ndarray]:
    rows = _read_csv_rows(path, "--decisions")
    if not rows or rows[0][:1] != ["row"]:
        raise ConfigError(f"--decisions: {path!r} lacks a 'row' header")
    if len(rows[0]) != m + 1:
        raise ConfigError(f"--decisions: expected {m} action columns, "
                          f"found {len(rows[0]) - 1}")
    out = {}
    for r in rows[1:]:
        out[int(r[0])] = np.array([float(t) for t in r[1:]])
    return out


def cmd_evaluate(args) -> int:
    obj_cfg = _load_json(args.objective, "--objective")
    try:
        objective = sg._objective_from_json(obj_cfg)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"--objective: bad objective config ({e})")
    ds = _load_dataset(args.data, "--data")
    rows = _split_rows(ds, "test")
    decisions = _load_decisions(args.decisions, objective.decision_dim)
    missing = [int(r) for r in rows if int(r) not in decisions]
    if missing:
        raise ConfigError(f"--decisions: no decision for test rows "
                          f"{missing[:5]}{'...' if len(missing) > 5 else ''}")
    A = np.stack([decisions[int(r)] for r in rows])
    Y = ds.Y[rows]
    oracle_A = None
    oracle_cfg = None
    if args.oracle == "mc":
        prov = _load_json(_sidecar(args.data), "--oracle mc")
        dataset_prov = prov.get("dataset", prov)
        if dataset_prov.get("kind") != "gmm":
            raise ConfigError("--oracle mc: needs a synthetic (gmm) dataset "
                              "with a generator in its provenance file")
        gen = sd.gmm_from_config(dataset_prov["generator"])
        oracle_cfg = {"n_mc": args.oracle_samples, "iters": args.oracle_iters,
                      "restarts": args.oracle_restarts,
                      "seed": args.oracle_seed}
        oracle_A, _ = ev.batch_oracle_decisions(
            ds.X[rows], gen, objective, n_mc=args.oracle_samples,
            seed=args.oracle_seed, iters=args.oracle_iters,
            restarts=args.oracle_restarts)
    fingerprint = {"command": "evaluate", "decisions": args.decisions,
                   "data": args.data, "objective": obj_cfg,
                   "oracle": args.oracle, "oracle_config": oracle_cfg}
    rep = ev.regret_from_decisions(A, Y, objective, oracle_A=oracle_A,
                                   fingerprint=fingerprint)
    with open(args.out, "w") as fh:
        fh.write(rep.to_json() + "\n")
    return EXIT_OK


# ------------------------------------------------------------ landscape


def cmd_landscape(args) -> int:
    kind, model, blob = _load_checkpoint(args.model)
    if kind != "df2":
        raise ConfigError("--model: landscape needs a surrogate checkpoint")
    data_path = args.data or blob.get("run_config", {}).get("data")
    if not data_path:
        raise ConfigError("--data: not given and the checkpoint has no "
                          "run_config data path")
    ds = _load_dataset(data_path, "--data")
    if not 0 <= args.x_index < len(ds):
        raise ConfigError(f"--x-index: {args.x_index} outside 0.."
                          f"{len(ds) - 1}")
    box = model.objective.feasible
    if not isinstance(box, ob.Box) or box.dim != 2:
        raise ConfigError("--model: landscape needs a 2D box decision space")
    x = ds.X[args.x_index]
    V = ev.landscape_grid(lambda xq, a: sg.g(model, xq, a), x, box,
                          resolution=args.resolution)
    ev.save_landscape_csv(V, box, args.out)
    _prepend_comment(args.out, {
        "command": "landscape", "model": args.model, "data": data_path,
        "x_index": args.x_index, "resolution": args.resolution,
    })
    return EXIT_OK


# ---------------------------------------------------------------- bench

BENCH_DEFAULTS = {
    "n": 600,
    "split": [0.7, 0.15, 0.15],
    "p": 2,
    "m": 2,
    "generator_seed": 11,
    "noise_var": 0.1,
    # signed mixing mats keep the mixture components distinct without
    # pushing them so far apart that local methods dominate everything
    "mat_low": -0.6,
    "mat_high": 0.6,
    "weights": [0.3, 0.3, 0.4],
    "df2": {"S": 256, "d": 16, "hidden": [128], "epochs": 40,
            "batch_size": 32, "lr": 2e-3, "J": 100, "patience": 40},
    "df2_j_small": 5,
    "mdn": {"hidden": [128], "epochs": 50, "batch_size": 32, "lr": 1e-3,
            "patience": 10, "n_samples": 100},
    "policy": {"hidden": [64, 64], "epochs": 40, "batch_size": 32,
               "lr": 1e-2, "patience": 10},
    "decide": {"iters": 400, "restarts": 4},
    "oracle": {"n_mc": 2000, "iters": 300, "restarts": 6, "seed": 900},
}

BENCH_METHODS = ["df2", "df2-frozen", "df2-j5", "two-stage-c3",
                 "two-stage-c1", "point-estimate", "policy"]


def _merge_cfg(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def _bench_objective(suite: str, m: int):
    if suite == "synthetic-convex":
        return ob.synthetic_convex(dim=m)
    if suite == "synthetic-nonconvex":
        return ob.synthetic_nonconvex(dim=m)
    raise ConfigError(f"--suite: unknown suite {suite!r}")


def _train_df2(objective, ds, cfg, seed, J, frozen):
    d = cfg["df2"]
    model = sg.make_surrogate(objective, ds.X.shape[1], S=d["S"], d=d["d"],
                              seed=seed, hidden=tuple(d["hidden"]),
                              frozen_values=frozen)
    sg.init_attention_points(model, ds, seed=seed)
    sg.train(model, ds, sg.TrainConfig(
        epochs=d["epochs"], batch_size=d["batch_size"], lr=d["lr"], J=J,
        seed=seed, patience=d["patience"]))
    return model


def _train_mdn(objective, ds, cfg, seed, C, loss):
    d = cfg["mdn"]
    fc = bl.make_forecaster(ds.X.shape[1], objective.outcome_dim, C=C,
                            seed=seed, hidden=tuple(d["hidden"]))
    bl.train_two_stage(fc, ds, bl.FitConfig(
        epochs=d["epochs"], batch_size=d["batch_size"], lr=d["lr"],
        seed=seed, patience=d["patience"]), loss=loss)
    return fc


def _mc_values(objective, draws: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Per-row MC expected cost of A[i] on draws[i] (n, k, outcome_dim)."""
    n, k, _ = draws.shape
    A_rep = np.repeat(np.atleast_2d(A), k, axis=0)
    return ob.cost_batch(objective, draws.reshape(n * k, -1),
                         A_rep).reshape(n, k).mean(axis=1)


def run_bench(suite: str, seeds: int, overrides: dict | None = None) -> dict:
    """Regret gaps for every method across seeds; deterministic output.

    Each seed scores every method by Monte Carlo expected cost under
    the true generator, on draws shared with the oracle, so the gap
    above the oracle isolates decision quality from test-set luck. The
    report carries per-seed gaps, the median, and the max-min spread
    per method. No wall-clock numbers, so reruns are byte-identical
    once serialized with sorted keys.
    """
    cfg = _merge_cfg(BENCH_DEFAULTS, overrides or {})
    objective = _bench_objective(suite, cfg["m"])
    gen = sd.make_gmm_generator(p=cfg["p"], m=cfg["m"],
                                seed=cfg["generator_seed"],
                                weights=tuple(cfg["weights"]),
                                noise_var=cfg["noise_var"],
                                mat_low=cfg.get("mat_low", 0.0),
                                mat_high=cfg.get("mat_high", 1.0))
    dec = cfg["decide"]
    orc = cfg["oracle"]
    gaps = {name: [] for name in BENCH_METHODS}
    mean_costs = {name: [] for name in BENCH_METHODS}
    oracle_means = []
    for s in range(seeds):
        ds = sd.split(sd.generate(gen, cfg["n"], seed=1000 + s),
                      tuple(cfg["split"]), seed=s)
        X_te, Y_te = ds.subset("test")
        rng_eval = np.random.default_rng(orc["seed"] + s)
        draws = np.stack([sd.sample_conditional(gen, X_te[i], orc["n_mc"],
                                                rng_eval)
                          for i in range(X_te.shape[0])])
        A_star = bl.decide_on_sample_grid(draws, objective,
                                          iters=orc["iters"],
                                          restarts=orc["restarts"],
                                          seed=orc["seed"] + s)
        v_star = _mc_values(objective, draws, A_star)
        oracle_means.append(float(v_star.mean()))

        decisions = {}
        model = _train_df2(objective, ds, cfg, s, cfg["df2"]["J"], False)
        decisions["df2"], _ = sg.decide_batch(model, X_te,
                                              iters=dec["iters"],
                                              restarts=dec["restarts"],
                                              seed=s)
        frozen = _train_df2(objective, ds, cfg, s, cfg["df2"]["J"], True)
        decisions["df2-frozen"], _ = sg.decide_batch(frozen, X_te,
                                                     iters=dec["iters"],
                                                     restarts=dec["restarts"],
                                                     seed=s)
        j5 = _train_df2(objective, ds, cfg, s, cfg["df2_j_small"], False)
        decisions["df2-j5"], _ = sg.decide_batch(j5, X_te,
                                                 iters=dec["iters"],
                                                 restarts=dec["restarts"],
                                                 seed=s)
        c3 = _train_mdn(objective, ds, cfg, s, 3, "nll")
        decisions["two-stage-c3"] = bl.saa_decide_batch(
            c3, X_te, objective, n_samples=cfg["mdn"]["n_samples"], seed=s,
            iters=dec["iters"], restarts=dec["restarts"])
        c1 = _train_mdn(objective, ds, cfg, s, 1, "nll")
        decisions["two-stage-c1"] = bl.saa_decide_batch(
            c1, X_te, objective, n_samples=cfg["mdn"]["n_samples"], seed=s,
            iters=dec["iters"], restarts=dec["restarts"])
        pe = _train_mdn(objective, ds, cfg, s, 1, "mse")
        decisions["point-estimate"] = bl.point_estimate_decide_batch(
            pe, X_te, objective, iters=dec["iters"],
            restarts=dec["restarts"], seed=s)
        pol = cfg["policy"]
        pn = bl.make_policy(ds.X.shape[1], objective.feasible, seed=s,
                            hidden=tuple(pol["hidden"]))
        bl.policy_train(pn, ds, objective, bl.FitConfig(
            epochs=pol["epochs"], batch_size=pol["batch_size"],
            lr=pol["lr"], seed=s, patience=pol["patience"]))
        decisions["policy"] = bl.policy_decide_batch(pn, X_te)

        for name in BENCH_METHODS:
            v = _mc_values(objective, draws, decisions[name])
            mean_costs[name].append(
                float(ob.cost_batch(objective, Y_te, decisions[name]).mean()))
            gaps[name].append(float((v - v_star).mean()))

    methods = {}
    for name in BENCH_METHODS:
        arr = gaps[name]
        methods[name] = {
            "per_seed_gap": arr,
            "median_gap": float(np.median(arr)),
            "spread": float(max(arr) - min(arr)),
            "per_seed_mean_cost": mean_costs[name],
        }
    return {
        "suite": suite,
        "seeds": seeds,
        "config": cfg,
        "gap_estimator": "mc-expected-cost-shared-draws",
        "oracle": {"per_seed_mean_expected_cost": oracle_means},
        "methods": methods,
    }


def bench_report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def cmd_bench(args) -> int:
    overrides = _load_json(args.config, "--config") if args.config else None
    report = run_bench(args.suite, args.seeds, overrides)
    with open(args.out, "w") as fh:
        fh.write(bench_report_json(report))
    print(f"{'method':<16} {'median gap':>12} {'spread':>10}")
    for name in BENCH_METHODS:
        m = report["methods"][name]
        print(f"{name:<16} {m['median_gap']:>12.5f} {m['spread']:>10.5f}")
    return EXIT_OK


# ----------------------------------------------------------------- main


def build_parser() -> _Parser:
    p = _Parser(prog="dflkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="dataset CSV + provenance JSON")
    g.add_argument("--task", required=True,
                   choices=["synthetic", "wind", "inventory", "vaccine"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--split", default="0.7,0.15,0.15")
    g.add_argument("--task-config", default=None)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="checkpoint + loss CSV")
    t.add_argument("--method", required=True,
                   choices=["df2", "two-stage", "policy"])
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("decide", help="decisions CSV for the test split")
    d.add_argument("--model", required=True)
    d.add_argument("--data", required=True)
    d.add_argument("--solver-config", default=None)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decide)

    e = sub.add_parser("evaluate", help="RegretReport JSON")
    e.add_argument("--decisions", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--objective", required=True)
    e.add_argument("--oracle", choices=["mc", "none"], default="none")
    e.add_argument("--oracle-samples", type=int, default=2000)
    e.add_argument("--oracle-iters", type=int, default=300)
    e.add_argument("--oracle-restarts", type=int, default=1)
    e.add_argument("--oracle-seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    l = sub.add_parser("landscape", help="value grid CSV over the 2D box")
    l.add_argument("--model", required=True)
    l.add_argument("--data", default=None)
    l.add_argument("--x-index", type=int, required=True)
    l.add_argument("--resolution", type=int, default=21)
    l.add_argument("--out", required=True)
    l.set_defaults(func=cmd_landscape)

    b = sub.add_parser("bench", help="regret-gap table across methods")
    b.add_argument("--suite", required=True,
                   choices=["synthetic-convex", "synthetic-nonconvex"])
    b.add_argument("--seeds", type=int, default=5)
    b.add_argument("--out", default="bench_report.json")
    b.add_argument("--config", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        if "nonfinite" in str(e):
            print(f"numeric failure: {e}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
