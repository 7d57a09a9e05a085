"""Command-line front end: ``matcha {decompose,sweep,train,compare}``.

Exit codes: 0 success, 2 invalid input or config, 3 numerical failure.
Every CSV written here is a pure function of the inputs, so repeating a
command reproduces it byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, build_graph
from .errors import (
    ConfigError,
    DegeneratePlan,
    Disconnected,
    GenerationFailed,
    GraphFormatError,
    InvalidBudget,
    InvalidPolicyParams,
    MatchaError,
    NonFinite,
    StepSizeViolation,
)
from .graph import algebraic_connectivity, is_connected
from .matching import decompose, write_decomposition
from .objectives import make_objective
from .schedule import Policy, generate_schedule, plan_hash, prepare_policy
from .sgd import RunConfig, run, theorem2_bound, theory_constants, theory_learning_rate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_BUDGETS = [round(0.1 * i, 1) for i in range(1, 11)]
SWEEP_COLUMNS = ["C_b", "lambda2", "alpha", "rho_matcha", "rho_periodic", "rho_vanilla", "sum_p"]
METRIC_COLUMNS = ["k", "sim_time", "loss_avg_model", "grad_norm_sq", "consensus_sq",
                  "comm_time_iter", "policy", "C_b", "seed"]
COMPARE_COLUMNS = ["policy", "C_b", "seed", "status", "target_loss", "iteration", "sim_time",
                   "iteration_ratio_vs_vanilla", "time_ratio_vs_vanilla"]
NEVER_REACHED = "TargetNeverReached"

_INPUT_ERRORS = (ConfigError, GraphFormatError, InvalidBudget, InvalidPolicyParams,
                 Disconnected, GenerationFailed, OSError)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _parse_budgets(text: str):
    try:
        return [float(b) for b in text.split(",") if b.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad budget list {text!r}") from exc


def _load_raw(args) -> dict:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    return raw


def _graph_spec(args, raw: dict, seed_is_graph_seed: bool) -> dict:
    """Graph section after applying command-line overrides."""
    spec = dict(raw.get("graph", {}))
    if args.graph:
        spec = {"file": args.graph}
    elif args.generator:
        spec = {"generator": args.generator}
    for key, val in (("m", args.nodes), ("edge_prob", args.edge_prob), ("radius", args.radius)):
        if val is not None and "file" not in spec:
            spec[key] = val
    if seed_is_graph_seed and args.seed is not None and "file" not in spec:
        spec["seed"] = args.seed
    if not spec:
        raise ConfigError("no graph given: use --graph, --generator or a config file")
    return spec


# ---- decompose --------------------------------------------------------------

def cmd_decompose(args) -> int:
    raw = _load_raw(args)
    topo = build_graph(_graph_spec(args, raw, seed_is_graph_seed=True))
    decomp = decompose(topo)
    out = Path(args.out or raw.get("out", "out"))
    connected = is_connected(topo)
    if not connected:
        print("warning: graph is disconnected", file=sys.stderr)
    summary = {"m": topo.m, "num_edges": topo.num_edges, "max_degree": topo.max_degree,
               "M": decomp.M, "connected": connected}
    out.mkdir(parents=True, exist_ok=True)
    write_decomposition(decomp, out / "decomposition.json")
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# ---- sweep -------------------------------------------------------------------

def sweep_rows(decomp, budgets):
    """One row per budget: (C_b, lambda2, alpha, rho_matcha, rho_periodic, rho_vanilla, sum_p)."""
    _, vanilla = prepare_policy(Policy.VANILLA, decomp)
    rows = []
    for b in budgets:
        plan, mix = prepare_policy(Policy.MATCHA, decomp, b)
        _, per = prepare_policy(Policy.PERIODIC, decomp, b)
        rows.append([float(b), plan.lambda2, mix.alpha, mix.rho, per.rho, vanilla.rho,
                     plan.expected_comm_time])
    return rows


def cmd_sweep(args) -> int:
    raw = _load_raw(args)
    topo = build_graph(_graph_spec(args, raw, seed_is_graph_seed=True))
    if not is_connected(topo):
        raise Disconnected("sweep needs a connected graph")
    budgets = _parse_budgets(args.budgets) if args.budgets else raw.get("budgets", DEFAULT_BUDGETS)
    for b in budgets:
        if not 0.0 < b <= 1.0:
            raise InvalidBudget(f"budget {b} is not in (0, 1]")
    rows = sweep_rows(decompose(topo), sorted(budgets))
    out = Path(args.out or raw.get("out", "out"))
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    for row in rows:
        print("C_b={:.3g}  rho_matcha={:.4f}  rho_periodic={:.4f}  rho_vanilla={:.4f}".format(
            row[0], row[3], row[4], row[5]))
    return EXIT_OK


# ---- train -------------------------------------------------------------------

def _train_config(args) -> ExperimentConfig:
    raw = _load_raw(args)
    raw["graph"] = _graph_spec(args, raw, seed_is_graph_seed=False)
    if args.seed is not None:
        raw["seeds"] = [args.seed]
    if args.out:
        raw["out"] = args.out
    if args.budgets:
        raw["budgets"] = _parse_budgets(args.budgets)
    if args.policies:
        raw["policies"] = args.policies.split(",")
    if args.iterations is not None:
        raw["iterations"] = args.iterations
    if args.lr is not None:
        raw["lr"] = "theory" if args.lr == "theory" else float(args.lr)
    return ExperimentConfig.from_dict(raw)


def run_name(policy: str, budget: float, seed: int) -> str:
    return f"{policy}_cb{budget:g}_seed{seed}"


def _run_jobs(cfg: ExperimentConfig):
    """(policy, budget) pairs in a fixed order; VANILLA runs once at C_b = 1."""
    jobs = []
    for policy in cfg.policies:
        budgets = [1.0] if policy == Policy.VANILLA.value else cfg.budgets
        for b in budgets:
            if (policy, b) not in jobs:
                jobs.append((policy, b))
    return jobs


def cmd_train(args) -> int:
    cfg = _train_config(args)
    topo = build_graph(cfg.graph)
    decomp = decompose(topo)
    try:
        objective = make_objective(cfg.objective, topo.m)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad objective spec: {exc}") from exc
    lr = theory_learning_rate(topo.m, cfg.iterations) if cfg.lr == "theory" else float(cfg.lr)
    out = Path(cfg.out)
    runs, policies, failed = [], {}, False

    for policy, budget in _run_jobs(cfg):
        try:
            plan, mix = prepare_policy(policy, decomp, budget)
        except MatchaError as exc:
            raise type(exc)(f"[{policy} C_b={budget:g}] {exc}") from exc
        policies[f"{policy}_cb{budget:g}"] = {
            "policy": policy,
            "plan": plan.to_dict(),
            "mixing": mix.to_dict(budget, plan.expected_comm_time),
        }
        bound = None
        try:
            bound = theorem2_bound(theory_constants(objective, cfg.iterations, lr), mix.rho)
        except (ValueError, StepSizeViolation):
            pass
        for seed in cfg.seeds:
            name = run_name(policy, budget, seed)
            sched = generate_schedule(policy, decomp, mix, cfg.iterations, seed, plan=plan, budget=budget)
            rc = RunConfig(sched, objective, lr, cfg.log_interval, cfg.comm)
            status = "ok"
            try:
                metrics = run(rc)
            except NonFinite as exc:
                metrics, status, failed = exc.metrics, "diverged", True
                print(f"warning: run {name} diverged at iteration {exc.iteration}", file=sys.stderr)
            csv_path = Path("runs") / f"{name}.csv"
            _write_csv(out / csv_path, METRIC_COLUMNS, (
                [r.k, r.sim_time, r.loss_avg_model, r.grad_norm_sq, r.consensus_sq,
                 r.comm_time_iter, policy, float(budget), seed] for r in metrics.records))
            runs.append({
                "name": name, "policy": policy, "C_b": float(budget), "seed": seed,
                "metrics": csv_path.as_posix(), "status": status,
                "plan_hash": plan_hash(sched),
                "alpha": float(mix.alpha), "rho": float(mix.rho),
                "final_loss": metrics.final_loss if metrics.records else None,
                "avg_grad_norm_sq": None if status != "ok" else metrics.avg_grad_norm_sq,
                "mean_comm_time": metrics.mean_comm_time,
                "theorem2_bound": bound,
            })
            print(f"{name}: status={status} final_loss={_fmt(runs[-1]['final_loss'])} "
                  f"mean_comm_time={metrics.mean_comm_time:.4f}")

    manifest = {
        "config": cfg.raw,
        "learning_rate": lr,
        "graph": {"m": topo.m, "num_edges": topo.num_edges, "max_degree": topo.max_degree,
                  "M": decomp.M, "lambda2": algebraic_connectivity(decomp.base_laplacian())},
        "policies": policies,
        "runs": runs,
    }
    _write_json(out / "manifest.json", manifest)
    return EXIT_NUMERIC if failed else EXIT_OK


# ---- compare -----------------------------------------------------------------

def time_to_target(csv_path: Path, target: float):
    """First logged (iteration, sim_time) with loss <= target, or None."""
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            loss = float(row["loss_avg_model"])
            if math.isfinite(loss) and loss <= target:
                return int(row["k"]), float(row["sim_time"])
    return None


def _ratio(num, den):
    if num is None or den is None or den == 0:
        return None
    return num / den


def compare_rows(manifest: dict, root: Path, target: float):
    hits = {}
    for r in manifest["runs"]:
        hit = None if r["status"] != "ok" else time_to_target(root / r["metrics"], target)
        hits[r["name"]] = hit
    vanilla = {r["seed"]: hits[r["name"]] for r in manifest["runs"] if r["policy"] == "vanilla"}
    rows = []
    for r in manifest["runs"]:
        hit, ref = hits[r["name"]], vanilla.get(r["seed"])
        if hit is None:
            rows.append([r["policy"], float(r["C_b"]), r["seed"], NEVER_REACHED, target,
                         None, None, None, None])
            continue
        k, t = hit
        rows.append([r["policy"], float(r["C_b"]), r["seed"], "reached", target, k, t,
                     _ratio(k, ref[0] if ref else None), _ratio(t, ref[1] if ref else None)])
    return rows


def cmd_compare(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
    rows = compare_rows(manifest, path.parent, args.target_loss)
    out = Path(args.out) if args.out else path.parent
    _write_csv(out / "compare.csv", COMPARE_COLUMNS, rows)
    groups = {}
    for row in rows:
        groups.setdefault((row[0], row[1]), []).append(row[8])
    for (policy, b), ratios in groups.items():
        got = [x for x in ratios if x is not None]
        mean = f"{np.mean(got):.4f}" if got else "n/a"
        print(f"{policy} C_b={b:g}: mean time ratio vs vanilla {mean} "
              f"({len(got)}/{len(ratios)} runs reached target)")
    return EXIT_OK


# ---- entry point ------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    p.add_argument("--graph", help="graph JSON file ({'m': n, 'edges': [[i, j], ...]})")
    p.add_argument("--generator", choices=["erdos_renyi", "geometric"])
    p.add_argument("--nodes", type=int, help="number of nodes for --generator")
    p.add_argument("--edge-prob", type=float, help="Erdos-Renyi edge probability")
    p.add_argument("--radius", type=float, help="geometric connection radius")
    p.add_argument("--seed", type=int, help="graph seed (decompose, sweep) or run seed (train)")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matcha", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="split a graph into matchings")
    _common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("sweep", help="rho of each policy over a budget grid")
    _common(p)
    p.add_argument("--budgets", help="comma-separated budgets (default 0.1,...,1.0)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="run decentralized SGD for every policy/budget/seed")
    _common(p)
    p.add_argument("--budgets", help="comma-separated budgets")
    p.add_argument("--policies", help="comma-separated subset of matcha,vanilla,periodic")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", help="learning rate or 'theory'")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="time to a target loss, relative to vanilla")
    p.add_argument("--manifest", required=True, help="manifest.json written by train")
    p.add_argument("--target-loss", type=float, required=True)
    p.add_argument("--out", help="output directory (default: the manifest's directory)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFinite, DegeneratePlan, StepSizeViolation, MatchaError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
