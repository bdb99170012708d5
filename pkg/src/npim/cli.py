"""Command-line interface: generate / train / bench / trace / generalize /
sweep, with strict configs, a single master seed per command, and a manifest
of output checksums."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import benchmark as bench_mod
from . import harness, instances as inst_mod, machine, training
from .harness import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

GENERATE_FAMILIES = ("sk", "sk_pm") + inst_mod.GRAPH_FAMILIES
PROBLEMS = ("ising", "maxcut", "mis", "clique")

REPORT_HEADER = (
    "epoch,mean_reward,tau,grad_norm_x,grad_norm_L,ledger_updates,seconds"
)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _parse_params(pairs: list[str]) -> dict:
    out: dict = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--param must look like key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        out[key] = parsed
    return out


def _resolve_seed(args, doc: dict | None = None) -> int:
    if args.seed is not None:
        return int(args.seed)
    if doc is not None and "seed" in doc:
        return int(doc["seed"])
    raise ConfigError("no seed given: pass --seed or put \"seed\" in the config")


def _out_dir(args) -> Path:
    if args.out is None:
        raise ConfigError("--out directory is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _arch_from_config(doc: dict, where: str) -> machine.Architecture:
    harness.check_object(
        doc,
        where,
        required={"t_c": "int", "d": "int", "m": "int"},
        optional={"variant": "str", "basis": "str", "noise_modulated": "bool"},
    )
    try:
        return machine.Architecture(
            t_c=doc["t_c"],
            d=doc["d"],
            m=doc["m"],
            variant=doc.get("variant", "continuous"),
            basis=doc.get("basis", "fourier"),
            noise_modulated=doc.get("noise_modulated", False),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _generate_problem(family: str, n: int, gen_seed: int, problem: str, params: dict):
    """One generated instance: returns (IsingInstance, source graph or None)."""
    if family in ("sk", "sk_pm"):
        if problem != "ising":
            raise ConfigError(f"family {family!r} only supports problem 'ising'")
        dist = "gaussian" if family == "sk" else "pm"
        return inst_mod.gen_sk(n, gen_seed, dist=dist), None
    graph = inst_mod.gen_graph(n, family, gen_seed, **params)
    ident = f"{family}-n{n}-{problem}-s{gen_seed}"
    if problem == "maxcut":
        return inst_mod.from_maxcut(graph, id=ident), graph
    if problem == "mis":
        return inst_mod.from_mis(graph, id=ident), graph
    if problem == "clique":
        return inst_mod.from_maxclique(graph, id=ident), graph
    raise ConfigError(f"graph families need problem in maxcut/mis/clique, got {problem!r}")


def _default_problem(family: str) -> str:
    return "ising" if family in ("sk", "sk_pm") else "maxcut"


def _generate_set(
    family: str,
    n: int,
    count: int,
    master_seed: int,
    stream_slot: int,
    problem: str,
    params: dict,
):
    seeds = harness.stream_seeds(master_seed, harness.STREAM_GEN, stream_slot, count=count)
    return [
        _generate_problem(family, n, int(s), problem, params) for s in seeds
    ]


def _readout_problem(readout: str) -> str:
    return {"energy": "maxcut", "cut": "maxcut", "mis": "mis", "clique": "clique"}[readout]


def _load_instance_file(path: Path, readout: str):
    """Load a .gset graph or a .json instance; returns (instance, graph)."""
    text = path.read_text()
    if path.suffix == ".json":
        inst, kind = inst_mod.instance_from_json(text)
        graph = None
        if readout in ("cut", "mis", "clique"):
            graph = inst_mod.graph_from_instance(inst, kind)
        if not inst.id:
            inst = inst_mod.IsingInstance(
                inst.n, inst.couplings.copy(), inst.linear.copy(), id=path.stem
            )
        return inst, graph
    graph = inst_mod.parse_gset(text)
    problem = _readout_problem(readout)
    mapper = {
        "maxcut": inst_mod.from_maxcut,
        "mis": inst_mod.from_mis,
        "clique": inst_mod.from_maxclique,
    }[problem]
    return mapper(graph, id=path.stem), graph


def _write_report_csv(path: Path, reports: list[training.EpochReport]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(REPORT_HEADER + "\n")
        for rep in reports:
            fh.write(
                f"{rep.epoch},{rep.mean_reward!r},{rep.tau!r},{rep.grad_norm_x!r},"
                f"{rep.grad_norm_l!r},{rep.ledger_updates},{rep.seconds!r}\n"
            )


def _load_targets_file(path: Path) -> dict[str, float]:
    doc = json.loads(path.read_text())
    if not isinstance(doc, dict) or "targets" not in doc:
        raise ConfigError(f"{path}: targets file needs a 'targets' object")
    out = {}
    for key, value in doc["targets"].items():
        if isinstance(value, dict):
            if "cut" in value:
                out[key] = float(value["cut"])
            elif "energy" in value:
                out[key] = float(value["energy"])
            else:
                raise ConfigError(f"{path}: target for {key} has no cut/energy value")
        else:
            out[key] = float(value)
    return out


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    out = _out_dir(args)
    seed = _resolve_seed(args)
    family = args.family
    if family not in GENERATE_FAMILIES:
        raise ConfigError(f"--family must be one of {GENERATE_FAMILIES}")
    params = _parse_params(args.param)
    fmt = args.format
    if fmt == "gset" and family in ("sk", "sk_pm"):
        raise ConfigError("gset format only applies to graph families")
    problem = args.problem or _default_problem(family)
    if family in ("sk", "sk_pm") and problem != "ising":
        raise ConfigError(f"family {family!r} only supports problem 'ising'")
    try:
        pairs = _generate_set(family, args.n, args.count, seed, 0, problem, params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    artifacts = []
    for i, (inst, graph) in enumerate(pairs):
        if fmt == "gset":
            path = out / f"{family}-n{args.n}-{i:04d}.gset"
            path.write_text(inst_mod.write_gset(graph))
        else:
            path = out / f"{family}-n{args.n}-{i:04d}.json"
            kind = {"ising": "sk", "maxcut": "maxcut", "mis": "mis", "clique": "clique"}[
                problem
            ]
            path.write_text(inst_mod.instance_to_json(inst, kind=kind) + "\n")
        artifacts.append(path)
    harness.write_manifest(out, "generate", None, seed, artifacts)
    print(f"wrote {len(artifacts)} instances to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _validate_train_config(doc: dict) -> None:
    harness.require_format_version(doc, "train config")
    harness.check_object(
        doc,
        "train config",
        required={"format_version": "int", "arch": "dict", "budget": "dict", "stages": "list"},
        optional={
            "machine": "str",
            "trainer": "str",
            "reward": "dict",
            "optimizer": "dict",
            "seed": "int",
            "snapshot_epochs": "list",
            "fine_tune_from": "str",
            "targets": "str",
        },
    )
    if doc.get("machine", "npim") != "npim":
        raise ConfigError("train config: only the npim machine is trainable")
    if doc.get("trainer", "das") not in ("das", "reinforce"):
        raise ConfigError("train config: trainer must be 'das' or 'reinforce'")
    harness.check_object(
        doc["budget"],
        "budget",
        required={"epochs": "int", "B": "int", "R": "int", "t_total": "int"},
    )
    harness.check_object(
        doc.get("reward", {}),
        "reward",
        required={},
        optional={
            "kind": "str",
            "tau0": "number",
            "tau_factor": "number",
            "tau_period": "int",
            "mean_threshold": "number",
            "exact": "bool",
        },
    )
    harness.check_object(
        doc.get("optimizer", {}),
        "optimizer",
        required={},
        optional={
            "eta_x": "number",
            "eta_L": "number",
            "sigma0": "number",
            "eps_L": "number",
            "centering": "str",
        },
    )
    if not doc["stages"]:
        raise ConfigError("train config: stages must not be empty")
    for i, stage in enumerate(doc["stages"]):
        harness.check_object(
            stage,
            f"stages[{i}]",
            required={"family": "str", "n": "int"},
            optional={
                "count": "int",
                "epochs": "int",
                "inherit": "bool",
                "problem": "str",
                "params": "dict",
                "t_total": "int",
            },
        )


def _train_config_from_doc(
    doc: dict,
    arch: machine.Architecture,
    stage: dict,
    stage_seed: int,
    fine_tune_from: str | None,
    threads: int,
) -> training.TrainConfig:
    budget = doc["budget"]
    reward = doc.get("reward", {})
    optimizer = doc.get("optimizer", {})
    return training.TrainConfig(
        arch=arch,
        instances_per_epoch=budget["B"],
        trajectories_per_instance=budget["R"],
        epochs=stage.get("epochs", budget["epochs"]),
        t_total=stage.get("t_total", budget["t_total"]),
        eta_x=optimizer.get("eta_x", 0.05),
        eta_l=optimizer.get("eta_L", 0.01),
        sigma0=optimizer.get("sigma0", 0.3),
        eps_l=optimizer.get("eps_L", 1e-4),
        reward_kind=reward.get("kind", "success"),
        centering=optimizer.get("centering", "literal"),
        tau0=reward.get("tau0", 0.005),
        tau_factor=reward.get("tau_factor", 1.5),
        tau_period=reward.get("tau_period", 10),
        mean_threshold=reward.get("mean_threshold", 0.5),
        exact_match=reward.get("exact", False),
        seed=stage_seed,
        fine_tune_from=fine_tune_from,
        threads=threads,
    )


def cmd_train(args) -> int:
    if args.config is None:
        raise ConfigError("train requires --config")
    doc = harness.load_json_config(args.config)
    _validate_train_config(doc)
    out = _out_dir(args)
    seed = _resolve_seed(args, doc)
    arch = _arch_from_config(doc["arch"], "arch")
    ledger = training.EnergyLedger()
    if "targets" in doc:
        ledger = training.EnergyLedger(_load_targets_file(Path(doc["targets"])))
    snapshot_epochs = tuple(doc.get("snapshot_epochs", []))
    trainer = doc.get("trainer", "das")
    artifacts: list[Path] = []
    reports: list[training.EpochReport] = []
    epoch_offset = 0
    prev_model: str | None = doc.get("fine_tune_from")
    for i, stage in enumerate(doc["stages"]):
        problem = stage.get("problem", _default_problem(stage["family"]))
        pairs = _generate_set(
            stage["family"],
            stage["n"],
            stage.get("count", 100),
            seed,
            i,
            problem,
            stage.get("params", {}),
        )
        stage_seed = int(harness.stream_seeds(seed, harness.STREAM_STAGE, i, count=1)[0])
        inherit = stage.get("inherit", i > 0)
        cfg = _train_config_from_doc(
            doc, arch, stage, stage_seed, prev_model if inherit or i == 0 else None, args.threads
        )
        result = training.train(
            cfg,
            [inst for inst, _g in pairs],
            ledger=ledger,
            snapshot_epochs=snapshot_epochs,
            trainer=trainer,
        )
        meta = {
            "epochs": cfg.epochs,
            "reward_kind": cfg.reward_kind,
            "instance_family": f"{stage['family']}-n{stage['n']}",
            "seed": seed,
        }
        stage_path = out / f"model_stage{i}.json"
        machine.save_model(stage_path, arch, result.theta_x, meta)
        artifacts.append(stage_path)
        for epoch, theta in sorted(result.snapshots.items()):
            snap_path = out / f"snapshot_stage{i}_epoch{epoch}.json"
            machine.save_model(snap_path, arch, theta, {**meta, "epochs": epoch})
            artifacts.append(snap_path)
        for rep in result.reports:
            reports.append(
                training.EpochReport(
                    epoch=rep.epoch + epoch_offset,
                    mean_reward=rep.mean_reward,
                    reward_histogram=rep.reward_histogram,
                    tau=rep.tau,
                    grad_norm_x=rep.grad_norm_x,
                    grad_norm_l=rep.grad_norm_l,
                    ledger_updates=rep.ledger_updates,
                    seconds=rep.seconds,
                )
            )
        epoch_offset += cfg.epochs
        prev_model = str(stage_path)
    final_path = out / "model.json"
    arch_final, flat_final, meta_final = machine.load_model(prev_model)
    machine.save_model(final_path, arch_final, flat_final, meta_final)
    artifacts.append(final_path)
    _write_report_csv(out / "report.csv", reports)
    harness.write_manifest(out, "train", args.config, seed, artifacts)
    print(f"trained {len(doc['stages'])} stage(s); final model at {final_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _validate_bench_config(doc: dict) -> None:
    harness.require_format_version(doc, "bench config")
    harness.check_object(
        doc,
        "bench config",
        required={"format_version": "int", "machine": "dict", "instances": "list", "runs": "int"},
        optional={"best_of": "int", "targets_file": "str", "seed": "int"},
    )
    harness.check_object(
        doc["machine"],
        "machine",
        required={"machine": "str"},
        optional={"model": "str", "params": "dict"},
    )
    if not doc["instances"]:
        raise ConfigError("bench config: instances must not be empty")
    for i, entry in enumerate(doc["instances"]):
        where = f"instances[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected an object")
        if "path" in entry:
            harness.check_object(
                entry,
                where,
                required={"path": "str", "readout": "str", "t": "int"},
                optional={"family": "str", "target": "number"},
            )
        else:
            harness.check_object(
                entry,
                where,
                required={"family": "str", "n": "int", "count": "int", "readout": "str", "t": "int"},
                optional={"params": "dict", "target": "number"},
            )
        if entry["readout"] not in bench_mod.READOUTS:
            raise ConfigError(f"{where}: readout must be one of {bench_mod.READOUTS}")


def _bench_entries(doc: dict, seed: int) -> list[bench_mod.BenchEntry]:
    targets = {}
    if "targets_file" in doc:
        targets = _load_targets_file(Path(doc["targets_file"]))
    entries: list[bench_mod.BenchEntry] = []
    for i, entry in enumerate(doc["instances"]):
        readout = entry["readout"]
        if "path" in entry:
            path = Path(entry["path"])
            if not path.exists():
                raise ConfigError(f"instance file not found: {path}")
            inst, graph = _load_instance_file(path, readout)
            target = entry.get("target", targets.get(inst.id))
            entries.append(
                bench_mod.BenchEntry(
                    instance=inst,
                    readout=readout,
                    t=entry["t"],
                    family=entry.get("family", ""),
                    graph=graph,
                    target=target,
                )
            )
        else:
            problem = _readout_problem(readout)
            if entry["family"] in ("sk", "sk_pm"):
                problem = "ising"
                if readout != "energy":
                    raise ConfigError("sk instances only support the energy readout")
            pairs = _generate_set(
                entry["family"], entry["n"], entry["count"], seed, 100 + i, problem,
                entry.get("params", {}),
            )
            for inst, graph in pairs:
                entries.append(
                    bench_mod.BenchEntry(
                        instance=inst,
                        readout=readout,
                        t=entry["t"],
                        family=entry["family"],
                        graph=graph,
                        target=entry.get("target", targets.get(inst.id)),
                    )
                )
    return entries


def cmd_bench(args) -> int:
    if args.config is None:
        raise ConfigError("bench requires --config")
    doc = harness.load_json_config(args.config)
    _validate_bench_config(doc)
    out = _out_dir(args)
    seed = _resolve_seed(args, doc)
    entries = _bench_entries(doc, seed)
    suite = bench_mod.BenchSuite(
        machine=doc["machine"],
        entries=entries,
        runs=doc["runs"],
        best_of=doc.get("best_of"),
    )
    try:
        results, summary = bench_mod.run_suite(suite, seed, threads=args.threads)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    results_path = out / "results.csv"
    results_path.write_text("\n".join(bench_mod.results_csv_rows(results)) + "\n")
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    harness.write_manifest(out, "bench", args.config, seed, [results_path, summary_path])
    print(f"benchmarked {len(entries)} instances; results at {results_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


def _weights_csv_lines(arch: machine.Architecture, tensor, t_total: int) -> list[str]:
    if arch.d == 0:
        header = ["step", "w0"] + [f"w2_{s}" for s in range(arch.t_c)]
    else:
        header = (
            ["step", "w0"]
            + [f"w1_{k}" for k in range(arch.d)]
            + [f"w2_{k}_{s}" for k in range(arch.d) for s in range(arch.t_c)]
        )
    lines = [",".join(header)]
    for t in range(t_total):
        w0, w1, w2 = machine.weights_at(arch, tensor, t, t_total)
        if arch.d == 0:
            values = [w0] + list(w2)
        else:
            values = [w0] + list(w1) + list(w2.reshape(-1))
        lines.append(",".join([str(t)] + [repr(float(v)) for v in values]))
    return lines


def cmd_trace(args) -> int:
    if args.model is None or args.instance is None:
        raise ConfigError("trace requires --model and --instance")
    out = _out_dir(args)
    seed = _resolve_seed(args)
    model_path = Path(args.model)
    if not model_path.exists():
        raise ConfigError(f"model file not found: {model_path}")
    arch, flat, _meta = machine.load_model(model_path)
    tensor = machine.unpack_theta(arch, flat)
    inst, _graph = _load_instance_file(Path(args.instance), "energy")
    t_total = args.steps
    result = machine.run_trajectory(inst, arch, tensor, t_total, seed, trace=True)
    trace_path = out / "trace.csv"
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "variable_index", "x", "h"])
        for t in range(result.x_trace.shape[0]):
            for i in range(inst.n):
                writer.writerow(
                    [t, i, repr(float(result.x_trace[t, i])), repr(float(result.h_trace[t, i]))]
                )
    weights_path = out / "weights.csv"
    weights_path.write_text("\n".join(_weights_csv_lines(arch, tensor, t_total)) + "\n")
    artifacts = [trace_path, weights_path]
    if args.snapshots is not None:
        snap_dir = Path(args.snapshots)
        for snap in sorted(snap_dir.glob("snapshot_*.json")):
            s_arch, s_flat, _m = machine.load_model(snap)
            s_tensor = machine.unpack_theta(s_arch, s_flat)
            path = out / f"weights_{snap.stem}.csv"
            path.write_text("\n".join(_weights_csv_lines(s_arch, s_tensor, t_total)) + "\n")
            artifacts.append(path)
    harness.write_manifest(out, "trace", None, seed, artifacts)
    print(f"trace written to {trace_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# generalize
# ---------------------------------------------------------------------------


def _validate_generalize_config(doc: dict) -> None:
    harness.require_format_version(doc, "generalize config")
    harness.check_object(
        doc,
        "generalize config",
        required={
            "format_version": "int",
            "arch": "dict",
            "budget": "dict",
            "family": "str",
            "n": "int",
            "test_count": "int",
            "eval_runs": "int",
        },
        optional={
            "reward": "dict",
            "optimizer": "dict",
            "train_sizes": "list",
            "params": "dict",
            "problem": "str",
            "seed": "int",
        },
    )
    harness.check_object(
        doc["budget"],
        "budget",
        required={"epochs": "int", "B": "int", "R": "int", "t_total": "int"},
    )
    if doc["test_count"] < 1:
        raise ConfigError("generalize config: test_count must be >= 1")


def cmd_generalize(args) -> int:
    if args.config is None:
        raise ConfigError("generalize requires --config")
    doc = harness.load_json_config(args.config)
    _validate_generalize_config(doc)
    out = _out_dir(args)
    seed = _resolve_seed(args, doc)
    arch = _arch_from_config(doc["arch"], "arch")
    train_sizes = doc.get("train_sizes", [1, 3, 10, 30, 100])
    problem = doc.get("problem", _default_problem(doc["family"]))
    params = doc.get("params", {})
    pool = _generate_set(doc["family"], doc["n"], max(train_sizes), seed, 0, problem, params)
    test_pairs = _generate_set(doc["family"], doc["n"], doc["test_count"], seed, 1, problem, params)
    test_instances = [inst for inst, _g in test_pairs]
    rows = []
    for size in train_sizes:
        stage_seed = int(
            harness.stream_seeds(seed, harness.STREAM_SPLIT, size, count=1)[0]
        )
        stage = {"epochs": doc["budget"]["epochs"]}
        cfg = _train_config_from_doc(doc, arch, stage, stage_seed, None, args.threads)
        if cfg.instances_per_epoch > size:
            cfg = _train_config_from_doc(
                {**doc, "budget": {**doc["budget"], "B": size}},
                arch,
                stage,
                stage_seed,
                None,
                args.threads,
            )
        train_instances = [inst for inst, _g in pool[:size]]
        result = training.train(cfg, train_instances)
        train_reward = training.evaluate_mean_reward(
            arch, result.theta_x, train_instances, cfg, runs=doc["eval_runs"]
        )
        test_reward = training.evaluate_mean_reward(
            arch, result.theta_x, test_instances, cfg, runs=doc["eval_runs"]
        )
        rows.append((size, train_reward, test_reward))
        print(f"train_size={size}: train={train_reward:.4f} test={test_reward:.4f}")
    table_path = out / "generalization.csv"
    with open(table_path, "w", newline="") as fh:
        fh.write("train_size,train_reward,test_reward\n")
        for size, tr, te in rows:
            fh.write(f"{size},{tr!r},{te!r}\n")
    harness.write_manifest(out, "generalize", args.config, seed, [table_path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _validate_sweep_config(doc: dict) -> None:
    harness.require_format_version(doc, "sweep config")
    harness.check_object(
        doc,
        "sweep config",
        required={
            "format_version": "int",
            "grid": "list",
            "budget": "dict",
            "family": "str",
            "n": "int",
            "count": "int",
        },
        optional={
            "arch_base": "dict",
            "reward": "dict",
            "optimizer": "dict",
            "params": "dict",
            "problem": "str",
            "seed": "int",
            "final_window": "int",
        },
    )
    if not doc["grid"]:
        raise ConfigError("sweep config: grid must not be empty")
    for i, point in enumerate(doc["grid"]):
        harness.check_object(
            point,
            f"grid[{i}]",
            required={"t_c": "int", "d": "int", "m": "int"},
            optional={"variant": "str", "basis": "str"},
        )
    harness.check_object(
        doc["budget"],
        "budget",
        required={"epochs": "int", "B": "int", "R": "int", "t_total": "int"},
    )


def cmd_sweep(args) -> int:
    if args.config is None:
        raise ConfigError("sweep requires --config")
    doc = harness.load_json_config(args.config)
    _validate_sweep_config(doc)
    out = _out_dir(args)
    seed = _resolve_seed(args, doc)
    base = doc.get("arch_base", {})
    problem = doc.get("problem", _default_problem(doc["family"]))
    pairs = _generate_set(
        doc["family"], doc["n"], doc["count"], seed, 0, problem, doc.get("params", {})
    )
    instances = [inst for inst, _g in pairs]
    window = doc.get("final_window", 10)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    rows = []
    artifacts = []
    for k, point in enumerate(doc["grid"]):
        arch = _arch_from_config({**base, **point}, f"grid[{k}]")
        stage_seed = int(harness.stream_seeds(seed, harness.STREAM_STAGE, k, count=1)[0])
        cfg = _train_config_from_doc(doc, arch, {}, stage_seed, None, args.threads)
        result = training.train(cfg, instances)
        tail = result.reports[-window:]
        final_reward = float(np.mean([r.mean_reward for r in tail])) if tail else float("nan")
        model_path = models_dir / (
            f"tc{arch.t_c}_d{arch.d}_m{arch.m}_{arch.variant}_{arch.basis}.json"
        )
        machine.save_model(
            model_path,
            arch,
            result.theta_x,
            {
                "epochs": cfg.epochs,
                "reward_kind": cfg.reward_kind,
                "instance_family": f"{doc['family']}-n{doc['n']}",
                "seed": seed,
            },
        )
        artifacts.append(model_path)
        rows.append(
            (arch.t_c, arch.d, arch.m, arch.variant, arch.basis,
             machine.param_count(arch), final_reward)
        )
        print(
            f"t_c={arch.t_c} d={arch.d} m={arch.m} P={machine.param_count(arch)}: "
            f"final mean reward {final_reward:.4f}"
        )
    table_path = out / "sweep.csv"
    with open(table_path, "w", newline="") as fh:
        fh.write("t_c,d,m,variant,basis,total_p,final_mean_reward\n")
        for t_c, d, m, variant, basis, p, reward in rows:
            fh.write(f"{t_c},{d},{m},{variant},{basis},{p},{reward!r}\n")
    artifacts.append(table_path)
    harness.write_manifest(out, "sweep", args.config, seed, artifacts)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config path")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads")

    parser = argparse.ArgumentParser(
        prog="npim",
        description="Learned and classical Ising machines: instance generation, "
        "training, benchmarking, and trace export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", parents=[common], help="write instance files")
    p_gen.add_argument("--family", required=True, choices=GENERATE_FAMILIES)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--format", choices=("json", "gset"), default="json")
    p_gen.add_argument("--problem", choices=PROBLEMS, default=None)
    p_gen.add_argument("--param", action="append", default=[], help="family parameter key=value")
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", parents=[common], help="train a model per config")
    p_train.set_defaults(func=cmd_train)

    p_bench = sub.add_parser("bench", parents=[common], help="run a benchmark suite")
    p_bench.set_defaults(func=cmd_bench)

    p_trace = sub.add_parser("trace", parents=[common], help="export x/h traces and weights")
    p_trace.add_argument("--model", type=str, default=None)
    p_trace.add_argument("--instance", type=str, default=None)
    p_trace.add_argument("--steps", type=int, required=True)
    p_trace.add_argument("--snapshots", type=str, default=None, help="training output dir with snapshot models")
    p_trace.set_defaults(func=cmd_trace)

    p_genz = sub.add_parser("generalize", parents=[common], help="train/test split experiment")
    p_genz.set_defaults(func=cmd_generalize)

    p_sweep = sub.add_parser("sweep", parents=[common], help="architecture grid of training runs")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
