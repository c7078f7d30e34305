"""Experiment runner: analyze / gen-data / train-phase / train-image / vqe / report.

Every subcommand takes a JSON config (--config) whose seed must be explicit
(or passed via --seed); artifacts are byte-identical across reruns with the
same config.  TNVQC_THREADS caps the worker fan-out of independent
experiments (default 1, sequential).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, classify, dataio, engine, spin
from .ansatz import (
    LAYOUT_HWE,
    LAYOUT_MERA,
    LAYOUT_MERA_MODIFIED,
    LAYOUT_TTN,
    build_hardware_efficient,
    build_mera,
    build_ttn,
    circuit_to_text,
)


class ConfigError(ValueError):
    pass


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"config is missing required field {key!r}")
    return config[key]


def _worker_count(n_jobs: int) -> int:
    raw = os.environ.get("TNVQC_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"TNVQC_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"TNVQC_THREADS must be >= 1, got {threads}")
    return max(1, min(threads, n_jobs))


def _build_ansatz(n_qubits: int, spec: dict):
    layout = spec.get("layout", "mera").lower()
    block = spec.get("block", "U")
    layers = int(spec.get("layers", 1))
    variant = spec.get("variant", "standard")
    if layout == "ttn":
        return build_ttn(n_qubits, block, layers)
    if layout == "mera":
        return build_mera(n_qubits, block, layers, variant=variant)
    if layout == "hwe":
        return build_hardware_efficient(n_qubits, int(spec.get("depth", engine.VQE_DEFAULT_DEPTH)))
    raise ConfigError(f"unknown ansatz layout {layout!r}")


def _ansatz_stem(circuit) -> str:
    tag = {
        LAYOUT_TTN: "ttn",
        LAYOUT_MERA: "mera",
        LAYOUT_MERA_MODIFIED: "mera_modified",
        LAYOUT_HWE: "hwe",
    }.get(circuit.layout_tag, "custom")
    block = circuit.block_kind.lower() if circuit.block_kind != "none" else "x"
    return f"{tag}_{block}_l{circuit.layers}"


def _maybe_dump_circuit(circuit, out_dir: Path, stem: str, dump: bool, written: list):
    if dump:
        path = out_dir / f"{stem}.circuit.txt"
        path.write_text(circuit_to_text(circuit))
        written.append(path)


DEFAULT_ANALYZE_SWEEP = [
    {"layout": layout, "block": block, "layers": layers}
    for layout in ("ttn", "mera")
    for block in ("U", "V")
    for layers in (1, 2, 3, 4, 5)
]


def cmd_analyze(config: dict, out_dir: Path, dump_circuit: bool = False) -> list[Path]:
    seed = int(_require(config, "seed"))
    n_qubits = int(config.get("n_qubits", 8))
    n_samples = int(config.get("n_samples", analysis.DEFAULT_SAMPLES))
    n_bins = int(config.get("n_bins", analysis.DEFAULT_BINS))
    sweep = config.get("circuits", DEFAULT_ANALYZE_SWEEP)
    circuits = [_build_ansatz(n_qubits, c) for c in sweep]

    def job(circuit):
        return analysis.analyze_circuit(circuit, n_samples, n_bins, seed)

    workers = _worker_count(len(circuits))
    if workers == 1:
        reports = [job(c) for c in circuits]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(job, circuits))

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    csv = out_dir / "analysis.csv"
    lines = [analysis.REPORT_CSV_HEADER]
    lines += [analysis.report_csv_row(r) for r in reports]
    csv.write_text("\n".join(lines) + "\n")
    written.append(csv)
    for circuit in circuits:
        _maybe_dump_circuit(circuit, out_dir, _ansatz_stem(circuit), dump_circuit, written)
    return written


def _lattice_from_config(config: dict) -> spin.Lattice:
    rows = int(_require(config, "rows"))
    cols = int(_require(config, "cols"))
    kind = config.get("lattice_kind", "chain" if rows == 1 else "rectangular")
    return spin.build_lattice(kind, rows, cols)


def cmd_gen_data(config: dict, out_dir: Path) -> list[Path]:
    seed = int(_require(config, "seed"))
    model = _require(config, "model").lower()
    lattice = _lattice_from_config(config)
    n_points = int(config.get("n_points", 1000))
    name = config.get("name", f"{model}_{lattice.label()}")
    dataset = spin.generate_phase_dataset(model, lattice, n_points, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.qprd"
    dataio.save_dataset(dataset, path, extra_config={"seed": seed, "n_points": n_points})
    return [path, Path(str(path) + ".json")]


def _phase_dataset(config: dict, seed: int) -> spin.PhaseDataset:
    if "dataset" in config:
        return dataio.load_dataset(config["dataset"])
    lattice = _lattice_from_config(config)
    model = _require(config, "model").lower()
    n_points = int(config.get("n_points", 1000))
    dataset_seed = int(config.get("dataset_seed", seed))
    return spin.generate_phase_dataset(model, lattice, n_points, dataset_seed)


def _write_report(
    report: engine.TrainReport, out_dir: Path, stem: str, written: list
):
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"{stem}.json"
    report_path.write_text(dataio.report_to_json(report))
    written.append(report_path)
    loss_path = out_dir / f"{stem}_loss.csv"
    dataio.write_loss_csv(report, loss_path)
    written.append(loss_path)


def cmd_train_phase(config: dict, out_dir: Path, dump_circuit: bool = False) -> list[Path]:
    seed = int(_require(config, "seed"))
    dataset = _phase_dataset(config, seed)
    circuit = _build_ansatz(dataset.lattice.n_sites, config.get("ansatz", {}))
    train_config = engine.TrainConfig(
        batch_size=int(config.get("batch_size", 8)),
        learning_rate=float(config.get("learning_rate", 0.002)),
        iterations=int(config.get("iterations", 2000)),
        seed=seed,
        gradient=config.get("gradient", "adjoint"),
        val_every=int(config.get("val_every", 50)),
    )
    ratios = tuple(config.get("split", (3, 1, 1)))
    report = classify.phase_pipeline(dataset, circuit, train_config, split_ratios=ratios)
    report.meta["dataset"] = config.get("dataset", f"generated:{dataset.model}_{dataset.lattice.label()}")
    written: list[Path] = []
    stem = f"phase_{dataset.model}_{dataset.lattice.label()}_{_ansatz_stem(circuit)}_seed{seed}"
    _write_report(report, out_dir, stem, written)
    _maybe_dump_circuit(circuit, out_dir, stem, dump_circuit, written)
    return written


def cmd_train_image(config: dict, out_dir: Path, dump_circuit: bool = False) -> list[Path]:
    seed = int(_require(config, "seed"))
    images_path = _require(config, "images")
    labels_path = _require(config, "labels")
    class_a = int(_require(config, "class_a"))
    class_b = int(_require(config, "class_b"))
    per_class = int(config.get("images_per_class", 2000))
    records = dataio.load_idx(images_path, labels_path)

    keep = {class_a, class_b}
    sub_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF00D]))
    by_class = {c: [r for r in records if r.label == c] for c in sorted(keep)}
    chosen = []
    for c, group in by_class.items():
        if not group:
            raise ConfigError(f"no images with label {c} in {images_path}")
        count = min(per_class, len(group))
        idx = sub_rng.choice(len(group), size=count, replace=False)
        chosen.extend(group[i] for i in sorted(idx))
    encoded = [dataio.preprocess(r) for r in chosen]

    circuit = _build_ansatz(8, config.get("ansatz", {}))
    batch_size = int(config.get("batch_size", 20))
    epochs = int(config.get("epochs", 40))
    train_config = engine.TrainConfig(
        batch_size=batch_size,
        learning_rate=float(config.get("learning_rate", 0.01)),
        iterations=int(config.get("iterations", 1)),  # recomputed from epochs below
        seed=seed,
        gradient=config.get("gradient", "adjoint"),
        val_every=int(config.get("val_every", 50)),
    )
    ratios = tuple(config.get("split", (5, 1, 1)))
    report = classify.pairwise_image_pipeline(
        encoded, class_a, class_b, circuit, train_config,
        split_ratios=ratios, epochs=epochs,
    )
    report.meta["images"] = str(images_path)
    report.meta["images_per_class"] = per_class
    written: list[Path] = []
    stem = f"image_{class_a}v{class_b}_{_ansatz_stem(circuit)}_seed{seed}"
    _write_report(report, out_dir, stem, written)
    _maybe_dump_circuit(circuit, out_dir, stem, dump_circuit, written)
    return written


def cmd_vqe(config: dict, out_dir: Path, dump_circuit: bool = False) -> list[Path]:
    seed = int(_require(config, "seed"))
    model = _require(config, "model").lower()
    lattice = _lattice_from_config(config)
    sweep_value = float(_require(config, "sweep_value"))
    hamiltonian = spin.build_model(model, lattice, sweep_value)
    depth = int(config.get("depth", engine.VQE_DEFAULT_DEPTH))
    ansatz = build_hardware_efficient(lattice.n_sites, depth)
    vqe_config = engine.VqeConfig(
        seed=seed,
        iterations=int(config.get("iterations", engine.VqeConfig.iterations)),
        learning_rate=float(config.get("learning_rate", engine.VqeConfig.learning_rate)),
        restarts=int(config.get("restarts", engine.VqeConfig.restarts)),
        gradient=config.get("gradient", "adjoint"),
    )
    energy, params = engine.vqe_ground_state(hamiltonian, ansatz, vqe_config)
    ed_energy, _ = spin.ground_state_ed(hamiltonian)
    print(
        f"vqe {model} {lattice.label()} sweep={sweep_value}: "
        f"energy {energy:.8f} vs exact {ed_energy:.8f} (diff {energy - ed_energy:.2e})"
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"vqe_{model}_{lattice.label()}_seed{seed}"
    payload = {
        "model": model,
        "lattice": lattice.label(),
        "sweep_value": sweep_value,
        "depth": depth,
        "energy": energy,
        "ed_energy": ed_energy,
        "diff": energy - ed_energy,
        "params": [float(x) for x in params],
        "config": {
            "seed": vqe_config.seed,
            "iterations": vqe_config.iterations,
            "learning_rate": vqe_config.learning_rate,
            "restarts": vqe_config.restarts,
            "gradient": vqe_config.gradient,
        },
    }
    path = out_dir / f"{stem}.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    written = [path]
    _maybe_dump_circuit(ansatz, out_dir, stem, dump_circuit, written)
    return written


def _rebuild_pipeline(report: engine.TrainReport):
    meta = report.meta
    rows, cols = (int(x) for x in meta["lattice"].split("x"))
    layout = meta["layout"]
    spec = {
        "layout": {"TTN": "ttn", "MERA": "mera", "MERA_MODIFIED": "mera"}[layout],
        "block": meta["block"],
        "layers": meta["layers"],
    }
    if layout == "MERA_MODIFIED":
        spec["variant"] = "modified"
    circuit = _build_ansatz(rows * cols, spec)
    readout = classify.ReadoutSpec(
        classify.READOUT_TWO_QUBIT, tuple(meta["readout_qubits"]), meta["n_classes"]
    )
    return classify.Pipeline(circuit, readout)


def cmd_report(config: dict, out_dir: Path) -> list[Path]:
    report_paths = config.get("reports", [])
    sweep_spec = config.get("prediction_sweep")
    if not report_paths and not sweep_spec:
        raise ConfigError("report command needs 'reports' paths or a 'prediction_sweep'")
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if report_paths:
        reports = [dataio.report_from_json(Path(p).read_text()) for p in report_paths]
        written.extend(dataio.write_results(reports, out_dir))
        layer_rows = sorted(
            (
                r.meta.get("task", ""),
                str(r.meta.get("model", "")),
                int(r.meta.get("layers", 0)),
                r.test_accuracy,
            )
            for r in reports
        )
        acc_layers = out_dir / "accuracy_vs_layers.csv"
        lines = ["task,model,layers,test_accuracy"]
        lines += [f"{t},{m},{l},{a!r}" for t, m, l, a in layer_rows]
        acc_layers.write_text("\n".join(lines) + "\n")
        written.append(acc_layers)

    if sweep_spec:
        report = dataio.report_from_json(Path(_require(sweep_spec, "report")).read_text())
        dataset = dataio.load_dataset(_require(sweep_spec, "dataset"))
        pipeline = _rebuild_pipeline(report)
        params = np.asarray(report.final_params)
        records = sorted(dataset.records, key=lambda r: r.sweep_value)
        amps = np.stack([r.amplitudes for r in records])
        probs = pipeline.probabilities(params, amps)
        pred_path = out_dir / "pred_prob.csv"
        if probs.shape[1] == 2:
            lines = ["sweep_value,p_class1"]
            lines += [
                f"{rec.sweep_value!r},{probs[i, 1]!r}" for i, rec in enumerate(records)
            ]
        else:
            header = "sweep_value," + ",".join(
                f"p_class{k}" for k in range(probs.shape[1])
            )
            lines = [header]
            for i, rec in enumerate(records):
                lines.append(
                    f"{rec.sweep_value!r},"
                    + ",".join(repr(float(p)) for p in probs[i])
                )
        pred_path.write_text("\n".join(lines) + "\n")
        written.append(pred_path)
    return written


_COMMANDS = {
    "analyze": cmd_analyze,
    "gen-data": cmd_gen_data,
    "train-phase": cmd_train_phase,
    "train-image": cmd_train_image,
    "vqe": cmd_vqe,
    "report": cmd_report,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tnvqc",
        description="Tensor-network variational circuit experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--dump-circuit", action="store_true")
        if name == "train-image":
            p.add_argument("--images", help="IDX images path (overrides config)")
            p.add_argument("--labels", help="IDX labels path (overrides config)")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = {}
        if args.config:
            config = json.loads(Path(args.config).read_text())
        if args.seed is not None:
            config["seed"] = args.seed
        if getattr(args, "images", None):
            config["images"] = args.images
        if getattr(args, "labels", None):
            config["labels"] = args.labels
        if args.command != "report" and "seed" not in config:
            raise ConfigError("config must carry an explicit seed (or pass --seed)")
        out_dir = Path(args.out)
        command = _COMMANDS[args.command]
        if args.command == "report":
            written = command(config, out_dir)
        else:
            written = command(config, out_dir, dump_circuit=args.dump_circuit)
        for path in written:
            print(path)
        return 0
    except (ConfigError, FileNotFoundError, dataio.FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
