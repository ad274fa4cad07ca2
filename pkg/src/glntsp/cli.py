"""Command-line entry point: ``glntsp {gen,train,eval,bench,solve}``.

Each command reads its settings from built-in defaults, then an optional
flat JSON ``--config`` file, then explicit flags, in that order of priority.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from glntsp.dataset import DatasetError, DatasetSplit, GenConfig, generate_dataset, instance_rng, load_dataset, split
from glntsp.evaluate import evaluate_predictions, opt_gap
from glntsp.gln.checkpoint import load_checkpoint, save_checkpoint
from glntsp.gln.loss import LossConfig
from glntsp.gln.model import GlnConfig, ModelError
from glntsp.gln.train import TrainConfig, TrainError, predict, train, write_history
from glntsp.graph import TspInstance, distance_matrix, tour_length
from glntsp.solvers import HELD_KARP_MAX_N, SolverError, SolverKind, solve

log = logging.getLogger("glntsp")


class CliError(Exception):
    pass


DEFAULTS = {
    "gen": {
        "sizes": "10", "count": 1000, "seed": 0, "out": "data", "threads": None,
        "exact_threshold": HELD_KARP_MAX_N, "split": "0.8,0.1,0.1", "verify": False,
    },
    "train": {
        "data": "data", "out": "runs", "seed": 0, "split": "0.8,0.1,0.1",
        "hidden": 32, "kernels": 3, "layers": 3, "p": None, "init_mode": "aleatory",
        "normalization": "symmetric", "features": "xy", "m_init": "glorot",
        "psi_hed": 1.0, "psi_iou": 1.0, "eps": 1e-7,
        "lr": 1e-3, "batch_size": 50, "epochs": 100, "patience": 10,
    },
    "eval": {
        "checkpoint": None, "data": "data", "out": "eval", "seed": 0, "split": "0.8,0.1,0.1",
        "subset": "test", "threshold": 0.5,
    },
    "bench": {
        "n": 20, "count": 1000, "seed": 0, "out": None, "threads": None,
        "solvers": "held_karp,nearest_neighbor,nearest_insertion,random_insertion,farthest_insertion,two_opt_refined",
    },
    "solve": {"solver": "held_karp", "coords": None, "n": 10, "seed": 0},
}


def _fractions(text: str) -> DatasetSplit:
    parts = [float(x) for x in str(text).split(",")]
    if len(parts) != 3:
        raise CliError(f"--split needs three comma-separated fractions, got {text!r}")
    return DatasetSplit(*parts)


def _settings(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise CliError(f"unknown keys in {args.config}: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in DEFAULTS[command]:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    return cfg


def _write_effective(out: Path, command: str, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{command}_config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _threads(value) -> int:
    return int(value) if value else (os.cpu_count() or 1)


def cmd_gen(cfg: dict) -> int:
    out = Path(cfg["out"])
    if cfg["verify"]:
        samples = load_dataset(out)
        sizes = {}
        for s in samples:
            sizes[s.n] = sizes.get(s.n, 0) + 1
        for n, c in sorted(sizes.items()):
            print(f"n={n}: {c} samples ok")
        print(f"verified {len(samples)} samples")
        return 0
    gen = GenConfig(
        sizes=tuple(int(s) for s in str(cfg["sizes"]).split(",")),
        count_per_size=int(cfg["count"]),
        seed=int(cfg["seed"]),
        exact_threshold=int(cfg["exact_threshold"]),
        split=_fractions(cfg["split"]),
    )
    manifest = generate_dataset(gen, out, threads=_threads(cfg["threads"]))
    for size in gen.sizes:
        kinds = ", ".join(f"{k}={v}" for k, v in manifest["labelers"][str(size)].items())
        print(f"n={size}: {manifest['counts'][str(size)]} samples ({kinds})")
    print(f"total {manifest['total']} samples -> {out}")
    return 0


def _gln_config(cfg: dict, n: int) -> GlnConfig:
    return GlnConfig(
        n=n, h=int(cfg["hidden"]), k=int(cfg["kernels"]), L=int(cfg["layers"]),
        p=None if cfg["p"] is None else float(cfg["p"]),
        init_mode=cfg["init_mode"], adjacency_normalization=cfg["normalization"],
        features=cfg["features"], m_init=cfg["m_init"],
    )


def cmd_train(cfg: dict) -> int:
    if int(cfg["epochs"]) < 1:
        raise CliError("--epochs must be at least 1")
    samples = load_dataset(cfg["data"])
    sizes = sorted({s.n for s in samples})
    if len(sizes) != 1:
        raise CliError(f"training needs a single instance size, dataset has sizes {sizes}")
    n = sizes[0]
    tr, va, _ = split(samples, _fractions(cfg["split"]), int(cfg["seed"]))
    gln_cfg = _gln_config(cfg, n)
    loss_cfg = LossConfig(float(cfg["psi_hed"]), float(cfg["psi_iou"]), float(cfg["eps"]))
    train_cfg = TrainConfig(
        lr=float(cfg["lr"]), batch_size=int(cfg["batch_size"]), max_epochs=int(cfg["epochs"]),
        patience=int(cfg["patience"]), seed=int(cfg["seed"]),
    )
    params, history = train(tr, va, gln_cfg, loss_cfg, train_cfg)
    out = Path(cfg["out"])
    _write_effective(out, "train", cfg)
    ckpt = out / f"gln_tsp{n}.json"
    save_checkpoint(params, ckpt)
    write_history(history, out / "history.csv")
    best = min(history, key=lambda r: r.val_loss)
    print(f"trained GLN-TSP{n} on {len(tr)} samples, {len(history)} epochs; "
          f"best val loss {best.val_loss:.6f} (epoch {best.epoch}, f1 {best.val_f1:.4f}) -> {ckpt}")
    return 0


def cmd_eval(cfg: dict) -> int:
    if not cfg["checkpoint"]:
        raise CliError("--checkpoint is required")
    params = load_checkpoint(cfg["checkpoint"])
    samples = load_dataset(cfg["data"])
    if cfg["subset"] == "test":
        samples = split(samples, _fractions(cfg["split"]), int(cfg["seed"]))[2]
    elif cfg["subset"] != "all":
        raise CliError(f"--subset must be 'test' or 'all', got {cfg['subset']!r}")
    if not samples:
        raise CliError("no samples to evaluate")
    sizes = sorted({s.n for s in samples})
    if sizes != [params.config.n]:
        raise CliError(f"checkpoint is for n={params.config.n}, test set has sizes {sizes}")
    probs = predict(params, samples, seed=int(cfg["seed"]))
    report = evaluate_predictions(probs, samples, float(cfg["threshold"]))
    out = Path(cfg["out"])
    _write_effective(out, "eval", cfg)
    report.write(out)
    s = report.summary()
    print(json.dumps(s, indent=2))
    print(f"f1 {s['f1']:.4f}  tour len {s['mean_tour_len']:.4f}  opt gap {100 * s['opt_gap']:.2f}%", file=sys.stderr)
    return 0


def _bench_one(job: tuple[int, int, int, tuple[str, ...]]) -> dict[str, float]:
    seed, n, index, solvers = job
    D = distance_matrix(TspInstance(instance_rng(seed, n, index).random((n, 2))))
    rng = np.random.default_rng([seed, n, index, 1])
    return {name: tour_length(solve(D, name, rng=rng), D) for name in solvers}


def cmd_bench(cfg: dict) -> int:
    n, count, seed = int(cfg["n"]), int(cfg["count"]), int(cfg["seed"])
    solvers = tuple(s.strip() for s in str(cfg["solvers"]).split(",") if s.strip())
    for name in solvers:
        try:
            SolverKind(name)
        except ValueError:
            raise CliError(f"unknown solver {name!r}") from None
    if n > HELD_KARP_MAX_N:
        solvers = tuple(s for s in solvers if s not in ("held_karp", "brute_force"))
    jobs = [(seed, n, i, solvers) for i in range(count)]
    threads = _threads(cfg["threads"])
    if threads > 1:
        with ProcessPoolExecutor(threads) as pool:
            rows = list(pool.map(_bench_one, jobs, chunksize=16))
    else:
        rows = [_bench_one(j) for j in jobs]

    exact = "held_karp" in solvers or "brute_force" in solvers
    ref_name = ("held_karp" if "held_karp" in solvers else "brute_force") if exact else "best heuristic"
    refs = [row[ref_name] if exact else min(row.values()) for row in rows]
    table = {
        name: {"mean_len": float(np.mean([r[name] for r in rows])), "opt_gap": opt_gap([r[name] for r in rows], refs)}
        for name in solvers
    }
    print(f"TSP{n}, {count} instances, seed {seed}; gap vs {ref_name}")
    print(f"{'solver':<22}{'tour len':>10}{'opt gap':>10}")
    for name, row in table.items():
        print(f"{name:<22}{row['mean_len']:>10.4f}{100 * row['opt_gap']:>9.2f}%")
    if cfg["out"]:
        out = Path(cfg["out"])
        _write_effective(out, "bench", cfg)
        result = {"n": n, "count": count, "seed": seed, "reference": ref_name, "solvers": table}
        (out / "bench.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_solve(cfg: dict) -> int:
    if cfg["coords"]:
        raw = json.loads(Path(cfg["coords"]).read_text(encoding="utf-8"))
        instance = TspInstance(raw["coords"] if isinstance(raw, dict) else raw)
    else:
        n = int(cfg["n"])
        instance = TspInstance(instance_rng(int(cfg["seed"]), n, 0).random((n, 2)))
    D = distance_matrix(instance)
    try:
        kind = SolverKind(cfg["solver"])
    except ValueError:
        raise CliError(f"unknown solver {cfg['solver']!r}") from None
    tour = solve(D, kind, rng=np.random.default_rng(int(cfg["seed"])))
    print(json.dumps({"n": instance.n, "solver": kind.value, "tour": list(tour.order), "len": tour_length(tour, D)}))
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench, "solve": cmd_solve}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glntsp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat JSON file of settings; flags override it")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("gen", help="generate and label a dataset")
    common(p)
    p.add_argument("--sizes", help="comma-separated node counts, e.g. 10,20")
    p.add_argument("--count", type=int, help="instances per size")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--exact-threshold", type=int, dest="exact_threshold")
    p.add_argument("--split", help="train,validation,test fractions")
    p.add_argument("--verify", action="store_true", help="reload --out and check every sample")

    p = sub.add_parser("train", help="train a GLN model on a single-size dataset")
    common(p)
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--split")
    p.add_argument("--hidden", type=int)
    p.add_argument("--kernels", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--p", type=float, help="edge probability of the aleatory start adjacency")
    p.add_argument("--init-mode", dest="init_mode", choices=("aleatory", "identity"))
    p.add_argument("--normalization", choices=("symmetric", "raw"))
    p.add_argument("--features", choices=("xy", "xy1"))
    p.add_argument("--m-init", dest="m_init", choices=("glorot", "identity"))
    p.add_argument("--psi-hed", dest="psi_hed", type=float)
    p.add_argument("--psi-iou", dest="psi_iou", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--threads", type=int, help="accepted for symmetry; training is single-threaded")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--split")
    p.add_argument("--subset", choices=("test", "all"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("bench", help="benchmark exact and heuristic solvers on fresh instances")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--solvers")
    p.add_argument("--out")
    p.add_argument("--threads", type=int)

    p = sub.add_parser("solve", help="solve one instance and print the tour")
    common(p)
    p.add_argument("--solver")
    p.add_argument("--coords", help="JSON file: list of [x, y] or a dataset record")
    p.add_argument("--n", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _settings(args.command, args)
        return COMMANDS[args.command](cfg)
    except (CliError, DatasetError, ModelError, SolverError, TrainError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
