"""Instance generation, labelling, JSON-lines persistence and splitting."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from glntsp.graph import Tour, TspInstance, canonicalize, distance_matrix, tour_length, tour_to_adjacency
from glntsp.solvers import HELD_KARP_MAX_N, SolverKind, solve_held_karp, two_opt_labeler

FORMAT_VERSION = 1
SIG_DIGITS = 9
MANIFEST_NAME = "manifest.json"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledSample:
    instance: TspInstance
    ref_tour: Tour
    ref_length: float
    target_adjacency: np.ndarray
    labeler: SolverKind

    @property
    def n(self) -> int:
        return self.instance.n

    def check(self, tol: float = 1e-9) -> None:
        """Raise ``DatasetError`` if the sample's derived fields are inconsistent."""
        if self.ref_tour.n != self.instance.n:
            raise DatasetError(f"tour has {self.ref_tour.n} nodes, instance has {self.instance.n}")
        if not np.array_equal(self.target_adjacency, tour_to_adjacency(self.ref_tour)):
            raise DatasetError("target adjacency does not match the reference tour")
        length = tour_length(self.ref_tour, distance_matrix(self.instance))
        if abs(length - self.ref_length) > tol:
            raise DatasetError(f"ref_length {self.ref_length} differs from tour length {length}")


@dataclass(frozen=True)
class DatasetSplit:
    train: float = 0.8
    validation: float = 0.1
    test: float = 0.1

    def __post_init__(self) -> None:
        fr = (self.train, self.validation, self.test)
        if any(not 0.0 <= f <= 1.0 for f in fr):
            raise DatasetError(f"split fractions must lie in [0, 1], got {fr}")
        if abs(sum(fr) - 1.0) > 1e-12:
            raise DatasetError(f"split fractions must sum to 1, got {sum(fr)}")

    def boundaries(self, total: int) -> tuple[int, int]:
        """End indices of the train and validation blocks."""
        n_train = round(self.train * total)
        n_val = min(round(self.validation * total), total - n_train)
        return n_train, n_train + n_val


@dataclass(frozen=True)
class GenConfig:
    sizes: tuple[int, ...]
    count_per_size: int
    seed: int = 0
    exact_threshold: int = HELD_KARP_MAX_N
    split: DatasetSplit = field(default_factory=DatasetSplit)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if not self.sizes:
            raise DatasetError("at least one size is required")
        if any(not 3 <= s <= 1024 for s in self.sizes):
            raise DatasetError(f"sizes must lie in 3..1024, got {self.sizes}")
        if self.count_per_size < 1:
            raise DatasetError("count_per_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DatasetError("seed must be an unsigned 64-bit integer")
        if self.exact_threshold > HELD_KARP_MAX_N:
            raise DatasetError(f"exact labelling is limited to n <= {HELD_KARP_MAX_N}")


def instance_rng(seed: int, size: int, index: int) -> np.random.Generator:
    """Independent stream for one instance, stable under any generation order."""
    return np.random.default_rng(np.random.SeedSequence([seed, size, index]))


def generate_instance(n: int, rng: np.random.Generator) -> TspInstance:
    if n < 3:
        raise DatasetError(f"n must be >= 3, got {n}")
    return TspInstance(rng.random((n, 2)))


def _round_sig(x: float, digits: int = SIG_DIGITS) -> float:
    return float(f"{x:.{digits}g}")


def quantize(instance: TspInstance) -> TspInstance:
    """Round coordinates to the precision the file format stores."""
    return TspInstance(np.vectorize(_round_sig)(instance.coords))


def label_instance(instance: TspInstance, exact_threshold: int = HELD_KARP_MAX_N) -> LabeledSample:
    D = distance_matrix(instance)
    if instance.n <= exact_threshold:
        tour, kind = solve_held_karp(D), SolverKind.HELD_KARP
    else:
        tour, kind = two_opt_labeler(D), SolverKind.TWO_OPT_REFINED
    return LabeledSample(instance, tour, tour_length(tour, D), tour_to_adjacency(tour), kind)


def sample_to_json(sample: LabeledSample) -> str:
    record = {
        "n": sample.n,
        "coords": [[_round_sig(x), _round_sig(y)] for x, y in sample.instance.coords.tolist()],
        "tour": list(sample.ref_tour.order),
        "len": _round_sig(sample.ref_length),
        "labeler": sample.labeler.value,
    }
    return json.dumps(record, separators=(",", ":"))


def sample_from_json(line: str) -> LabeledSample:
    record = json.loads(line)
    try:
        n = int(record["n"])
        instance = TspInstance(record["coords"])
        tour = canonicalize(record["tour"])
        stored_len = float(record["len"])
        labeler = SolverKind(record["labeler"])
    except KeyError as exc:
        raise DatasetError(f"missing field {exc}") from None
    if instance.n != n or tour.n != n:
        raise DatasetError(f"declared n={n} disagrees with coords/tour")
    if list(tour.order) != list(record["tour"]):
        raise DatasetError("tour is not stored in canonical form")
    length = tour_length(tour, distance_matrix(instance))
    # `len` carries 9 significant digits; the exact value is recomputed from coords
    if abs(length - stored_len) > 1e-8 * max(1.0, length):
        raise DatasetError(f"stored len {stored_len} disagrees with tour length {length}")
    return LabeledSample(instance, tour, length, tour_to_adjacency(tour), labeler)


def save_samples(samples: Iterable[LabeledSample], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in samples:
            f.write(sample_to_json(s) + "\n")


def _read_jsonl(path: Path) -> list[LabeledSample]:
    samples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                sample = sample_from_json(line)
                sample.check()
            except (ValueError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            samples.append(sample)
    return samples


def load_dataset(path: str | os.PathLike) -> list[LabeledSample]:
    """Load a ``.jsonl`` file, or every file listed in a dataset directory's manifest."""
    path = Path(path)
    if path.is_dir():
        manifest_path = path / MANIFEST_NAME
        if not manifest_path.exists():
            raise DatasetError(f"{path} has no {MANIFEST_NAME}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        samples = []
        for name in manifest["files"]:
            samples.extend(_read_jsonl(path / name))
        return samples
    if not path.exists():
        raise DatasetError(f"no such dataset: {path}")
    return _read_jsonl(path)


def split(
    samples: Sequence[LabeledSample], fractions: DatasetSplit = DatasetSplit(), seed: int = 0
) -> tuple[list[LabeledSample], list[LabeledSample], list[LabeledSample]]:
    """Seeded shuffle followed by a contiguous train/validation/test partition."""
    perm = np.random.default_rng(seed).permutation(len(samples))
    a, b = fractions.boundaries(len(samples))
    pick = lambda idx: [samples[i] for i in idx]  # noqa: E731
    return pick(perm[:a]), pick(perm[a:b]), pick(perm[b:])


def _make_sample(args: tuple[int, int, int, int]) -> str:
    seed, size, index, threshold = args
    instance = quantize(generate_instance(size, instance_rng(seed, size, index)))
    return sample_to_json(label_instance(instance, threshold))


def generate_dataset(config: GenConfig, out_dir: str | os.PathLike, threads: int = 1) -> dict:
    """Write ``tsp{n}.jsonl`` per size plus ``manifest.json``; return the manifest.

    Output is byte-identical for any ``threads`` value because every instance
    draws from its own (seed, size, index) stream and results are collected
    in index order.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create {out}: {exc}") from exc

    files, counts, labelers = [], {}, {}
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        for size in config.sizes:
            jobs = [(config.seed, size, i, config.exact_threshold) for i in range(config.count_per_size)]
            lines = list(pool.map(_make_sample, jobs, chunksize=8)) if pool else [_make_sample(j) for j in jobs]
            name = f"tsp{size}.jsonl"
            _atomic_write(out / name, "".join(line + "\n" for line in lines))
            files.append(name)
            counts[str(size)] = len(lines)
            kinds = [json.loads(line)["labeler"] for line in lines]
            labelers[str(size)] = {k: kinds.count(k) for k in sorted(set(kinds))}
    finally:
        if pool:
            pool.shutdown()

    total = sum(counts.values())
    train_end, val_end = config.split.boundaries(total)
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": config.seed,
        "sizes": list(config.sizes),
        "count_per_size": config.count_per_size,
        "split": asdict(config.split),
        "split_boundaries": {"train": [0, train_end], "validation": [train_end, val_end], "test": [val_end, total]},
        "exact_threshold": config.exact_threshold,
        "files": files,
        "counts": counts,
        "labelers": labelers,
        "total": total,
    }
    _atomic_write(out / MANIFEST_NAME, json.dumps(manifest, indent=2) + "\n")
    return manifest


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc


def n_of(samples: Sequence[LabeledSample]) -> int:
    """The common node count of ``samples``; raise if they are empty or mixed."""
    sizes = sorted({s.n for s in samples})
    if not sizes:
        raise DatasetError("empty sample list")
    if len(sizes) > 1:
        raise DatasetError(f"mixed instance sizes: {sizes}")
    return sizes[0]

