"""End-to-end experiment: data, untrained baseline, training, kernel,
post-processing, SVM, evaluation; plus the noise/shots sweep."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as qio
from . import svm
from .alignment import matrix_alignment, params_hash, target_alignment, train_alignment
from .config import ExperimentConfig
from .data import LabeledDataset, gen_checkerboard, gen_symmetric_donuts
from .embedding import random_parameters
from .kernel import KernelMatrix, ShotConfig, _sample_matrix, cross_kernel_matrix, kernel_matrix
from .postprocess import apply_strategy, rank_strategies
from .simulator import NoiseModel

log = logging.getLogger(__name__)

GRID_SIZE = 100


class StageError(RuntimeError):
    """Failure inside a pipeline stage; ``stage`` names where."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


@dataclass
class Evaluation:
    accuracy: float
    alignment: float
    strategy: str
    train_kernel: KernelMatrix
    post_kernel: KernelMatrix
    test_kernel: np.ndarray
    model: svm.SVMModel
    ranking: list | None = None


@dataclass
class ExperimentReport:
    dataset: str
    qubits: int
    layers: int
    untrained_accuracies: list[float]
    selected_draw: int
    untrained_min: float
    untrained_max: float
    trained: float
    trained_alignment: float
    strategy: str
    config_hash: str
    artifacts: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def load_datasets(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset]:
    if cfg.generator == "checkerboard":
        return gen_checkerboard(cfg.data_seed)
    if cfg.generator == "donuts":
        return gen_symmetric_donuts(cfg.data_seed)
    train = LabeledDataset.from_csv(cfg.train_path, "train")
    test = LabeledDataset.from_csv(cfg.test_path, "test")
    return train, test


def _needs_diagonal(cfg: ExperimentConfig) -> bool:
    return cfg.base_survival is not None


def evaluate(cfg: ExperimentConfig, theta, train: LabeledDataset, test: LabeledDataset) -> Evaluation:
    """Kernel, post-processing, SVM fit and test accuracy for parameters ``theta``."""
    shape = cfg.shape
    noise = cfg.noise
    measure = _needs_diagonal(cfg)
    shots = cfg.shot_config(measure)
    with _stage("kernel"):
        K = kernel_matrix(train.X, theta, shape, noise, shots, measure, threads=cfg.threads)
        K.meta.update(dataset_id=train.dataset_id, theta_hash=params_hash(theta))
        test_shots = None if shots is None else ShotConfig(shots.shots, shots.seed + 1)
        K_test = cross_kernel_matrix(test.X, train.X, theta, shape, noise, test_shots, cfg.threads)
    ranking = None
    with _stage("postprocess"):
        strategy = cfg.strategy
        if strategy == "rank":
            K_exact = kernel_matrix(train.X, theta, shape)
            ranking = rank_strategies(K, K_exact, shape.num_qubits, n_mean=cfg.n_mean)
            if not ranking or not ranking[0].feasible:
                raise ValueError("no feasible post-processing strategy")
            strategy = str(ranking[0].strategy)
        K_post = apply_strategy(K, strategy, shape.num_qubits, cfg.n_mean)
        if strategy == "Id-Id-Id":
            # identity strategy: keep the raw values bit for bit
            K_post = KernelMatrix(K.values.copy(), "POST", K.shots, K.diagonal_measured, K_post.meta)
    with _stage("svm"):
        model = svm.fit(K_post.values, train.y, cfg.C)
        acc = svm.accuracy(model.predict(K_test), test.y)
    return Evaluation(acc, target_alignment(K_post.values, train.y), strategy, K, K_post, K_test,
                      model, ranking)


def decision_grid(cfg, theta, train, model, bounds=None) -> np.ndarray:
    """Decision-function values on a 100x100 mesh, rows (x1, x2, f)."""
    if bounds is None:
        lo = train.X.min(axis=0)
        hi = train.X.max(axis=0)
    else:
        lo, hi = np.asarray(bounds[0]), np.asarray(bounds[1])
    g1 = np.linspace(lo[0], hi[0], GRID_SIZE)
    g2 = np.linspace(lo[1], hi[1], GRID_SIZE)
    mesh = np.array([(a, b) for a in g1 for b in g2])
    # noiseless kernel: the mesh is for plotting, not for device estimates
    K = cross_kernel_matrix(mesh, train.X, theta, cfg.shape)
    return np.column_stack([mesh, model.decision_function(K)])


_BOUNDS = {"checkerboard": ((0.0, 0.0), (1.0, 1.0))}


def run_pipeline(cfg: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Run the full experiment; artifacts go to ``out_dir`` (default ``cfg.directory``)."""
    out = Path(out_dir if out_dir is not None else cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()
    artifacts = []

    def record(name):
        artifacts.append(name)
        return out / name

    cfg.save(record("config.ini"))

    with _stage("data"):
        train, test = load_datasets(cfg)
        for ds in (train, test):
            path = record(f"{ds.split}.csv")
            ds.to_csv(path)
            qio.write_sidecar(path, {"dataset-id": ds.dataset_id, "seed": ds.seed, "split": ds.split,
                                     "n": len(ds), "config-hash": chash})

    with _stage("untrained"):
        rng = np.random.default_rng(cfg.init_seed)
        draws = [random_parameters(cfg.shape, rng) for _ in range(cfg.untrained_draws)]
        untrained = [evaluate(cfg, th, train, test).accuracy for th in draws]
        pick = int(np.argmin(untrained))

    with _stage("train"):
        theta, hist = train_alignment(train.X, train.y, draws[pick], cfg.shape, cfg.train_config())
        hist.to_csv(record("history.csv"))
        qio.write_params(record("params.json"), theta, initial=draws[pick].tolist(),
                         untrained_draws=[d.tolist() for d in draws], selected_draw=pick,
                         theta_hash=params_hash(theta), config_hash=chash)

    ev = evaluate(cfg, theta, train, test)

    with _stage("output"):
        qio.write_kernel_matrix(record("kernel_train.csv"), ev.train_kernel, **{"config-hash": chash})
        qio.write_kernel_matrix(record("kernel_post.csv"), ev.post_kernel, **{"config-hash": chash})
        np.savetxt(record("kernel_test.csv"), ev.test_kernel, delimiter=",", fmt="%.17g")
        qio.write_sidecar(out / "kernel_test.csv", {
            "rows": "test", "cols": "train", "shape": list(ev.test_kernel.shape),
            "theta-hash": params_hash(theta), "config-hash": chash})
        ev.model.save(record("model.json"))
        if ev.ranking is not None:
            qio.write_ranking(record("ranking.csv"), ev.ranking)
        if cfg.decision_grid:
            grid = decision_grid(cfg, theta, train, ev.model, _BOUNDS.get(train.dataset_id))
            path = record("decision_grid.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x1", "x2", "decision"])
                w.writerows([[repr(float(v)) for v in row] for row in grid])
            qio.write_sidecar(path, {"config-hash": chash, "theta-hash": params_hash(theta)})

        report = ExperimentReport(
            dataset=train.dataset_id, qubits=cfg.qubits, layers=cfg.layers,
            untrained_accuracies=untrained, selected_draw=pick,
            untrained_min=float(min(untrained)), untrained_max=float(max(untrained)),
            trained=ev.accuracy, trained_alignment=ev.alignment, strategy=ev.strategy,
            config_hash=chash, artifacts=artifacts + ["report.json"],
        )
        with open(out / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        for name in report.artifacts:
            if qio.read_sidecar(out / name) is None:
                qio.write_sidecar(out / name, {"config-hash": chash})
    return report


# --------------------------------------------------------------------------
# sweep


SWEEP_COLUMNS = ["base_survival", "shots", "best_strategy", "alignment", "q", "raw_alignment",
                 "n_feasible"]


def stratified_subset(ds: LabeledDataset, size: int) -> LabeledDataset:
    """First ``size / 2`` points of each class, in dataset order."""
    pos = np.flatnonzero(ds.y > 0)[: size // 2]
    neg = np.flatnonzero(ds.y < 0)[: size - size // 2]
    return ds.subset(np.sort(np.concatenate([pos, neg])))


def sweep(cfg: ExperimentConfig, theta=None, dataset: LabeledDataset | None = None,
          out_dir=None) -> list[dict]:
    """Best strategy and its q for every (base survival, shots) cell."""
    with _stage("data"):
        if dataset is None:
            dataset = load_datasets(cfg)[0]
        sub = stratified_subset(dataset, cfg.sweep_points)
        if theta is None:
            theta = random_parameters(cfg.shape, np.random.default_rng(cfg.init_seed))
    shape = cfg.shape
    with _stage("kernel"):
        K_exact = kernel_matrix(sub.X, theta, shape)
    rows, rankings = [], {}
    for lam in cfg.sweep_survivals:
        with _stage("kernel"):
            P = kernel_matrix(sub.X, theta, shape, NoiseModel(lam), measure_diagonal=True,
                              threads=cfg.threads)
        for M in cfg.sweep_shots:
            with _stage("kernel"):
                K_dev = _resample(P, M, cfg.shot_seed)
            with _stage("postprocess"), warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ranking = rank_strategies(K_dev, K_exact, shape.num_qubits, n_mean=cfg.n_mean)
            rankings[(lam, M)] = ranking
            best = ranking[0]
            rows.append({
                "base_survival": lam, "shots": M, "best_strategy": str(best.strategy),
                "alignment": best.alignment, "q": best.q,
                "raw_alignment": matrix_alignment(K_dev, K_exact),
                "n_feasible": sum(r.feasible for r in ranking),
            })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep(out / "sweep.csv", rows)
        qio.write_sidecar(out / "sweep.csv", {"config-hash": cfg.config_hash(),
                                             "theta-hash": params_hash(theta),
                                             "dataset-id": sub.dataset_id, "n": len(sub)})
        for (lam, M), ranking in rankings.items():
            qio.write_ranking(out / f"ranking_l{lam}_M{M}.csv", ranking)
    return rows


def _resample(P: KernelMatrix, M: int, seed: int) -> KernelMatrix:
    cfg = ShotConfig(int(M), int(np.random.SeedSequence([seed, M]).generate_state(1, np.uint64)[0]))
    values, n_clamped = _sample_matrix(P.values, cfg, with_diagonal=True)
    return KernelMatrix(values, "SAMPLED", int(M), True,
                        {**P.meta, "seed": cfg.seed, "n_clamped": n_clamped})


def write_sweep(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
