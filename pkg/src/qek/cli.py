"""Command-line interface: ``qek <subcommand> ...``.

Exit codes: 0 success, 1 failure inside a stage, 2 usage error,
3 unreadable input file or invalid configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as qio
from . import svm
from .alignment import TrainConfig, params_hash, train_alignment
from .config import ExperimentConfig
from .data import LabeledDataset, gen_checkerboard, gen_symmetric_donuts, load_mnist_pixels, mnist_task
from .embedding import AnsatzShape, random_parameters
from .kernel import ShotConfig, cross_kernel_matrix, kernel_matrix
from .pipeline import StageError, run_pipeline, sweep
from .postprocess import apply_strategy, enumerate_strategies, rank_strategies
from .simulator import NoiseModel

EXIT_STAGE = 1
EXIT_INPUT = 3


class InputError(Exception):
    pass


def _read_dataset(path, split="train") -> LabeledDataset:
    ds = LabeledDataset.from_csv(path, split)
    side = qio.read_sidecar(path)
    if side and side.get("dataset-id"):
        ds.dataset_id = side["dataset-id"]
    return ds


def _shape(args) -> AnsatzShape:
    return AnsatzShape(args.qubits, args.layers)


def _theta(args, shape):
    if getattr(args, "params", None):
        theta = qio.read_params(args.params)
        if theta.shape != (shape.num_params,):
            raise InputError(f"{args.params}: expected {shape.num_params} parameters, got {theta.size}")
        return theta
    return random_parameters(shape, np.random.default_rng(args.init_seed))


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.generator == "mnist":
        if not (args.images and args.labels):
            raise InputError("mnist needs --images and --labels")
        pools = load_mnist_pixels(args.images, args.labels, args.seed)
        splits = [mnist_task(pools, args.task, args.size, args.seed, "train"),
                  mnist_task(pools, args.task, args.size, args.seed + 1, "test")]
    else:
        gen = gen_checkerboard if args.generator == "checkerboard" else gen_symmetric_donuts
        splits = gen(args.seed)
    for ds in splits:
        path = out / f"{ds.split}.csv"
        ds.to_csv(path)
        qio.write_sidecar(path, {"dataset-id": ds.dataset_id, "seed": ds.seed, "split": ds.split,
                                 "n": len(ds)})
        print(f"wrote {path} ({len(ds)} points)")


def cmd_kernel(args):
    ds = _read_dataset(args.data)
    shape = _shape(args)
    theta = _theta(args, shape)
    noise = None if args.exact or args.noise is None else NoiseModel(args.noise)
    shots = None if args.exact or args.shots is None else ShotConfig(args.shots, args.shot_seed,
                                                                     args.measure_diagonal)
    if args.cross:
        cols = _read_dataset(args.cross)
        K = cross_kernel_matrix(ds.X, cols.X, theta, shape, noise, shots, args.threads or 1)
        np.savetxt(args.out, K, delimiter=",", fmt="%.17g")
        qio.write_sidecar(args.out, {"rows": ds.dataset_id, "cols": cols.dataset_id,
                                     "shape": list(K.shape), "theta-hash": params_hash(theta)})
    else:
        K = kernel_matrix(ds.X, theta, shape, noise, shots, args.measure_diagonal or None,
                          args.threads or 1)
        K.meta.update(dataset_id=ds.dataset_id, theta_hash=params_hash(theta))
        qio.write_kernel_matrix(args.out, K)
    print(f"wrote {args.out}")


def cmd_train(args):
    ds = _read_dataset(args.data)
    shape = _shape(args)
    theta0 = _theta(args, shape)
    cfg = TrainConfig(args.learning_rate, args.batch_size, args.iterations, args.fd_step, args.seed,
                      args.rescale, args.log_every)
    theta, hist = train_alignment(ds.X, ds.y, theta0, shape, cfg)
    qio.write_params(args.out, theta, initial=theta0.tolist(), theta_hash=params_hash(theta),
                     qubits=shape.num_qubits, layers=shape.num_layers)
    if args.history:
        hist.to_csv(args.history)
    last = hist.batch_alignment[-1] if len(hist) else float("nan")
    print(f"wrote {args.out} (final batch alignment {last:.4f})")


def cmd_postprocess(args):
    K = qio.read_kernel_matrix(args.matrix, num_qubits=args.qubits)
    n_qubits = K.meta.get("num_qubits")
    if n_qubits is None:
        raise InputError("number of qubits unknown: pass --qubits or supply a sidecar")
    if args.rank:
        if not args.reference:
            raise InputError("--rank needs --reference (the exact kernel matrix)")
        ref = qio.read_kernel_matrix(args.reference)
        if ref.n != K.n:
            raise InputError(f"reference is {ref.n}x{ref.n}, matrix is {K.n}x{K.n}")
        results = rank_strategies(K, ref, n_qubits, enumerate_strategies(), args.n_mean)
        qio.write_ranking(sys.stdout, results)
        if args.out:
            qio.write_ranking(args.out, results)
        return
    if not args.strategy:
        raise InputError("pass --strategy R1-M-R2 or --rank")
    post = apply_strategy(K, args.strategy, n_qubits, args.n_mean)
    if not args.out:
        raise InputError("--out is required with --strategy")
    qio.write_kernel_matrix(args.out, post)
    print(f"wrote {args.out} ({args.strategy})")


def cmd_svm(args):
    if args.action == "fit":
        K = qio.read_kernel_matrix(args.kernel)
        ds = _read_dataset(args.data)
        model = svm.fit(K.values, ds.y, args.C)
        model.save(args.model)
        print(f"wrote {args.model} ({len(model.support_indices)} support vectors)")
        return
    model = svm.SVMModel.load(args.model)
    K = np.loadtxt(args.kernel, delimiter=",", ndmin=2)
    pred = model.predict(K)
    if args.action == "predict":
        w = csv.writer(sys.stdout)
        w.writerow(["index", "decision", "label"])
        for i, (f, p) in enumerate(zip(model.decision_function(K), pred)):
            w.writerow([i, repr(float(f)), int(p)])
    else:
        ds = _read_dataset(args.data, "test")
        print(f"accuracy {svm.accuracy(pred, ds.y):.6f}")


def _config(args) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    except (ValueError, configparser.Error) as exc:
        raise InputError(f"{args.config}: {exc}") from exc
    if args.threads is not None:
        cfg = cfg.replace(threads=args.threads)
    return cfg


def cmd_sweep(args):
    cfg = _config(args)
    theta = qio.read_params(args.params) if args.params else None
    dataset = _read_dataset(args.data) if args.data else None
    out = args.out or cfg.directory
    rows = sweep(cfg, theta, dataset, out)
    print(f"wrote {Path(out) / 'sweep.csv'} ({len(rows)} cells)")


TABLE_COLUMNS = ["dataset", "qubits", "layers", "untrained_min", "untrained_max", "trained",
                 "strategy", "config_hash"]


def cmd_report(args):
    rows = []
    for d in args.inputs:
        path = Path(d) / "report.json" if Path(d).is_dir() else Path(d)
        with open(path) as fh:
            rep = json.load(fh)
        rows.append({k: rep[k] for k in TABLE_COLUMNS})
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()


def cmd_run(args):
    cfg = _config(args)
    rep = run_pipeline(cfg, args.out)
    print(f"untrained (min/max) {rep.untrained_min:.3f}/{rep.untrained_max:.3f}  "
          f"trained {rep.trained:.3f}  strategy {rep.strategy}")


# --------------------------------------------------------------------------
# parser


def _ansatz_args(p):
    p.add_argument("--qubits", type=int, default=5)
    p.add_argument("--layers", type=int, default=8)
    p.add_argument("--params", help="parameter JSON; random parameters otherwise")
    p.add_argument("--init-seed", type=int, default=0, help="seed for random parameters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qek", description="Quantum embedding kernel experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write dataset CSVs")
    p.add_argument("generator", choices=["checkerboard", "donuts", "mnist"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--images", help="MNIST IDX image file")
    p.add_argument("--labels", help="MNIST IDX label file")
    p.add_argument("--task", choices=["zero", "one"], default="zero")
    p.add_argument("--size", type=int, default=60)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("kernel", help="compute a kernel matrix")
    p.add_argument("--data", required=True)
    _ansatz_args(p)
    p.add_argument("--exact", action="store_true", help="noiseless analytic values")
    p.add_argument("--noise", type=float, help="base survival probability")
    p.add_argument("--shots", type=int)
    p.add_argument("--shot-seed", type=int, default=0)
    p.add_argument("--measure-diagonal", action="store_true")
    p.add_argument("--cross", help="column dataset for a rectangular matrix")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("train", help="alignment training")
    p.add_argument("--data", required=True)
    _ansatz_args(p)
    d = TrainConfig()
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--fd-step", type=float, default=d.fd_step)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--rescale", action="store_true")
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("postprocess", help="apply or rank mitigation/regularization strategies")
    p.add_argument("--matrix", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--strategy")
    g.add_argument("--rank", action="store_true")
    p.add_argument("--reference", help="exact kernel matrix for alignment and q")
    p.add_argument("--qubits", type=int)
    p.add_argument("--n-mean", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("svm", help="fit, predict or score an SVM")
    p.add_argument("action", choices=["fit", "predict", "score"])
    p.add_argument("--kernel", required=True, help="train kernel (fit) or test-by-train matrix")
    p.add_argument("--data", help="dataset CSV holding the labels")
    p.add_argument("--model", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.set_defaults(func=cmd_svm)

    p = sub.add_parser("sweep", help="base survival x shots study")
    p.add_argument("--config")
    p.add_argument("--params")
    p.add_argument("--data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="assemble run reports into a table")
    p.add_argument("inputs", nargs="+", help="run directories or report.json files")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be at least 1")
    if args.command == "svm" and args.action in ("fit", "score") and not args.data:
        parser.error(f"svm {args.action} needs --data")
    try:
        args.func(args)
    except StageError as exc:
        print(f"qek: error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return EXIT_STAGE
    except (InputError, OSError, KeyError) as exc:
        print(f"qek: error [{args.command}/input]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"qek: error [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
