"""Command-line pipeline: prepare -> train-teacher -> distill -> attack ->
evaluate -> report.

Every stage writes a manifest carrying the hash of its resolved
configuration; rerunning a completed stage with an unchanged configuration
is a no-op. Flags override config-file values, and the fully resolved
configuration is echoed into the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .attack import BETA_GRID, AttackConfig, beta_grid_search, generate, make_attack_run
from .data import Dataset, load_ucr, preprocess_dataset, remap_labels, save_ucr, stratified_split
from .distill import DistillConfig, teacher_outputs, train_student
from .evaluate import (
    count_adversaries_labeled,
    count_adversaries_unlabeled,
    generalization_eval,
    load_reports_json,
    pairwise_wilcoxon,
    save_reports_csv,
    save_reports_json,
)
from .models import ArchitectureConfig, TrainConfig, build_fcn, build_lenet5_1d, train_classifier
from .nn import load_model, save_model
from .synthetic import make_bump_dataset
from .teachers import DTW1NNTeacher, FCNTeacher
from .util import config_hash

UCR_ROOT_ENV = "TSADV_UCR_ROOT"
DELIMITERS = {"tab": "\t", "comma": ",", "space": " "}

# sensor / ECG / EOG / hemodynamics datasets of the 2018 archive, the slice
# where an adversarial attack is a plausible security concern
DEFAULT_BATCH_DATASETS = (
    "Car", "ChlorineConcentration", "CinCECGTorso", "Earthquakes", "ECG200",
    "ECG5000", "ECGFiveDays", "FordA", "FordB", "InsectWingbeatSound",
    "ItalyPowerDemand", "Lightning2", "Lightning7", "MoteStrain",
    "NonInvasiveFetalECGThorax1", "NonInvasiveFetalECGThorax2", "Phoneme",
    "Plane", "SonyAIBORobotSurface1", "SonyAIBORobotSurface2",
    "StarLightCurves", "Trace", "TwoLeadECG", "Wafer", "AllGestureWiimoteX",
    "AllGestureWiimoteY", "AllGestureWiimoteZ", "DodgerLoopDay",
    "DodgerLoopGame", "DodgerLoopWeekend", "EOGHorizontalSignal",
    "EOGVerticalSignal", "FreezerRegularTrain", "FreezerSmallTrain", "Fungi",
    "GesturePebbleZ1", "GesturePebbleZ2", "PickupGestureWiimoteZ",
    "PigAirwayPressure", "PigArtPressure", "PigCVP", "ShakeGestureWiimoteZ",
)


class MissingArtifactError(FileNotFoundError):
    pass


def _stage_dir(out: str, stage: str) -> str:
    path = os.path.join(out, stage)
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


def _read_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


_STAGE_COMMANDS = {"prepare": "prepare", "teacher": "train-teacher", "student": "distill",
                   "attack": "attack", "reports": "evaluate"}


def _load_manifest(out: str, stage: str, needed_by: str) -> dict:
    path = os.path.join(out, stage, "manifest.json")
    if not os.path.exists(path):
        command = _STAGE_COMMANDS[stage]
        raise MissingArtifactError(
            f"{needed_by} needs the {stage} stage; run `tsadv {command}` first (missing {path})")
    return _read_json(path)


def _stage_is_current(out: str, stage: str, cfg_hash: str) -> bool:
    path = os.path.join(out, stage, "manifest.json")
    if os.path.exists(path) and _read_json(path).get("config_hash") == cfg_hash:
        print(f"[{stage}] up to date (config {cfg_hash}), skipping")
        return True
    return False


def _echo_config(out: str, stage: str, cfg: dict) -> None:
    path = os.path.join(out, "config.json")
    merged = _read_json(path) if os.path.exists(path) else {}
    merged[stage] = cfg
    _write_json(path, merged)


def _resolve_files(args) -> tuple[str, str]:
    if args.train_file and args.test_file:
        return args.train_file, args.test_file
    if args.dataset:
        root = os.environ.get(UCR_ROOT_ENV)
        if not root:
            raise MissingArtifactError(
                f"--dataset needs the archive root; set {UCR_ROOT_ENV} or pass --train-file/--test-file")
        base = os.path.join(root, args.dataset, args.dataset)
        return base + "_TRAIN.tsv", base + "_TEST.tsv"
    raise MissingArtifactError("pass --train-file and --test-file, or --dataset with the archive root set")


def cmd_prepare(args) -> int:
    out = args.out
    if args.synthetic:
        teacher_train = make_bump_dataset(n_per_class=32, length=32, seed=args.seed_split + 100,
                                          name="bumps-train")
        pool = make_bump_dataset(n_per_class=64, length=32, seed=args.seed_split + 200,
                                 name="bumps")
        dataset_name = "bumps"
    else:
        train_file, test_file = _resolve_files(args)
        for path in (train_file, test_file):
            if not os.path.exists(path):
                raise MissingArtifactError(f"data file not found: {path}")
        delimiter = DELIMITERS[args.delimiter]
        teacher_train = remap_labels(load_ucr(train_file, delimiter))
        pool = remap_labels(load_ucr(test_file, delimiter))
        target_len = max(max(len(s) for s in teacher_train.series),
                         max(len(s) for s in pool.series))
        teacher_train = preprocess_dataset(teacher_train, target_len, znorm=args.znorm)
        pool = preprocess_dataset(pool, target_len, znorm=args.znorm)
        dataset_name = os.path.basename(args.dataset or os.path.dirname(train_file) or "dataset")
    cfg = {"dataset": dataset_name, "seed_split": args.seed_split, "znorm": args.znorm,
           "synthetic": args.synthetic, "length": teacher_train.length,
           "files": None if args.synthetic else [os.path.abspath(train_file),
                                                 os.path.abspath(test_file)]}
    cfg_hash = config_hash(cfg)
    if _stage_is_current(out, "prepare", cfg_hash):
        return 0
    split = stratified_split(pool, seed=args.seed_split)
    stage = _stage_dir(out, "prepare")
    save_ucr(teacher_train, os.path.join(stage, "teacher_train.tsv"))
    save_ucr(split.d_eval, os.path.join(stage, "d_eval.tsv"))
    save_ucr(split.d_test, os.path.join(stage, "d_test.tsv"))

    def class_counts(ds: Dataset) -> dict:
        return {int(c): int(n) for c, n in zip(*np.unique(ds.labels, return_counts=True))}

    manifest = {
        "config_hash": cfg_hash, "config": cfg,
        "num_classes": pool.num_classes,
        "label_map": {str(k): v for k, v in pool.label_map.items()},
        "counts": {"teacher_train": len(teacher_train), "d_eval": len(split.d_eval),
                   "d_test": len(split.d_test)},
        "class_counts": {"d_eval": class_counts(split.d_eval),
                         "d_test": class_counts(split.d_test)},
    }
    _write_json(os.path.join(stage, "manifest.json"), manifest)
    _echo_config(out, "prepare", cfg)
    print(f"[prepare] {dataset_name}: train={len(teacher_train)} "
          f"d_eval={len(split.d_eval)} d_test={len(split.d_test)}")
    return 0


def _load_split(out: str, which: str, needed_by: str) -> Dataset:
    manifest = _load_manifest(out, "prepare", needed_by)
    loaded = remap_labels(load_ucr(os.path.join(out, "prepare", f"{which}.tsv")))
    # file basenames are stage-local; reports must carry the dataset's name
    return Dataset(name=manifest["config"]["dataset"], series=loaded.series,
                   label_map=loaded.label_map)


def cmd_train_teacher(args) -> int:
    out = args.out
    prep = _load_manifest(out, "prepare", "train-teacher")
    cfg = {"teacher": args.teacher, "seed_teacher": args.seed_teacher, "epochs": args.epochs,
           "batch_size": args.batch_size, "lr": args.lr, "early_stop_acc": args.early_stop_acc,
           "prepare": prep["config_hash"]}
    cfg_hash = config_hash(cfg)
    if _stage_is_current(out, "teacher", cfg_hash):
        return 0
    stage = _stage_dir(out, "teacher")
    train_set = _load_split(out, "teacher_train", "train-teacher")
    manifest = {"config_hash": cfg_hash, "config": cfg, "teacher_kind": args.teacher}
    if args.teacher == "fcn":
        model = build_fcn(ArchitectureConfig(input_length=train_set.length,
                                             num_classes=train_set.num_classes,
                                             architecture="fcn", seed=args.seed_teacher))
        train_classifier(model, train_set, TrainConfig(
            epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
            seed=args.seed_teacher, early_stop_acc=args.early_stop_acc))
        save_model(model, os.path.join(stage, "fcn.npz"))
        manifest["train_accuracy"] = model.training_log[-1]["accuracy"]
        manifest["epochs_run"] = len(model.training_log)
        manifest["state_hash"] = model.state_hash()
    else:
        # the 1-NN DTW teacher *is* its reference set
        manifest["reference"] = "prepare/teacher_train.tsv"
    _write_json(os.path.join(stage, "manifest.json"), manifest)
    _echo_config(out, "teacher", cfg)
    print(f"[train-teacher] {args.teacher} ready"
          + (f", train acc {manifest.get('train_accuracy'):.3f}" if args.teacher == "fcn" else ""))
    return 0


def _load_teacher(out: str, needed_by: str):
    manifest = _load_manifest(out, "teacher", needed_by)
    kind = manifest["teacher_kind"]
    if kind == "fcn":
        model = load_model(os.path.join(out, "teacher", "fcn.npz"))
        return FCNTeacher(model), model
    train_set = _load_split(out, "teacher_train", needed_by)
    return DTW1NNTeacher.from_dataset(train_set), None


def cmd_distill(args) -> int:
    out = args.out
    teacher_manifest = _load_manifest(out, "teacher", "distill")
    gamma = args.gamma if args.gamma is not None else (0.5 if args.box == "white" else 1.0)
    cfg = {"box": args.box, "gamma": gamma, "tau": args.tau, "seed_student": args.seed_student,
           "epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
           "teacher": teacher_manifest["config_hash"]}
    cfg_hash = config_hash(cfg)
    if _stage_is_current(out, "student", cfg_hash):
        return 0
    stage = _stage_dir(out, "student")
    teacher, _ = _load_teacher(out, "distill")
    d_eval = _load_split(out, "d_eval", "distill")
    mode = "soft" if args.box == "white" else "hard"
    outputs = teacher_outputs(teacher, d_eval.values, mode=mode)
    np.savez(os.path.join(stage, "teacher_outputs.npz"),
             mode=np.array(mode), hard_labels=outputs.hard_labels,
             **({"soft_probs": outputs.soft_probs} if outputs.soft_probs is not None else {}))
    student = build_lenet5_1d(ArchitectureConfig(
        input_length=d_eval.length, num_classes=teacher.num_classes,
        architecture="lenet5", seed=args.seed_student))
    config = DistillConfig(gamma=gamma, tau=args.tau, epochs=args.epochs,
                           batch_size=args.batch_size, lr=args.lr, seed=args.seed_student)
    train_student(student, d_eval.values, outputs, config)
    save_model(student, os.path.join(stage, "student.npz"))
    fidelity = student.training_log[-1]["best_fidelity"]
    _write_json(os.path.join(stage, "manifest.json"),
                {"config_hash": cfg_hash, "config": cfg, "mode": mode,
                 "fidelity": fidelity, "state_hash": student.state_hash()})
    _echo_config(out, "student", cfg)
    print(f"[distill] student fidelity {fidelity:.3f} ({mode} targets)")
    return 0


def _surrogate_for(out: str, box: str, teacher_kind: str, needed_by: str):
    teacher, teacher_model = _load_teacher(out, needed_by)
    if box == "white" and teacher_kind == "fcn":
        return teacher, teacher_model, None
    _load_manifest(out, "student", needed_by)
    student = load_model(os.path.join(out, "student", "student.npz"))
    return teacher, teacher_model, student


def cmd_attack(args) -> int:
    out = args.out
    teacher_manifest = _load_manifest(out, "teacher", "attack")
    if teacher_manifest["teacher_kind"] != args.teacher:
        raise MissingArtifactError(
            f"teacher stage trained {teacher_manifest['teacher_kind']!r}; rerun train-teacher "
            f"for {args.teacher!r}")
    betas = list(BETA_GRID) if args.beta_grid else [args.beta]
    cfg = {"box": args.box, "teacher": args.teacher, "alpha": args.alpha, "betas": betas,
           "target_class": args.target_class, "seed_gatn": args.seed_gatn,
           "epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
           "teacher_hash": teacher_manifest["config_hash"]}
    cfg_hash = config_hash(cfg)
    if _stage_is_current(out, "attack", cfg_hash):
        return 0
    stage = _stage_dir(out, "attack")
    teacher, teacher_model, student = _surrogate_for(out, args.box, args.teacher, "attack")
    d_eval = _load_split(out, "d_eval", "attack")
    base = AttackConfig(box_mode=args.box, teacher_kind=args.teacher, alpha=args.alpha,
                        beta=betas[0], target_class=args.target_class, seed=args.seed_gatn,
                        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr)
    provenance = {"dataset": d_eval.name, "out": out}
    runs, reports, best = beta_grid_search(base, d_eval, teacher, teacher_model=teacher_model,
                                           student=student, betas=tuple(betas),
                                           provenance=provenance)
    gatn_files = []
    for run, beta in zip(runs, betas):
        fname = f"gatn_beta_{beta:.0e}.npz"
        save_model(run.gatn, os.path.join(stage, fname))
        gatn_files.append(fname)
    save_reports_json(reports, os.path.join(stage, "grid_reports.json"), provenance=provenance)
    _write_json(os.path.join(stage, "manifest.json"), {
        "config_hash": cfg_hash, "config": cfg, "betas": betas, "gatn_files": gatn_files,
        "best_index": best, "best_beta": betas[best],
        "surrogate_is_teacher": runs[best].surrogate_is_teacher,
        "gatn_state_hashes": [run.gatn.state_hash() for run in runs],
    })
    _echo_config(out, "attack", cfg)
    print(f"[attack] best beta {betas[best]:.0e}: "
          f"{reports[best].num_adversaries}/{reports[best].n_evaluated} d_eval adversaries")
    return 0


def cmd_evaluate(args) -> int:
    out = args.out
    attack_manifest = _load_manifest(out, "attack", "evaluate")
    acfg = attack_manifest["config"]
    teacher, teacher_model, student = _surrogate_for(out, acfg["box"], acfg["teacher"], "evaluate")
    d_eval = _load_split(out, "d_eval", "evaluate")
    d_test = _load_split(out, "d_test", "evaluate")
    betas = attack_manifest["betas"]
    indices = range(len(betas)) if args.all_betas else [attack_manifest["best_index"]]
    count = count_adversaries_unlabeled if args.criterion == "unlabeled" else count_adversaries_labeled
    reports = []
    for i in indices:
        config = AttackConfig(box_mode=acfg["box"], teacher_kind=acfg["teacher"],
                              alpha=acfg["alpha"], beta=betas[i],
                              target_class=acfg["target_class"], seed=acfg["seed_gatn"])
        run = make_attack_run(config, input_length=d_eval.length, teacher_model=teacher_model,
                              student=student)
        run.gatn = load_model(os.path.join(out, "attack", attack_manifest["gatn_files"][i]))
        x = d_eval.values
        x_hat, _, _ = generate(run, x)
        kwargs = dict(dataset=d_eval.name, box_mode=config.box_mode,
                      teacher_kind=config.teacher_kind, beta=betas[i], split="d_eval")
        if args.criterion == "unlabeled":
            reports.append(count(teacher, x, x_hat, **kwargs))
        else:
            reports.append(count(teacher, x, x_hat, d_eval.labels, **kwargs))
        if args.criterion == "labeled":
            reports.append(generalization_eval(run, teacher, d_test))
        else:
            xt = d_test.values
            xt_hat, _, _ = generate(run, xt)
            reports.append(count(teacher, xt, xt_hat, dataset=d_test.name,
                                 box_mode=config.box_mode, teacher_kind=config.teacher_kind,
                                 beta=betas[i], split="d_test"))
    stage = _stage_dir(out, "reports")
    save_reports_csv(reports, os.path.join(stage, "reports.csv"))
    save_reports_json(reports, os.path.join(stage, "reports.json"),
                      provenance={"out": out, "criterion": args.criterion})
    _write_json(os.path.join(stage, "manifest.json"),
                {"config_hash": config_hash({"attack": attack_manifest["config_hash"],
                                             "criterion": args.criterion,
                                             "all_betas": args.all_betas}),
                 "n_reports": len(reports)})
    for r in reports:
        print(f"[evaluate] {r.split:7s} beta={r.beta:.0e} criterion={r.criterion}: "
              f"{r.num_adversaries}/{r.n_evaluated} adversaries, mse_all={r.mse_all:.4f}")
    return 0


def cmd_report(args) -> int:
    all_reports = []
    for run_dir in args.runs:
        path = os.path.join(run_dir, "reports", "reports.json")
        if not os.path.exists(path):
            raise MissingArtifactError(f"no reports in {run_dir}; run `tsadv evaluate` first")
        reports, _ = load_reports_json(path)
        all_reports.extend(reports)
    os.makedirs(args.out, exist_ok=True)
    save_reports_csv(all_reports, os.path.join(args.out, "report.csv"))
    save_reports_json(all_reports, os.path.join(args.out, "report.json"),
                      provenance={"runs": list(args.runs)})

    def variant(r) -> str:
        return f"{r.box_mode}-{r.teacher_kind}"

    for split, tag in (("d_eval", "counts"), ("d_test", "generalization")):
        rows = [r for r in all_reports if r.split == split]
        with open(os.path.join(args.out, f"plot_{tag}.csv"), "w", encoding="utf-8") as fh:
            fh.write("dataset,variant,beta,num_adversaries,mse_adversaries,mse_all\n")
            for r in rows:
                mse_adv = "" if r.mse_adversaries is None else repr(r.mse_adversaries)
                fh.write(f"{r.dataset},{variant(r)},{r.beta!r},{r.num_adversaries},"
                         f"{mse_adv},{r.mse_all!r}\n")
    eval_rows = [r for r in all_reports if r.split == "d_eval"]
    by_variant_counts: dict[str, dict[str, float]] = {}
    by_variant_mse: dict[str, dict[str, float]] = {}
    for r in eval_rows:
        by_variant_counts.setdefault(variant(r), {})[r.dataset] = r.num_adversaries
        by_variant_mse.setdefault(variant(r), {})[r.dataset] = (
            r.mse_adversaries if r.mse_adversaries is not None else np.nan)
    datasets = sorted({r.dataset for r in eval_rows})
    for name, by_variant in (("wilcoxon_counts", by_variant_counts),
                             ("wilcoxon_mse", by_variant_mse)):
        vectors = {}
        for v, per_dataset in by_variant.items():
            if set(per_dataset) == set(datasets):
                vectors[v] = np.array([per_dataset[d] for d in datasets], dtype=np.float64)
        rows = pairwise_wilcoxon(vectors)
        _write_json(os.path.join(args.out, f"{name}.json"), rows)
        print(f"[report] {name}: {len(rows)} pairwise entries over {len(datasets)} datasets")
    print(f"[report] aggregated {len(all_reports)} reports from {len(args.runs)} run(s)")
    return 0


def _batch_worker(job) -> tuple[str, int]:
    dataset, argv_per_stage = job
    for argv in argv_per_stage:
        code = main(argv)
        if code != 0:
            return dataset, code
    return dataset, 0


def cmd_batch(args) -> int:
    """Run the whole pipeline per dataset under one root, then aggregate."""
    datasets = args.datasets.split(",") if args.datasets else list(DEFAULT_BATCH_DATASETS)
    jobs = []
    for name in datasets:
        out = os.path.join(args.out_root, name)
        stages = [
            ["prepare", "--out", out, "--dataset", name, "--delimiter", args.delimiter,
             "--seed-split", str(args.seed_split)] + (["--znorm"] if args.znorm else []),
            ["train-teacher", "--out", out, "--teacher", args.teacher,
             "--epochs", str(args.teacher_epochs)],
            ["attack", "--out", out, "--box", args.box, "--teacher", args.teacher,
             "--alpha", str(args.alpha), "--target-class", str(args.target_class),
             "--epochs", str(args.epochs), "--beta-grid"],
            ["evaluate", "--out", out],
        ]
        if not (args.box == "white" and args.teacher == "fcn"):
            stages.insert(2, ["distill", "--out", out, "--box", args.box,
                              "--epochs", str(args.student_epochs)])
        jobs.append((name, stages))
    if args.processes and args.processes > 1:
        import multiprocessing

        with multiprocessing.get_context("fork").Pool(args.processes) as pool:
            results = pool.map(_batch_worker, jobs)
    else:
        results = [_batch_worker(job) for job in jobs]
    failed = [name for name, code in results if code != 0]
    done = [os.path.join(args.out_root, name) for name, code in results if code == 0]
    report_code = 0
    if done:
        report_code = main(["report", "--out", os.path.join(args.out_root, "report"),
                            "--runs", *done])
    if failed:
        print(f"error: {len(failed)} dataset(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return report_code


def _add_common_train_flags(p, default_epochs: int):
    p.add_argument("--epochs", type=int, default=default_epochs)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsadv",
                                     description="Adversarial attacks on time series classifiers")
    parser.add_argument("--config", help="JSON file of flag defaults (flags override it)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="load, preprocess and split a dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", help=f"archive dataset name under ${UCR_ROOT_ENV}")
    p.add_argument("--train-file")
    p.add_argument("--test-file")
    p.add_argument("--synthetic", action="store_true", help="use the built-in bump dataset")
    p.add_argument("--delimiter", choices=sorted(DELIMITERS), default="tab")
    p.add_argument("--znorm", action="store_true")
    p.add_argument("--seed-split", type=int, default=0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train-teacher", help="train the attacked model")
    p.add_argument("--out", required=True)
    p.add_argument("--teacher", choices=["fcn", "dtw1nn"], required=True)
    p.add_argument("--seed-teacher", type=int, default=0)
    p.add_argument("--early-stop-acc", type=float, default=None)
    _add_common_train_flags(p, default_epochs=200)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("distill", help="train the student surrogate")
    p.add_argument("--out", required=True)
    p.add_argument("--box", choices=["white", "black"], required=True)
    p.add_argument("--gamma", type=float, default=None,
                   help="defaults to 0.5 (white) or 1.0 (black)")
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--seed-student", type=int, default=0)
    _add_common_train_flags(p, default_epochs=200)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("attack", help="train the adversarial generator(s)")
    p.add_argument("--out", required=True)
    p.add_argument("--box", choices=["white", "black"], required=True)
    p.add_argument("--teacher", choices=["fcn", "dtw1nn"], required=True)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--beta", type=float, default=1e-2)
    p.add_argument("--beta-grid", action="store_true",
                   help="train one generator per beta in {1e-1..1e-5}")
    p.add_argument("--target-class", type=int, default=1)
    p.add_argument("--seed-gatn", type=int, default=0)
    _add_common_train_flags(p, default_epochs=100)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("evaluate", help="count adversaries on both splits")
    p.add_argument("--out", required=True)
    p.add_argument("--criterion", choices=["labeled", "unlabeled"], default="labeled")
    p.add_argument("--all-betas", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate run directories into comparison tables")
    p.add_argument("--out", required=True)
    p.add_argument("--runs", nargs="+", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("batch", help="whole pipeline over many archive datasets")
    p.add_argument("--out-root", required=True)
    p.add_argument("--box", choices=["white", "black"], required=True)
    p.add_argument("--teacher", choices=["fcn", "dtw1nn"], required=True)
    p.add_argument("--datasets", help="comma-separated names; defaults to the sensor/ECG/EOG/"
                                      "hemodynamics list")
    p.add_argument("--delimiter", choices=sorted(DELIMITERS), default="tab")
    p.add_argument("--znorm", action="store_true")
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--target-class", type=int, default=1)
    p.add_argument("--seed-split", type=int, default=0)
    p.add_argument("--teacher-epochs", type=int, default=200)
    p.add_argument("--student-epochs", type=int, default=200)
    p.add_argument("--epochs", type=int, default=100, help="generator epochs")
    p.add_argument("--processes", type=int, default=None,
                   help="datasets run in parallel worker processes")
    p.set_defaults(func=cmd_batch)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        defaults = _read_json(args.config)
        section = defaults.get(args.command, defaults)
        known = {action.dest for action in parser._actions}
        for sub_action in (a for a in parser._actions if isinstance(a, argparse._SubParsersAction)):
            known |= {act.dest for act in sub_action.choices[args.command]._actions}
        overridden = _explicit_flags(argv)
        for key, value in section.items():
            dest = key.replace("-", "_")
            if dest not in known:
                raise ValueError(f"config key {key!r} is not a flag of `tsadv {args.command}`")
            if dest not in overridden:
                setattr(args, dest, value)
    return args


def _explicit_flags(argv: list[str]) -> set[str]:
    out = set()
    for token in argv:
        if token.startswith("--"):
            out.add(token[2:].split("=", 1)[0].replace("-", "_"))
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        return args.func(args)
    except (MissingArtifactError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
