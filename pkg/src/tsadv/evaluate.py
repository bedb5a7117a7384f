"""Adversary counting, generalization to the unseen split, and the paired
Wilcoxon signed-rank comparison used to compare attack variants.

An adversarial sample counts under the labeled criterion only if the teacher
classifies the clean series correctly AND changes its answer on the crafted
one; the unlabeled criterion drops the first check by treating the teacher's
clean prediction as ground truth.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset
from .util import rankdata_average

CSV_COLUMNS = ["dataset", "box_mode", "teacher_kind", "beta", "split", "criterion",
               "n_evaluated", "num_adversaries", "mse_adversaries", "mse_all"]


@dataclass(frozen=True)
class AttackReport:
    """Per-dataset attack outcome in the appendix-table schema."""

    dataset: str
    box_mode: str
    teacher_kind: str
    beta: float
    num_adversaries: int
    mse_adversaries: float | None  # mean over counted adversaries; None when count is 0
    mse_all: float  # mean over every evaluated sample
    split: str  # d_eval | d_test
    criterion: str  # labeled | unlabeled
    n_evaluated: int

    def __post_init__(self):
        if self.num_adversaries > self.n_evaluated:
            raise ValueError("cannot count more adversaries than evaluated samples")
        if self.mse_all < 0 or (self.mse_adversaries is not None and self.mse_adversaries < 0):
            raise ValueError("MSE fields must be >= 0")
        if self.num_adversaries == 0 and self.mse_adversaries is not None:
            raise ValueError("mse_adversaries is undefined when no adversary was counted")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AttackReport":
        return cls(**d)


def _per_sample_mse(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shapes differ: {x.shape} vs {x_hat.shape}")
    return ((x_hat - x) ** 2).mean(axis=1)


def _build_report(adversary_mask: np.ndarray, mse: np.ndarray, *, dataset: str,
                  box_mode: str, teacher_kind: str, beta: float, split: str,
                  criterion: str) -> AttackReport:
    count = int(adversary_mask.sum())
    return AttackReport(
        dataset=dataset, box_mode=box_mode, teacher_kind=teacher_kind, beta=beta,
        num_adversaries=count,
        mse_adversaries=float(mse[adversary_mask].mean()) if count else None,
        mse_all=float(mse.mean()), split=split, criterion=criterion,
        n_evaluated=int(mse.shape[0]))


def count_adversaries_labeled(teacher, x: np.ndarray, x_hat: np.ndarray, y_true: np.ndarray,
                              *, dataset: str = "", box_mode: str = "", teacher_kind: str = "",
                              beta: float = 0.0, split: str = "d_eval") -> AttackReport:
    """Two-fold verification: clean prediction correct AND flipped by x_hat."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("no samples to evaluate")
    y_true = np.asarray(y_true, dtype=np.int64)
    pred_clean = teacher.predict_labels(x)
    pred_adv = teacher.predict_labels(x_hat)
    mask = (pred_clean == y_true) & (pred_adv != pred_clean)
    return _build_report(mask, _per_sample_mse(x, x_hat), dataset=dataset, box_mode=box_mode,
                         teacher_kind=teacher_kind, beta=beta, split=split, criterion="labeled")


def count_adversaries_unlabeled(teacher, x: np.ndarray, x_hat: np.ndarray, *, dataset: str = "",
                                box_mode: str = "", teacher_kind: str = "", beta: float = 0.0,
                                split: str = "d_eval") -> AttackReport:
    """Clean predictions are pseudo-labels; any flip counts."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("no samples to evaluate")
    pseudo = teacher.predict_labels(x)
    pred_adv = teacher.predict_labels(x_hat)
    mask = pred_adv != pseudo
    return _build_report(mask, _per_sample_mse(x, x_hat), dataset=dataset, box_mode=box_mode,
                         teacher_kind=teacher_kind, beta=beta, split=split, criterion="unlabeled")


def generalization_eval(run, teacher, d_test: Dataset) -> AttackReport:
    """Labeled counting on the unseen split with zero parameter updates.

    Generator and surrogate state are hashed before and after; any drift is
    an error, since generation must be a pure forward pass.
    """
    from .attack import generate

    before = (run.gatn.state_hash(), run.surrogate.state_hash())
    x = d_test.values
    x_hat, _, _ = generate(run, x)
    report = count_adversaries_labeled(
        teacher, x, x_hat, d_test.labels, dataset=d_test.name, box_mode=run.config.box_mode,
        teacher_kind=run.config.teacher_kind, beta=run.config.beta, split="d_test")
    after = (run.gatn.state_hash(), run.surrogate.state_hash())
    if before != after:
        raise RuntimeError("model parameters changed during test-split evaluation")
    return report


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    p_value: float
    n_effective: int
    method: str  # exact | normal | degenerate
    degenerate: bool = False

    def __iter__(self):
        return iter((self.statistic, self.p_value))


def wilcoxon_signed_rank(a: np.ndarray, b: np.ndarray,
                         alternative: str = "two-sided") -> WilcoxonResult:
    """Paired Wilcoxon signed-rank test, two-sided by default.

    Zero differences are dropped and tied ranks averaged. With n <= 25
    effective pairs the p-value comes from the exact sign-flip distribution
    of the rank sum (a subset-sum count over doubled ranks, so averaged tie
    ranks stay exact); larger n uses the normal approximation with tie
    correction and a continuity correction. All differences zero returns the
    degenerate (0, 1.0) result with a warning. ``alternative`` "greater"
    ("less") tests whether a tends to exceed (fall below) b.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be 1-D arrays of equal length")
    diff = a - b
    diff = diff[diff != 0.0]
    n = diff.shape[0]
    if n == 0:
        warnings.warn("all paired differences are zero; test is degenerate", stacklevel=2)
        return WilcoxonResult(statistic=0.0, p_value=1.0, n_effective=0,
                              method="degenerate", degenerate=True)
    if n < 5:
        raise ValueError(f"need >= 5 nonzero differences, got {n}")
    ranks = rankdata_average(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks.sum()) - w_plus
    statistic = min(w_plus, w_minus)
    if n <= 25:
        p_le, p_ge = _exact_tails(ranks, w_plus)
        method = "exact"
    else:
        p_le, p_ge = _normal_tails(diff, ranks, w_plus)
        method = "normal"
    if alternative == "greater":
        p = p_ge
    elif alternative == "less":
        p = p_le
    else:
        p = 2.0 * min(p_le, p_ge)
    return WilcoxonResult(statistic=statistic, p_value=min(1.0, p), n_effective=n, method=method)


def _exact_tails(ranks: np.ndarray, w_plus: float) -> tuple[float, float]:
    """Exact P(W+ <= w) and P(W+ >= w) over all 2^n sign assignments.

    Doubling the ranks makes every value integral; counts[s] is the number of
    sign assignments whose doubled rank sum is s, built by the usual
    subset-sum recurrence.
    """
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.shape[0] - r]
        counts = counts + shifted
    w2 = int(round(2 * w_plus))
    denom = float(2 ** ranks.shape[0])
    return counts[: w2 + 1].sum() / denom, counts[w2:].sum() / denom


def _normal_tails(diff: np.ndarray, ranks: np.ndarray, w_plus: float) -> tuple[float, float]:
    n = diff.shape[0]
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(diff), return_counts=True)
    var -= (tie_counts**3 - tie_counts).sum() / 48.0
    if var <= 0:
        return 1.0, 1.0
    sd = math.sqrt(var)

    def phi(z):
        return 0.5 * math.erfc(-z / math.sqrt(2.0))

    # continuity correction: each tail includes its boundary point
    p_le = phi((w_plus - mean + 0.5) / sd)
    p_ge = 1.0 - phi((w_plus - mean - 0.5) / sd)
    return min(1.0, p_le), min(1.0, p_ge)


def save_reports_csv(reports: list[AttackReport], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in reports:
            row = r.to_dict()
            row["mse_adversaries"] = "" if row["mse_adversaries"] is None else repr(row["mse_adversaries"])
            row["mse_all"] = repr(row["mse_all"])
            row["beta"] = repr(row["beta"])
            writer.writerow(row)


def load_reports_csv(path: str | os.PathLike) -> list[AttackReport]:
    reports = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            reports.append(AttackReport(
                dataset=row["dataset"], box_mode=row["box_mode"],
                teacher_kind=row["teacher_kind"], beta=float(row["beta"]),
                num_adversaries=int(row["num_adversaries"]),
                mse_adversaries=None if row["mse_adversaries"] == "" else float(row["mse_adversaries"]),
                mse_all=float(row["mse_all"]), split=row["split"], criterion=row["criterion"],
                n_evaluated=int(row["n_evaluated"])))
    return reports


def save_reports_json(reports: list[AttackReport], path: str | os.PathLike,
                      provenance: dict | None = None) -> None:
    blob = {"provenance": provenance or {}, "reports": [r.to_dict() for r in reports]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2)


def load_reports_json(path: str | os.PathLike) -> tuple[list[AttackReport], dict]:
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    return [AttackReport.from_dict(d) for d in blob["reports"]], blob["provenance"]


def pairwise_wilcoxon(values_by_variant: dict[str, np.ndarray]) -> list[dict]:
    """Upper-triangle pairwise comparisons across attack variants.

    Each entry carries the pair, the statistic and p-value, or a note when
    the test is not applicable (fewer than 5 nonzero differences).
    """
    names = list(values_by_variant)
    rows = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            entry = {"a": a, "b": b}
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    result = wilcoxon_signed_rank(values_by_variant[a], values_by_variant[b])
                entry.update(statistic=result.statistic, p_value=result.p_value,
                             n_effective=result.n_effective, method=result.method)
            except ValueError as exc:
                entry.update(statistic=None, p_value=None, n_effective=None,
                             method=f"skipped: {exc}")
            rows.append(entry)
    return rows
