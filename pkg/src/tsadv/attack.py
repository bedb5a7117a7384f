"""Targeted adversarial generation against a frozen differentiable surrogate.

The generator receives the original series and the gradient of the
surrogate's target-class probability with respect to it, and emits the
adversarial series directly. Its loss trades reconstruction fidelity
(weight beta) against matching a reranked version of the surrogate's clean
prediction in which the target class is boosted to alpha times the current
maximum and the row renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import Dataset
from .models import ArchitectureConfig, as_conv_input, build_gatn
from .nn import Adam, Network, TrainingDivergedError, input_gradient_with_probs, l2, predict

BETA_GRID = tuple(10.0**-b for b in range(1, 6))


@dataclass(frozen=True)
class AttackConfig:
    box_mode: str  # white | black
    teacher_kind: str  # fcn | dtw1nn
    alpha: float = 1.5
    beta: float = 1e-2
    target_class: int = 1
    seed: int = 0
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    gatn_hidden_units: tuple[int, ...] = (128, 128)

    def __post_init__(self):
        if self.box_mode not in ("white", "black"):
            raise ValueError(f"unknown box_mode {self.box_mode!r}")
        if self.teacher_kind not in ("fcn", "dtw1nn"):
            raise ValueError(f"unknown teacher_kind {self.teacher_kind!r}")
        if self.alpha <= 1.0:
            raise ValueError(f"alpha must be > 1 for the reranking argmax guarantee, got {self.alpha}")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.target_class < 0:
            raise ValueError("target_class must be >= 0")


@dataclass
class AttackRun:
    """One trained attack: configuration, frozen surrogate, generator, provenance."""

    config: AttackConfig
    surrogate: Network
    gatn: Network
    surrogate_is_teacher: bool
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        direct = self.config.box_mode == "white" and self.config.teacher_kind == "fcn"
        if self.surrogate_is_teacher and not direct:
            raise ValueError(
                "the teacher may be attacked directly only for a white-box attack "
                "on the fcn teacher")


def select_surrogate(box_mode: str, teacher_kind: str, teacher_model: Network | None,
                     student: Network | None) -> tuple[Network, bool]:
    """The model the generator differentiates through.

    Only a white-box attack on the neural teacher goes after the teacher
    itself; every other combination attacks the distilled student.
    """
    if box_mode == "white" and teacher_kind == "fcn":
        if teacher_model is None:
            raise ValueError("white-box fcn attack needs the teacher network")
        return teacher_model, True
    if student is None:
        raise ValueError(f"({box_mode}, {teacher_kind}) attack needs a distilled student")
    return student, False


def rerank(y: np.ndarray, target_class: int, alpha: float) -> np.ndarray:
    """Boost the target class to alpha * max(y), keep the rest, renormalize.

    For alpha > 1 the boosted entry strictly dominates every other, so the
    argmax of the result is always the target class.
    """
    if alpha <= 1.0:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    y = np.asarray(y, dtype=np.float64)
    out = np.atleast_2d(y).copy()
    if not 0 <= target_class < out.shape[1]:
        raise ValueError(f"target_class {target_class} out of range for {out.shape[1]} classes")
    out[:, target_class] = alpha * out.max(axis=1)
    out /= out.sum(axis=1, keepdims=True)
    return out.reshape(y.shape)


def gatn_loss(x, x_hat, y_clean: np.ndarray, y_adv, config: AttackConfig):
    """beta * MSE(x_hat, x) + MSE(y_adv, rerank(y_clean)).

    ``x`` and ``y_clean`` are constants; gradients flow through ``x_hat`` and
    ``y_adv`` into the generator. Returns a scalar Tensor.
    """
    target = rerank(y_clean, config.target_class, config.alpha)
    return config.beta * l2(x_hat, x) + l2(y_adv, target)


def make_attack_run(config: AttackConfig, input_length: int, teacher_model: Network | None,
                    student: Network | None, provenance: dict | None = None) -> AttackRun:
    """Build an untrained generator and wire it to the routed surrogate."""
    surrogate, is_teacher = select_surrogate(config.box_mode, config.teacher_kind,
                                             teacher_model, student)
    gatn = build_gatn(ArchitectureConfig(
        input_length=input_length, num_classes=2, architecture="gatn",
        gatn_hidden_units=tuple(config.gatn_hidden_units), seed=config.seed))
    surrogate.set_requires_grad(False)
    return AttackRun(config=config, surrogate=surrogate, gatn=gatn,
                     surrogate_is_teacher=is_teacher, provenance=dict(provenance or {}))


def generate(run: AttackRun, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Craft adversarial series for a sample or batch; no parameters change.

    Pass 1 over the surrogate yields the input gradient and the clean
    prediction; the generator maps (x, gradient) to x_hat; pass 2 yields the
    surrogate's prediction on x_hat.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    dtype = run.gatn.parameters()[0].dtype
    grad3, y_clean = input_gradient_with_probs(run.surrogate, as_conv_input(x2, dtype), run.config.target_class)
    x_tilde = grad3[:, 0, :]
    x_hat = run.gatn.forward((Tensor(x2.astype(dtype)), Tensor(x_tilde.astype(dtype))),
                             training=False).data
    _, y_adv = predict(run.surrogate, as_conv_input(x_hat, dtype))
    if single:
        return x_hat[0], y_clean[0], y_adv[0]
    return x_hat, y_clean, y_adv


def train_gatn(run: AttackRun, d_eval: Dataset | np.ndarray) -> AttackRun:
    """Minimize the mean generator loss over the evaluation split.

    The surrogate is frozen: its input gradients are recomputed fresh every
    batch, its parameters are asserted bitwise unchanged afterwards, and only
    ground-truth-free quantities (series values, surrogate predictions) are
    consumed.
    """
    x = d_eval.values if isinstance(d_eval, Dataset) else np.asarray(d_eval)
    config = run.config
    dtype = run.gatn.parameters()[0].dtype
    x_all = x.astype(dtype)
    n = x_all.shape[0]
    batch_size = min(config.batch_size, n)
    surrogate_before = run.surrogate.state_hash()
    rng = np.random.default_rng(config.seed)
    opt = Adam(run.gatn.parameters(), lr=config.lr)
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            xb = x_all[idx]
            grad3, y_clean = input_gradient_with_probs(
                run.surrogate, as_conv_input(xb, dtype), config.target_class)
            x_tilde = grad3[:, 0, :].astype(dtype)
            opt.zero_grad()
            x_hat = run.gatn.forward((Tensor(xb), Tensor(x_tilde)), training=True)
            y_adv = ad.softmax(run.surrogate.forward(
                ad.reshape(x_hat, (x_hat.data.shape[0], 1, -1)), training=False), axis=1)
            loss = gatn_loss(xb, x_hat, y_clean, y_adv, config)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDivergedError(f"non-finite attack loss in epoch {epoch}")
            loss.backward()
            opt.step()
            losses.append(value)
        run.gatn.training_log.append({"epoch": epoch, "loss": float(np.mean(losses))})
    if run.surrogate.state_hash() != surrogate_before:
        raise RuntimeError("surrogate parameters changed during generator training")
    return run


def beta_grid_search(base_config: AttackConfig, d_eval: Dataset, teacher,
                     teacher_model: Network | None = None, student: Network | None = None,
                     betas: tuple[float, ...] = BETA_GRID, provenance: dict | None = None):
    """Train one generator per beta, score each on the real teacher, pick the best.

    Returns (runs, reports, best_index); best means most labeled-criterion
    adversaries on d_eval, ties broken by smaller adversary MSE, then by
    smaller beta.
    """
    from .evaluate import count_adversaries_labeled

    runs = []
    reports = []
    x = d_eval.values
    y_true = d_eval.labels
    for beta in betas:
        config = replace(base_config, beta=beta)
        run = make_attack_run(config, input_length=x.shape[1], teacher_model=teacher_model,
                              student=student, provenance=provenance)
        train_gatn(run, x)
        x_hat, _, _ = generate(run, x)
        report = count_adversaries_labeled(
            teacher, x, x_hat, y_true, dataset=d_eval.name, box_mode=config.box_mode,
            teacher_kind=config.teacher_kind, beta=beta, split="d_eval")
        runs.append(run)
        reports.append(report)
    best = min(range(len(betas)), key=lambda i: (
        -reports[i].num_adversaries,
        reports[i].mse_adversaries if reports[i].mse_adversaries is not None else np.inf,
        betas[i],
    ))
    return runs, reports, best
