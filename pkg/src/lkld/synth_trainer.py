"""Desk-scale synthetic benchmark for the Laplace losses.

A seeded generator produces linear-regression data whose labels carry
Laplace noise, a tiny two-head linear predictor (location head, log-scale
head) is trained by per-sample SGD with hand-chained gradients, and a
comparison runner pits label-scale strategies against each other on shared
data. The point of the exercise: training against the divergence loss with
a sensible label scale stays stable and calibrated where the raw NLL does
not.

Reproducibility: all randomness comes from numpy's PCG64 generator.
``generate`` draws from ``default_rng([seed, 0])`` (true weights, features,
then uniform noise deviates pushed through the Laplace inverse CDF) and the
per-epoch sample order from ``default_rng([seed, 1])``, so identical
configs give bit-identical datasets and reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ._util import fmt_sig
from .calibration import PredictionRecord, calibration_report
from .distributions import LaplaceParams, kld_loss, kld_loss_zero_label_scale
from .label_uncertainty import fit_mapping, map_iou

__all__ = [
    "ConstantNoise",
    "FeatureDependentNoise",
    "ZeroLabelScale",
    "ConstantLabelScale",
    "OracleLabelScale",
    "HeuristicLabelScale",
    "SynthConfig",
    "Dataset",
    "Predictor",
    "EpochStats",
    "TrainReport",
    "CompareRow",
    "generate",
    "resolve_label_scales",
    "sample_param_grads",
    "train",
    "compare",
    "config_from_dict",
    "config_to_dict",
    "train_report_to_csv",
    "comparison_to_csv",
]

# Log-scale head outputs beyond this range under/overflow exp(); treated as
# a non-finite loss (divergence), not an exception.
_LOGSCALE_LIMIT = 700.0


@dataclass(frozen=True)
class ConstantNoise:
    """Every label gets the same noise scale (0 means noise-free labels)."""

    b: float

    def __post_init__(self) -> None:
        if not (self.b >= 0.0 and math.isfinite(self.b)):
            raise ValueError(f"constant noise scale must be >= 0, got {self.b}")

    def label(self) -> str:
        return f"constant({fmt_sig(self.b, 6)})"


@dataclass(frozen=True)
class FeatureDependentNoise:
    """Noise scale tied to sample quality, log-linearly between two bounds.

    A sample of quality q in [0, 1] gets scale ``b_high * (b_low/b_high)**q``:
    worst quality maps to b_high, best to b_low. The log-linear form means a
    linear log-scale head (and the exponential IoU mapping) can represent
    the true noise exactly.
    """

    b_low: float
    b_high: float

    def __post_init__(self) -> None:
        if not (0.0 < self.b_low <= self.b_high and math.isfinite(self.b_high)):
            raise ValueError(
                f"need 0 < b_low <= b_high, got b_low={self.b_low}, b_high={self.b_high}"
            )

    def label(self) -> str:
        return f"feature_dependent({fmt_sig(self.b_low, 6)};{fmt_sig(self.b_high, 6)})"


NoiseProfile = ConstantNoise | FeatureDependentNoise


@dataclass(frozen=True)
class ZeroLabelScale:
    """Treat labels as exact: the zero-label-scale (NLL) limit."""

    def label(self) -> str:
        return "zero"


@dataclass(frozen=True)
class ConstantLabelScale:
    """One fixed label scale for every sample."""

    b: float

    def __post_init__(self) -> None:
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ValueError(f"constant label scale must be > 0, got {self.b}")

    def label(self) -> str:
        return f"constant({fmt_sig(self.b, 6)})"


@dataclass(frozen=True)
class OracleLabelScale:
    """Use each sample's true noise scale as its label scale."""

    def label(self) -> str:
        return "oracle"


@dataclass(frozen=True)
class HeuristicLabelScale:
    """Map each sample's quality through the exponential anchor fit.

    Quality plays the role of a proxy IoU, so the anchors have the same
    meaning as in the geometric pipeline: scale at IoU 0, 0.5, and 1.
    """

    anchors: tuple[float, float, float]

    def __post_init__(self) -> None:
        anchors = tuple(float(a) for a in self.anchors)
        if len(anchors) != 3:
            raise ValueError(f"heuristic mode needs exactly 3 anchors, got {self.anchors}")
        object.__setattr__(self, "anchors", anchors)
        fit_mapping(*anchors)  # validates ordering/positivity

    def label(self) -> str:
        return "heuristic(" + ";".join(fmt_sig(a, 6) for a in self.anchors) + ")"


LabelScaleMode = ZeroLabelScale | ConstantLabelScale | OracleLabelScale | HeuristicLabelScale


@dataclass(frozen=True)
class SynthConfig:
    """Full experiment description; seeds make everything reproducible."""

    n_train: int = 256
    n_test: int = 4000
    feature_dim: int = 128
    noise: NoiseProfile = FeatureDependentNoise(0.1, 0.5)
    label_scale: LabelScaleMode = OracleLabelScale()
    seed: int = 0
    epochs: int = 400
    learning_rate: float = 0.03
    grad_clip: float = 1.0
    average_tail_epochs: int = 100

    def __post_init__(self) -> None:
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not (self.learning_rate > 0.0 and math.isfinite(self.learning_rate)):
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.grad_clip > 0.0:
            raise ValueError(f"grad_clip must be > 0, got {self.grad_clip}")
        if self.average_tail_epochs < 0:
            raise ValueError(f"average_tail_epochs must be >= 0, got {self.average_tail_epochs}")

    def generator_settings(self) -> tuple:
        return (self.seed, self.n_train, self.n_test, self.feature_dim, self.noise)

    def describe(self) -> str:
        return (
            f"n_train={self.n_train} n_test={self.n_test} feature_dim={self.feature_dim} "
            f"noise={self.noise.label()} label_scale={self.label_scale.label()} "
            f"seed={self.seed} epochs={self.epochs} "
            f"learning_rate={fmt_sig(self.learning_rate, 6)} grad_clip={fmt_sig(self.grad_clip, 6)} "
            f"average_tail_epochs={self.average_tail_epochs}"
        )


@dataclass(frozen=True)
class Dataset:
    """Features with true targets, noisy observed labels, and noise metadata.

    ``true_targets`` are the noise-free linear targets (used for error
    evaluation); ``labels`` are the observed noisy annotations (used for
    training and for judging the predicted distributions); ``quality`` is
    the per-sample proxy IoU in [0, 1] that the heuristic mode maps through
    the anchor fit.
    """

    features: np.ndarray
    true_targets: np.ndarray
    labels: np.ndarray
    true_scales: np.ndarray
    quality: np.ndarray


def _laplace_quantiles(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))


def _noise_scales(profile: NoiseProfile, quality: np.ndarray) -> np.ndarray:
    if isinstance(profile, ConstantNoise):
        return np.full(quality.shape, profile.b)
    return profile.b_high * (profile.b_low / profile.b_high) ** quality


def generate(config: SynthConfig) -> tuple[Dataset, Dataset]:
    """Draw the train and test sets for a config.

    Features are uniform on [-1, 1); the true target is a fixed (seeded)
    linear function of the features; observed labels add Laplace noise drawn
    through the inverse CDF; quality is the first feature rescaled to [0, 1].
    """
    rng = np.random.default_rng([config.seed, 0])
    d = config.feature_dim
    w_true = rng.uniform(-2.0, 2.0, d)
    c_true = rng.uniform(-1.0, 1.0)

    def make(n: int) -> Dataset:
        features = rng.uniform(-1.0, 1.0, (n, d))
        quality = 0.5 * (features[:, 0] + 1.0)
        scales = _noise_scales(config.noise, quality)
        noise = scales * _laplace_quantiles(rng.random(n))
        true_targets = features @ w_true + c_true
        return Dataset(
            features=features,
            true_targets=true_targets,
            labels=true_targets + noise,
            true_scales=scales,
            quality=quality,
        )

    return make(config.n_train), make(config.n_test)


@dataclass
class Predictor:
    """Two-head linear model: location head plus log-scale head.

    The scale head is parameterized in log space and exponentiated, so the
    predicted scale is positive by construction.
    """

    weights_mean: list[float]
    bias_mean: float
    weights_logscale: list[float]
    bias_logscale: float

    @classmethod
    def initial(cls, feature_dim: int) -> "Predictor":
        # Zero weights; log-scale bias ln(1) starts at unit uncertainty,
        # well away from the small-scale singularity.
        return cls([0.0] * feature_dim, 0.0, [0.0] * feature_dim, math.log(1.0))

    def copy(self) -> "Predictor":
        return Predictor(
            list(self.weights_mean), self.bias_mean, list(self.weights_logscale), self.bias_logscale
        )

    def as_vector(self) -> list[float]:
        return [*self.weights_mean, self.bias_mean, *self.weights_logscale, self.bias_logscale]

    def predict_one(self, x: Sequence[float]) -> tuple[float, float]:
        """(predicted location, log-scale head output) for one sample."""
        loc = self.bias_mean
        log_scale = self.bias_logscale
        for j, xj in enumerate(x):
            loc += self.weights_mean[j] * xj
            log_scale += self.weights_logscale[j] * xj
        return loc, log_scale

    def predict_batch(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(locations, scales) over a feature matrix."""
        locs = features @ np.asarray(self.weights_mean) + self.bias_mean
        log_scales = features @ np.asarray(self.weights_logscale) + self.bias_logscale
        return locs, np.exp(log_scales)


def resolve_label_scales(config: SynthConfig, data: Dataset) -> np.ndarray | None:
    """Per-sample label scales for a config's mode; None means the NLL limit."""
    mode = config.label_scale
    n = data.labels.shape[0]
    if isinstance(mode, ZeroLabelScale):
        return None
    if isinstance(mode, ConstantLabelScale):
        return np.full(n, mode.b)
    if isinstance(mode, OracleLabelScale):
        if not np.all(data.true_scales > 0.0):
            raise ValueError("oracle label scales require strictly positive noise scales")
        return np.asarray(data.true_scales, dtype=float)
    mapping = fit_mapping(*mode.anchors)
    return np.array([map_iou(mapping, q) for q in data.quality])


def sample_param_grads(
    predictor: Predictor, x: Sequence[float], label: float, label_scale: float | None
) -> tuple[float, list[float]]:
    """Loss at one sample and its unclipped gradient w.r.t. every parameter.

    Gradient layout matches ``Predictor.as_vector``: mean weights, mean
    bias, log-scale weights, log-scale bias. The log-scale chain multiplies
    the scale partial by the predicted scale (d exp(s)/ds = exp(s)).
    """
    loc, log_scale = predictor.predict_one(x)
    if not (math.isfinite(loc) and -_LOGSCALE_LIMIT < log_scale < _LOGSCALE_LIMIT):
        raise ValueError("predictor output is out of range; training would have diverged")
    scale = math.exp(log_scale)
    pred = LaplaceParams(loc, scale)
    if label_scale is None:
        grad = kld_loss_zero_label_scale(label, pred)
    else:
        grad = kld_loss(LaplaceParams(label, label_scale), pred)
    g_loc = grad.d_location
    g_log = grad.d_scale * scale
    flat = [g_loc * xj for xj in x]
    flat.append(g_loc)
    flat.extend(g_log * xj for xj in x)
    flat.append(g_log)
    return grad.value, flat


@dataclass(frozen=True)
class EpochStats:
    mean_loss: float
    mean_abs_error: float
    ece: float


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch training stats plus final held-out metrics.

    ``test_mae`` is measured against the noise-free targets; ``test_ece``
    judges the predicted distributions against the noisy held-out labels,
    since only noisy draws can exercise a predicted noise distribution.
    ``diverged`` is set exactly when a non-finite loss (including scale-head
    under/overflow) halted the run; final metrics are then inf/nan.
    """

    epoch_stats: tuple[EpochStats, ...]
    test_mae: float
    test_ece: float
    diverged: bool


def _evaluate(predictor: Predictor, data: Dataset) -> tuple[float, float]:
    """(MAE vs true targets, calibration gap vs observed labels)."""
    with np.errstate(over="ignore"):
        locs, scales = predictor.predict_batch(data.features)
    finite = (
        np.all(np.isfinite(locs)) and np.all(np.isfinite(scales)) and np.all(scales > 0.0)
    )
    if not finite:
        return math.inf, math.nan
    mae = float(np.mean(np.abs(data.true_targets - locs)))
    records = [
        PredictionRecord(residual=float(r), scale=float(s))
        for r, s in zip(data.labels - locs, scales)
    ]
    return mae, calibration_report(records).ece


def train(
    config: SynthConfig,
    train_set: Dataset | None = None,
    test_set: Dataset | None = None,
    init: Predictor | None = None,
) -> tuple[Predictor, TrainReport]:
    """Per-sample SGD with the analytic loss gradients chained by hand.

    The per-parameter gradient is clipped by its global L2 norm at
    ``grad_clip`` before the constant-learning-rate update. A non-finite
    loss (or a scale-head output that would under/overflow exp) marks the
    run diverged and halts it; the report records the fact instead of
    raising.

    With ``average_tail_epochs > 0`` the returned predictor (and the one
    scored on the test set) is the average of the iterates visited during
    the last that-many epochs. Constant-step per-sample SGD never settles,
    it hovers around its fixed point; tail averaging reports the hover
    center instead of wherever the final step happened to land. Per-epoch
    stats always describe the running iterate.
    """
    if train_set is None or test_set is None:
        generated_train, generated_test = generate(config)
        train_set = train_set if train_set is not None else generated_train
        test_set = test_set if test_set is not None else generated_test
    n, d = train_set.features.shape
    if d != config.feature_dim:
        raise ValueError(f"dataset feature_dim {d} != config feature_dim {config.feature_dim}")

    scales_arr = resolve_label_scales(config, train_set)
    label_scales = None if scales_arr is None else [float(b) for b in scales_arr]
    xs = [tuple(float(v) for v in row) for row in train_set.features]
    ys = [float(v) for v in train_set.labels]

    predictor = (init or Predictor.initial(d)).copy()
    wm = predictor.weights_mean
    ws = predictor.weights_logscale
    cm = predictor.bias_mean
    cs = predictor.bias_logscale
    lr = config.learning_rate
    clip = config.grad_clip

    order_rng = np.random.default_rng([config.seed, 1])
    stats: list[EpochStats] = []
    diverged = False
    avg_start = max(0, config.epochs - config.average_tail_epochs)
    acc = [0.0] * (2 * d + 2)  # wm..., cm, ws..., cs
    acc_count = 0

    for epoch_idx in range(config.epochs):
        averaging = config.average_tail_epochs > 0 and epoch_idx >= avg_start
        perm = order_rng.permutation(n)
        total_loss = 0.0
        total_abs = 0.0
        seen = 0
        for idx in perm:
            x = xs[idx]
            y = ys[idx]
            loc = cm
            log_scale = cs
            for j in range(d):
                loc += wm[j] * x[j]
                log_scale += ws[j] * x[j]
            if not (math.isfinite(loc) and -_LOGSCALE_LIMIT < log_scale < _LOGSCALE_LIMIT):
                diverged = True
                total_loss = math.inf
                break
            scale = math.exp(log_scale)
            pred = LaplaceParams(loc, scale)
            if label_scales is None:
                grad = kld_loss_zero_label_scale(y, pred)
            else:
                grad = kld_loss(LaplaceParams(y, label_scales[idx]), pred)
            seen += 1
            total_abs += abs(y - loc)
            g_loc = grad.d_location
            g_log = grad.d_scale * scale
            if not (math.isfinite(grad.value) and math.isfinite(g_loc) and math.isfinite(g_log)):
                diverged = True
                total_loss = math.inf
                break
            total_loss += grad.value

            sq = 1.0
            for j in range(d):
                sq += x[j] * x[j]
            norm = math.sqrt((g_loc * g_loc + g_log * g_log) * sq)
            if norm > clip:
                factor = clip / norm
                g_loc *= factor
                g_log *= factor
            step_loc = lr * g_loc
            step_log = lr * g_log
            for j in range(d):
                wm[j] -= step_loc * x[j]
                ws[j] -= step_log * x[j]
            cm -= step_loc
            cs -= step_log
            if averaging:
                for j in range(d):
                    acc[j] += wm[j]
                    acc[d + 1 + j] += ws[j]
                acc[d] += cm
                acc[2 * d + 1] += cs
                acc_count += 1

        predictor.bias_mean = cm
        predictor.bias_logscale = cs
        if seen:
            mean_loss = total_loss / seen
            mean_abs = total_abs / seen
            epoch_ece = _evaluate(predictor, train_set)[1]
        else:
            mean_loss = math.inf
            mean_abs = math.nan
            epoch_ece = math.nan
        stats.append(EpochStats(mean_loss, mean_abs, epoch_ece))
        if diverged:
            break

    predictor.bias_mean = cm
    predictor.bias_logscale = cs
    if not diverged and acc_count > 0:
        predictor = Predictor(
            [a / acc_count for a in acc[:d]],
            acc[d] / acc_count,
            [a / acc_count for a in acc[d + 1 : 2 * d + 1]],
            acc[2 * d + 1] / acc_count,
        )
    if diverged:
        test_mae, test_ece = math.inf, math.nan
    else:
        test_mae, test_ece = _evaluate(predictor, test_set)
        if not math.isfinite(test_mae):
            diverged = True
    return predictor, TrainReport(tuple(stats), test_mae, test_ece, diverged)


@dataclass(frozen=True)
class CompareRow:
    mode: str
    test_mae: float
    test_ece: float
    diverged: bool


def compare(configs: Sequence[SynthConfig]) -> list[CompareRow]:
    """Train one run per config on shared data and tabulate the final metrics.

    All configs must agree on seed and generator settings; they are meant to
    differ only in how the label scale is chosen.
    """
    if not configs:
        raise ValueError("compare needs at least one config")
    settings = configs[0].generator_settings()
    for cfg in configs[1:]:
        if cfg.generator_settings() != settings:
            raise ValueError(
                "compare configs must share seed and generator settings; "
                f"{cfg.generator_settings()} != {settings}"
            )
    train_set, test_set = generate(configs[0])
    rows = []
    for cfg in configs:
        _, report = train(cfg, train_set, test_set)
        rows.append(
            CompareRow(
                mode=cfg.label_scale.label(),
                test_mae=report.test_mae,
                test_ece=report.test_ece,
                diverged=report.diverged,
            )
        )
    return rows


def _noise_from_dict(d: dict) -> NoiseProfile:
    kind = d.get("kind")
    if kind == "constant":
        return ConstantNoise(float(d["b"]))
    if kind == "feature_dependent":
        return FeatureDependentNoise(float(d["b_low"]), float(d["b_high"]))
    raise ValueError(f"unknown noise kind {kind!r}")


def _mode_from_dict(d: dict) -> LabelScaleMode:
    mode = d.get("mode")
    if mode == "zero":
        return ZeroLabelScale()
    if mode == "constant":
        return ConstantLabelScale(float(d["b"]))
    if mode == "oracle":
        return OracleLabelScale()
    if mode == "heuristic":
        anchors = d["anchors"]
        return HeuristicLabelScale(tuple(float(a) for a in anchors))
    raise ValueError(f"unknown label_scale mode {mode!r}")


def config_from_dict(doc: dict) -> SynthConfig:
    """Build a config from its JSON representation (missing keys use defaults)."""
    if not isinstance(doc, dict):
        raise ValueError("config document must be a JSON object")
    defaults = SynthConfig()
    try:
        return SynthConfig(
            n_train=int(doc.get("n_train", defaults.n_train)),
            n_test=int(doc.get("n_test", defaults.n_test)),
            feature_dim=int(doc.get("feature_dim", defaults.feature_dim)),
            noise=_noise_from_dict(doc["noise"]) if "noise" in doc else defaults.noise,
            label_scale=_mode_from_dict(doc["label_scale"])
            if "label_scale" in doc
            else defaults.label_scale,
            seed=int(doc.get("seed", defaults.seed)),
            epochs=int(doc.get("epochs", defaults.epochs)),
            learning_rate=float(doc.get("learning_rate", defaults.learning_rate)),
            grad_clip=float(doc.get("grad_clip", defaults.grad_clip)),
            average_tail_epochs=int(doc.get("average_tail_epochs", defaults.average_tail_epochs)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed config: {exc}") from exc


def config_to_dict(config: SynthConfig) -> dict:
    noise: dict
    if isinstance(config.noise, ConstantNoise):
        noise = {"kind": "constant", "b": config.noise.b}
    else:
        noise = {
            "kind": "feature_dependent",
            "b_low": config.noise.b_low,
            "b_high": config.noise.b_high,
        }
    mode: dict
    if isinstance(config.label_scale, ZeroLabelScale):
        mode = {"mode": "zero"}
    elif isinstance(config.label_scale, ConstantLabelScale):
        mode = {"mode": "constant", "b": config.label_scale.b}
    elif isinstance(config.label_scale, OracleLabelScale):
        mode = {"mode": "oracle"}
    else:
        mode = {"mode": "heuristic", "anchors": list(config.label_scale.anchors)}
    return {
        "n_train": config.n_train,
        "n_test": config.n_test,
        "feature_dim": config.feature_dim,
        "noise": noise,
        "label_scale": mode,
        "seed": config.seed,
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "grad_clip": config.grad_clip,
        "average_tail_epochs": config.average_tail_epochs,
    }


def train_report_to_csv(config: SynthConfig, report: TrainReport) -> str:
    """Per-epoch rows plus a final test row; the config rides in a comment header."""
    lines = [f"# {config.describe()}", "epoch,mean_loss,mean_abs_error,ece"]
    for i, stats in enumerate(report.epoch_stats, start=1):
        lines.append(
            f"{i},{fmt_sig(stats.mean_loss)},{fmt_sig(stats.mean_abs_error)},{fmt_sig(stats.ece)}"
        )
    lines.append(
        f"final,{fmt_sig(report.test_mae)},{fmt_sig(report.test_ece)},"
        f"{str(report.diverged).lower()}"
    )
    return "\n".join(lines) + "\n"


def comparison_to_csv(base: SynthConfig, rows: Sequence[CompareRow]) -> str:
    shared = replace(base, label_scale=OracleLabelScale())
    header = shared.describe().replace(" label_scale=oracle", "")
    lines = [f"# {header}", "mode,test_mae,test_ece,diverged"]
    for row in rows:
        lines.append(
            f"{row.mode},{fmt_sig(row.test_mae)},{fmt_sig(row.test_ece)},"
            f"{str(row.diverged).lower()}"
        )
    return "\n".join(lines) + "\n"
