"""Feature-importance estimators: gradient, guided backprop, integrated
gradients, the SmoothGrad-family ensembles, squared variants, and the two
model-independent controls (random scores, Sobel edge magnitude)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .nn import GUIDED, STANDARD, Model, input_gradient

SG = "sg"
SG_SQ = "sg_sq"
VAR = "var"

@dataclass
class ImportanceEstimate:
    scores: np.ndarray
    estimator_id: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)):
            raise ValueError(f"non-finite scores from {self.estimator_id}")


@dataclass
class IGConfig:
    steps: int = 25
    reference: np.ndarray | None = None  # defaults to all-zeros


@dataclass
class EnsembleConfig:
    samples: int = 15
    noise_stddev: float = 0.15
    seed: int = 0


def default_noise_stddev(x: np.ndarray, fraction: float = 0.15) -> float:
    """SmoothGrad convention: a fraction of the input value range."""
    return fraction * float(x.max() - x.min())


def estimate_grad(model: Model, x: np.ndarray, target: int) -> ImportanceEstimate:
    return ImportanceEstimate(input_gradient(model, x, target, mode=STANDARD),
                              "grad")


def estimate_gb(model: Model, x: np.ndarray, target: int) -> ImportanceEstimate:
    return ImportanceEstimate(input_gradient(model, x, target, mode=GUIDED),
                              "gb")


def estimate_ig(model: Model, x: np.ndarray, target: int,
                cfg: IGConfig) -> ImportanceEstimate:
    """Riemann approximation of the path integral from the reference to x."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.zeros_like(x) if cfg.reference is None else np.asarray(
        cfg.reference, dtype=np.float64)
    if ref.shape != x.shape:
        raise ValueError(f"reference shape {ref.shape} != input {x.shape}")
    k = cfg.steps
    total = np.zeros_like(x)
    for j in range(1, k + 1):
        point = ref + (j / k) * (x - ref)
        total += input_gradient(model, point, target, mode=STANDARD)
    return ImportanceEstimate((x - ref) * total / k, "ig")


BaseEstimatorFn = Callable[[Model, np.ndarray, int], ImportanceEstimate]


def ensemble(base: BaseEstimatorFn, mode: str, model: Model, x: np.ndarray,
             target: int, cfg: EnsembleConfig) -> ImportanceEstimate:
    """Aggregate noisy base estimates: mean (SG), mean of squares (SG-SQ), or
    population variance (VAR).

    All three modes consume identical noise draws for a given seed.
    """
    if mode not in (SG, SG_SQ, VAR):
        raise ValueError(f"unknown ensemble mode {mode!r}")
    rng = np.random.default_rng(np.uint64(cfg.seed))
    x = np.asarray(x, dtype=np.float64)
    if cfg.noise_stddev == 0.0:
        # All draws coincide with x; short-circuit keeps the degenerate
        # identities (SG = base, SG-SQ = base^2, VAR = 0) exact.
        est = base(model, x, target)
        scores = {SG: est.scores, SG_SQ: est.scores ** 2,
                  VAR: np.zeros_like(est.scores)}[mode]
        return ImportanceEstimate(scores, f"{mode}-{est.estimator_id}")
    acc = np.zeros_like(x)
    acc_sq = np.zeros_like(x)
    base_id = None
    for _ in range(cfg.samples):
        noise = rng.normal(0.0, cfg.noise_stddev, size=x.shape)
        est = base(model, x + noise, target)
        base_id = est.estimator_id
        acc += est.scores
        acc_sq += est.scores ** 2
    mean = acc / cfg.samples
    mean_sq = acc_sq / cfg.samples
    if mode == SG:
        scores = mean
    elif mode == SG_SQ:
        scores = mean_sq
    else:
        scores = mean_sq - mean ** 2
    return ImportanceEstimate(scores, f"{mode}-{base_id}")


def square_estimate(e: ImportanceEstimate) -> ImportanceEstimate:
    return ImportanceEstimate(e.scores ** 2, f"{e.estimator_id}-sq")


def control_random(sample_shape, seed: int) -> ImportanceEstimate:
    """Uniform(0,1) scores from the seed alone; its induced top-t selection is
    a uniformly random subset, independent of model and input content."""
    rng = np.random.default_rng(np.uint64(seed))
    return ImportanceEstimate(rng.uniform(0.0, 1.0, size=sample_shape),
                              "random")


def control_sobel(image: np.ndarray) -> ImportanceEstimate:
    """Edge-magnitude scores of the channel-mean grayscale image.

    `image` is (H, W, C); the per-pixel magnitude is broadcast across channels.
    Replicate padding at the borders.
    """
    if image.ndim != 3:
        raise ValueError("control_sobel needs an (H, W, C) image; dataset is "
                         "missing image metadata")
    gray = image.astype(np.float64).mean(axis=2)
    padded = np.pad(gray, 1, mode="edge")
    # Separable form: central difference then [1, 2, 1] smoothing. Taking
    # the difference first makes constant images exactly zero.
    dx = padded[:, 2:] - padded[:, :-2]
    gx = dx[:-2, :] + 2.0 * dx[1:-1, :] + dx[2:, :]
    dy = padded[2:, :] - padded[:-2, :]
    gy = dy[:, :-2] + 2.0 * dy[:, 1:-1] + dy[:, 2:]
    mag = np.sqrt(gx ** 2 + gy ** 2)
    scores = np.repeat(mag[:, :, None], image.shape[2], axis=2)
    return ImportanceEstimate(scores, "sobel")


# ---------------------------------------------------------------------------
# Estimator registry: string ids -> per-sample scoring functions.

BASE_IDS = ("grad", "gb", "ig")
ENSEMBLE_MODES = (SG, SG_SQ, VAR)
CONTROL_IDS = ("random", "sobel")


def all_estimator_ids() -> list[str]:
    ids = list(BASE_IDS)
    ids += [f"{m}-{b}" for m in ENSEMBLE_MODES for b in BASE_IDS]
    ids += [f"{b}-sq" for b in BASE_IDS]
    ids += list(CONTROL_IDS)
    return ids


@dataclass
class EstimatorSettings:
    """Per-experiment knobs shared by the registry-built estimators."""

    ig: IGConfig = field(default_factory=IGConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    image_shape: tuple[int, int, int] | None = None  # (H, W, C), images only


def make_estimator(estimator_id: str, settings: EstimatorSettings):
    """Build a scoring function (model, x, target, sample_index) -> scores.

    `sample_index` derives per-sample RNG streams for the stochastic
    estimators; deterministic estimators ignore it.
    """
    base_fns: dict[str, BaseEstimatorFn] = {
        "grad": estimate_grad,
        "gb": estimate_gb,
        "ig": lambda m, x, t: estimate_ig(m, x, t, settings.ig),
    }

    if estimator_id in base_fns:
        fn = base_fns[estimator_id]
        return lambda model, x, target, i: fn(model, x, target).scores

    if estimator_id.endswith("-sq") and estimator_id[:-3] in base_fns:
        fn = base_fns[estimator_id[:-3]]
        return lambda model, x, target, i: square_estimate(
            fn(model, x, target)).scores

    for mode in ENSEMBLE_MODES:
        prefix = mode + "-"
        if estimator_id.startswith(prefix) and estimator_id[len(prefix):] in base_fns:
            fn = base_fns[estimator_id[len(prefix):]]

            def scored(model, x, target, i, _fn=fn, _mode=mode):
                cfg = replace(settings.ensemble,
                              seed=_mix_seed(settings.ensemble.seed, i))
                return ensemble(_fn, _mode, model, x, target, cfg).scores

            return scored

    if estimator_id == "random":
        return lambda model, x, target, i: control_random(
            x.shape, settings.ensemble.seed).scores

    if estimator_id == "sobel":
        if settings.image_shape is None:
            raise ValueError("sobel control requires image metadata")
        shape = settings.image_shape

        def sobel_scores(model, x, target, i):
            return control_sobel(x.reshape(shape)).scores.ravel()

        return sobel_scores

    raise ValueError(f"unknown estimator id {estimator_id!r}")


def _mix_seed(seed: int, sample_index: int) -> int:
    # Private per-sample stream; SplitMix-style odd-constant mixing.
    return (seed * 0x9E3779B97F4A7C15 + sample_index * 0xBF58476D1CE4E5B9
            + 0x94D049BB133111EB) % (1 << 64)


def compute_estimates(estimator_id: str, settings: EstimatorSettings,
                      model: Model, x: np.ndarray,
                      targets: np.ndarray) -> np.ndarray:
    """Score every sample of a feature matrix; returns (n, d) scores."""
    fn = make_estimator(estimator_id, settings)
    out = np.empty_like(x, dtype=np.float64)
    for i in range(x.shape[0]):
        out[i] = fn(model, x[i], int(targets[i]), i)
    return out
