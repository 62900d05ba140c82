"""Diagonal-covariance UBM training, sufficient statistics, MAP adaptation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .audio import FeatureMatrix
from .errors import DegenerateComponent, DimensionMismatch, InsufficientData

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class DiagonalGmm:
    """Gaussian mixture with diagonal covariances.

    weights sum to one; variances are floored during training so every
    component stays strictly positive definite.
    """

    weights: np.ndarray   # (C,)
    means: np.ndarray     # (C, F)
    variances: np.ndarray  # (C, F)
    em_log_likelihoods: list = field(default=None, repr=False, compare=False)

    @property
    def num_components(self) -> int:
        return len(self.weights)

    @property
    def feature_dim(self) -> int:
        return self.means.shape[1]

    def component_log_prob(self, frames: np.ndarray) -> np.ndarray:
        """Per-frame, per-component log w_c + log N(x_t; m_c, diag v_c)."""
        inv_var = 1.0 / self.variances
        const = (np.log(self.weights)
                 - 0.5 * (self.feature_dim * LOG_2PI
                          + np.sum(np.log(self.variances), axis=1)
                          + np.sum(self.means ** 2 * inv_var, axis=1)))
        quad = (frames @ (self.means * inv_var).T
                - 0.5 * (frames ** 2) @ inv_var.T)
        return const + quad

    def log_likelihood(self, frames: np.ndarray) -> float:
        """Total log-likelihood of a frame matrix under the mixture."""
        return float(logsumexp(self.component_log_prob(frames), axis=1).sum())

    def responsibilities(self, frames: np.ndarray) -> np.ndarray:
        lp = self.component_log_prob(frames)
        return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


@dataclass(frozen=True)
class SuffStats:
    """Zeroth/first-order Baum-Welch statistics of one utterance."""

    n: np.ndarray  # (C,) responsibility mass
    f: np.ndarray  # (C, F) responsibility-weighted frame sums

    def __add__(self, other: "SuffStats") -> "SuffStats":
        return SuffStats(n=self.n + other.n, f=self.f + other.f)


@dataclass(frozen=True)
class UbmConfig:
    """EM schedule for binary-split UBM training."""

    split_iterations: int = 15
    final_iterations: int = 30
    split_scale: float = 0.2       # mean offset in units of component stddev
    variance_floor_frac: float = 1e-4
    min_component_frames: float = 3.0
    rel_tolerance: float = 1e-6    # early-stop on relative LL change


def _as_frames(feat) -> np.ndarray:
    if isinstance(feat, FeatureMatrix):
        return feat.frames
    return np.asarray(feat, dtype=np.float64)


def _em_fixed_size(frames, gmm, var_floor, cfg, iterations):
    """EM at fixed component count, stopping early once the total log
    likelihood stops moving; reseeds dead components by splitting the
    heaviest one, raising after two failed reseeds."""
    history = []
    reseeds = 0
    for _ in range(iterations):
        lp = gmm.component_log_prob(frames)
        per_frame = logsumexp(lp, axis=1)
        history.append(float(per_frame.sum()))
        if (len(history) >= 2
                and abs(history[-1] - history[-2])
                <= cfg.rel_tolerance * abs(history[-2])):
            break
        resp = np.exp(lp - per_frame[:, None])

        n = resp.sum(axis=0)
        dead = n < cfg.min_component_frames
        if dead.any():
            if reseeds >= 2:
                raise DegenerateComponent(
                    f"{int(dead.sum())} components below "
                    f"{cfg.min_component_frames} frames after two reseeds")
            reseeds += 1
            for c in np.flatnonzero(dead):
                donor = int(np.argmax(n))
                offset = cfg.split_scale * np.sqrt(gmm.variances[donor])
                gmm.means[c] = gmm.means[donor] + offset
                gmm.means[donor] = gmm.means[donor] - offset
                gmm.variances[c] = gmm.variances[donor]
                gmm.weights[c] = gmm.weights[donor] = gmm.weights[donor] / 2.0
                n[donor] /= 2.0
            continue

        f = resp.T @ frames
        sq = resp.T @ (frames ** 2)
        gmm.weights = n / n.sum()
        gmm.means = f / n[:, None]
        gmm.variances = np.maximum(sq / n[:, None] - gmm.means ** 2, var_floor)
    return history


def train_ubm(features, num_components: int, cfg: UbmConfig | None = None) -> DiagonalGmm:
    """Train the UBM by binary splitting from a single Gaussian.

    Each doubling runs cfg.split_iterations EM passes; the final size gets
    cfg.final_iterations. Deterministic: splitting perturbs means along the
    per-dimension standard deviation, no RNG involved.

    Args:
        features: iterable of FeatureMatrix (or raw frame arrays); frames
            are pooled for training.
        num_components: target component count, a power of two.

    Raises:
        InsufficientData: pooled frame count below 50 * num_components.
        DegenerateComponent: a component kept collapsing after reseeding.
    """
    cfg = cfg or UbmConfig()
    if num_components < 1 or num_components & (num_components - 1):
        raise ValueError(f"component count {num_components} is not a power of two")
    frames = np.vstack([_as_frames(f) for f in features])
    if len(frames) < 50 * num_components:
        raise InsufficientData(
            f"{len(frames)} pooled frames < {50 * num_components} required")

    global_var = frames.var(axis=0)
    var_floor = cfg.variance_floor_frac * global_var
    var_floor = np.maximum(var_floor, 1e-12)

    gmm = DiagonalGmm(
        weights=np.ones(1),
        means=frames.mean(axis=0, keepdims=True),
        variances=np.maximum(frames.var(axis=0, keepdims=True), var_floor),
        em_log_likelihoods=[],
    )

    while gmm.num_components < num_components:
        offset = cfg.split_scale * np.sqrt(gmm.variances)
        gmm = DiagonalGmm(
            weights=np.repeat(gmm.weights / 2.0, 2),
            means=np.vstack([gmm.means + offset, gmm.means - offset]
                            ).reshape(2, -1, gmm.feature_dim
                                      ).transpose(1, 0, 2).reshape(-1, gmm.feature_dim),
            variances=np.repeat(gmm.variances, 2, axis=0),
            em_log_likelihoods=gmm.em_log_likelihoods,
        )
        iters = (cfg.final_iterations if gmm.num_components == num_components
                 else cfg.split_iterations)
        gmm.em_log_likelihoods.append(
            _em_fixed_size(frames, gmm, var_floor, cfg, iters))
    if num_components == 1:
        gmm.em_log_likelihoods.append(
            _em_fixed_size(frames, gmm, var_floor, cfg, cfg.final_iterations))
    return gmm


def compute_stats(feat, ubm: DiagonalGmm) -> SuffStats:
    """Zeroth/first-order statistics of an utterance under the UBM.

    n_c = sum_t gamma_t(c), f_c = sum_t gamma_t(c) x_t with gamma the exact
    posterior responsibility (no Gaussian short-listing).
    """
    frames = _as_frames(feat)
    if frames.shape[1] != ubm.feature_dim:
        raise DimensionMismatch(
            f"frames have width {frames.shape[1]}, UBM expects {ubm.feature_dim}")
    resp = ubm.responsibilities(frames)
    return SuffStats(n=resp.sum(axis=0), f=resp.T @ frames)


def map_adapt_means(stats: SuffStats, ubm: DiagonalGmm,
                    relevance: float = 16.0) -> np.ndarray:
    """MAP-adapt component means and stack them into a supervector.

    m'_c = alpha_c (f_c / n_c) + (1 - alpha_c) m_c, alpha_c = n_c/(n_c + r).
    Components with zero mass keep the UBM mean. Output is component-major,
    length C*F.
    """
    if relevance <= 0:
        raise ValueError("relevance factor must be positive")
    if stats.f.shape != ubm.means.shape:
        raise DimensionMismatch(
            f"stats shape {stats.f.shape} vs UBM {ubm.means.shape}")
    n = stats.n
    alpha = n / (n + relevance)
    safe_n = np.where(n > 0, n, 1.0)
    data_mean = np.where(n[:, None] > 0, stats.f / safe_n[:, None], ubm.means)
    adapted = alpha[:, None] * data_mean + (1.0 - alpha[:, None]) * ubm.means
    return adapted.ravel()
