"""PPCA supervector compression and i-vector post-processing.

The compressor follows the probabilistic PCA latent model
x = W z + mean + noise with isotropic noise; the utterance embedding is
the latent posterior mean, which collapses to a single precomputed
projection of the centered supervector (no per-utterance matrix inverse).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.linalg import LinAlgError

from .errors import DimensionMismatch, InsufficientData, RankDeficient, ZeroVector


@dataclass(frozen=True)
class IVector:
    """Utterance embedding; `normalized` marks unit Euclidean length."""

    eta: np.ndarray
    normalized: bool = False

    @property
    def dim(self) -> int:
        return len(self.eta)


@dataclass
class PpcaModel:
    """Trained supervector compressor.

    basis is the latent posterior-mean projection (latent_dim x input_dim);
    its rows span the same subspace as the top principal directions of the
    training population.
    """

    mean_sv: np.ndarray
    basis: np.ndarray
    noise_variance: float
    em_log_likelihoods: list = None

    @property
    def latent_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def input_dim(self) -> int:
        return self.basis.shape[1]

    def orthonormal_basis(self) -> np.ndarray:
        """Orthonormalized row basis spanning the learned subspace."""
        _, _, vt = np.linalg.svd(self.basis, full_matrices=False)
        return vt


@dataclass(frozen=True)
class PpcaConfig:
    iterations: int = 10
    rel_tolerance: float = 1e-6
    # forming the N x N Gram matrix for the exact rank check is skipped
    # above this flop budget; EM solves still trap degenerate inputs
    rank_check_budget: float = 2e10


def train_ppca(supervectors: np.ndarray, latent_dim: int,
               cfg: PpcaConfig | None = None, seed: int = 0) -> PpcaModel:
    """Fit PPCA by EM on a population of supervectors.

    Initialization projects the data onto a random-then-orthonormalized
    sketch, so the starting subspace is already data-driven; EM refines it.
    The per-iteration marginal likelihood is recorded and non-decreasing.

    Raises:
        InsufficientData: sample count not above latent_dim.
        RankDeficient: data spans fewer directions than latent_dim.
    """
    cfg = cfg or PpcaConfig()
    X = np.asarray(supervectors, dtype=np.float64)
    n, d = X.shape
    if n <= latent_dim:
        raise InsufficientData(f"{n} samples for latent dim {latent_dim}")
    if latent_dim < 1 or latent_dim > d:
        raise ValueError(f"latent dim {latent_dim} outside [1, {d}]")

    mean_sv = X.mean(axis=0)
    Xc = X - mean_sv

    if n * n * d <= cfg.rank_check_budget:
        gram_eigs = np.linalg.eigvalsh(Xc @ Xc.T)
        effective = int((gram_eigs > max(gram_eigs[-1], 1e-300) * 1e-12).sum())
        if effective < latent_dim:
            raise RankDeficient(
                f"data rank {effective} below latent dim {latent_dim}")

    rng = np.random.default_rng(seed)
    sketch = np.linalg.qr(rng.standard_normal((n, latent_dim)))[0]
    W = Xc.T @ sketch                      # (d, q) data-driven start
    total_sq = float(np.sum(Xc ** 2))
    sigma2 = max(total_sq / (n * d), 1e-12)

    history = []
    eye = np.eye(latent_dim)
    for _ in range(cfg.iterations):
        M = W.T @ W + sigma2 * eye
        G = Xc @ W                         # (n, q)
        try:
            Minv_GtG = np.linalg.solve(M, G.T @ G)
            ll = -0.5 * (n * d * np.log(2.0 * np.pi)
                         + n * ((d - latent_dim) * np.log(sigma2)
                                + np.linalg.slogdet(M)[1])
                         + (total_sq - np.trace(Minv_GtG)) / sigma2)
            history.append(float(ll))

            Z = np.linalg.solve(M, G.T).T  # (n, q) posterior means
            Szz = sigma2 * n * np.linalg.inv(M) + Z.T @ Z
            Sxz = Xc.T @ Z                 # (d, q)
            W = np.linalg.solve(Szz.T, Sxz.T).T
        except LinAlgError as exc:
            raise RankDeficient(f"EM normal equations singular: {exc}") from exc
        sigma2 = (total_sq - 2.0 * np.sum(W * Sxz)
                  + np.sum(Szz * (W.T @ W))) / (n * d)
        sigma2 = max(float(sigma2), 1e-12)
        if len(history) > 1 and abs(history[-1] - history[-2]) <= (
                cfg.rel_tolerance * abs(history[-2])):
            break

    M = W.T @ W + sigma2 * eye
    basis = np.linalg.solve(M, W.T)        # posterior-mean projection (q, d)
    return PpcaModel(mean_sv=mean_sv, basis=basis, noise_variance=sigma2,
                     em_log_likelihoods=history)


def extract_ivector(supervector: np.ndarray, model: PpcaModel) -> IVector:
    """Compress a supervector to an (unnormalized) utterance embedding.

    A single matrix-vector product against the precomputed projection;
    deterministic, no per-utterance inversion.
    """
    sv = np.asarray(supervector, dtype=np.float64)
    if sv.shape != (model.input_dim,):
        raise DimensionMismatch(
            f"supervector length {sv.shape} vs model {model.input_dim}")
    return IVector(eta=model.basis @ (sv - model.mean_sv), normalized=False)


def center_and_normalize(ivector: IVector, global_mean: np.ndarray) -> IVector:
    """Center by the population mean, then scale to unit length.

    Raises:
        ZeroVector: the centered vector is numerically zero.
    """
    if ivector.normalized:
        raise ValueError("i-vector is already normalized")
    mean = np.asarray(global_mean, dtype=np.float64)
    if mean.shape != ivector.eta.shape:
        raise DimensionMismatch("global mean length differs from i-vector")
    eta = ivector.eta - mean
    norm = float(np.linalg.norm(eta))
    if norm < 1e-12:
        raise ZeroVector("centered i-vector has no direction")
    return IVector(eta=eta / norm, normalized=True)
