"""Simplified Gaussian PLDA: EM training, pairwise LLR scoring, and the
precomputed identification path used for large-gallery queries.

The generative model is eta = mu + V y + eps with y a standard-normal
speaker factor (speaker_dim wide) and eps a full-covariance residual.
The same/different-speaker log-likelihood ratio reduces exactly to a
quadratic form in speaker-subspace projections of the two i-vectors, so
gallery-side terms can be precomputed once and a query costs one skinny
matrix-vector product.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .embedding import IVector
from .errors import (
    DimensionMismatch,
    InsufficientSpeakers,
    NonConvergence,
    NotNormalized,
)


@dataclass
class PldaModel:
    """PLDA parameters plus the derived scoring operators.

    Derived pieces (filled by finalize()):
      projection: (speaker_dim x ivector_dim) map taking a centered
          i-vector into the speaker-discriminant subspace.
      quad_weight: symmetric matrix weighting each side's projected
          self-term in the LLR.
      cross_weight: symmetric matrix weighting the enrollment/test
          interaction term.
      offset: additive constant completing the exact LLR.
    """

    mu: np.ndarray
    V: np.ndarray
    Sigma: np.ndarray
    projection: np.ndarray = field(default=None, repr=False)
    quad_weight: np.ndarray = field(default=None, repr=False)
    cross_weight: np.ndarray = field(default=None, repr=False)
    offset: float = 0.0
    em_log_likelihoods: list = field(default=None, repr=False, compare=False)

    @property
    def ivector_dim(self) -> int:
        return len(self.mu)

    @property
    def speaker_dim(self) -> int:
        return self.V.shape[1]

    def finalize(self) -> "PldaModel":
        """Derive the reduced-dimension scoring operators from (mu, V, Sigma).

        With total covariance T = V V^T + Sigma and M = V^T T^-1 V
        (eigenvalues strictly inside (0, 1)), the exact LLR operators are
        projection P = V^T T^-1, quad_weight -(1/2)(I-M^2)^-1 M,
        cross_weight (1/2)(I-M^2)^-1 and offset -(1/2) log det(I - M^2).
        """
        total = self.V @ self.V.T + self.Sigma
        total = 0.5 * (total + total.T)
        # C-contiguous so the projection multiplies identically whether the
        # model was just fitted or reloaded from a container (BLAS picks
        # its kernel, and therefore its rounding, by memory layout)
        self.projection = np.ascontiguousarray(
            np.linalg.solve(total, self.V).T)
        m_mat = self.projection @ self.V
        s, u = np.linalg.eigh(0.5 * (m_mat + m_mat.T))
        s = np.clip(s, 1e-12, 1.0 - 1e-12)
        self.quad_weight = (u * (-0.5 * s / (1.0 - s ** 2))) @ u.T
        self.cross_weight = (u * (0.5 / (1.0 - s ** 2))) @ u.T
        self.offset = float(-0.5 * np.sum(np.log(1.0 - s ** 2)))
        return self

    def project(self, eta: np.ndarray) -> np.ndarray:
        return self.projection @ (eta - self.mu)


@dataclass(frozen=True)
class PldaConfig:
    iterations: int = 10
    rel_tolerance: float = 1e-8
    sigma_floor_eig: float = 1e-10
    sigma_floor_scale: float = 1e-8


@dataclass(frozen=True)
class IdentificationIndex:
    """Precomputed gallery terms for one-vs-all identification scoring."""

    self_terms: np.ndarray     # (n,) projected-enrollment self scores
    weighted_rows: np.ndarray  # (n, speaker_dim) cross-ready rows
    utterance_ids: tuple

    @property
    def size(self) -> int:
        return len(self.self_terms)


def _check_normalized(iv: IVector, what: str):
    if not isinstance(iv, IVector) or not iv.normalized:
        raise NotNormalized(f"{what} i-vector must be length-normalized")


def _as_eta(iv) -> np.ndarray:
    return iv.eta if isinstance(iv, IVector) else np.asarray(iv, dtype=np.float64)


def train_plda(ivectors, speaker_dim: int, cfg: PldaConfig | None = None,
               seed: int = 0) -> PldaModel:
    """EM estimation of the PLDA parameters from labeled i-vectors.

    Args:
        ivectors: iterable of (speaker_label, i-vector) pairs; i-vectors
            should be the centered, length-normalized embeddings.
        speaker_dim: speaker-subspace width.

    Raises:
        InsufficientSpeakers: fewer than speaker_dim speakers with at
            least two utterances.
        NonConvergence: the marginal likelihood decreased beyond
            tolerance (indicates a bug, not bad data).
    """
    cfg = cfg or PldaConfig()
    if speaker_dim < 1:
        raise ValueError("speaker subspace must have positive dimension")

    by_speaker: dict = {}
    for label, iv in ivectors:
        by_speaker.setdefault(label, []).append(_as_eta(iv))
    multi = sum(1 for vs in by_speaker.values() if len(vs) >= 2)
    if multi < speaker_dim:
        raise InsufficientSpeakers(
            f"{multi} speakers with >= 2 utterances, need {speaker_dim}")

    X = np.vstack([v for vs in by_speaker.values() for v in vs])
    n_total, dim = X.shape
    if speaker_dim > dim:
        raise ValueError(f"speaker dim {speaker_dim} exceeds i-vector dim {dim}")
    mu = X.mean(axis=0)
    Xc = X - mu
    counts = np.array([len(vs) for vs in by_speaker.values()])
    second_moment = Xc.T @ Xc

    # per-speaker sums of centered vectors, grouped by session count
    offsets = np.concatenate([[0], np.cumsum(counts)])
    sums = np.vstack([Xc[offsets[i]:offsets[i + 1]].sum(axis=0)
                      for i in range(len(counts))])

    rng = np.random.default_rng(seed)
    total_var = float(np.trace(second_moment)) / n_total
    V = rng.standard_normal((dim, speaker_dim)) * np.sqrt(
        total_var / (2.0 * speaker_dim))
    Sigma = second_moment / n_total + 1e-6 * total_var * np.eye(dim)

    eye_k = np.eye(speaker_dim)
    history = []
    for _ in range(cfg.iterations):
        sigma_inv = np.linalg.inv(Sigma)
        sigma_inv = 0.5 * (sigma_inv + sigma_inv.T)
        t1 = V.T @ sigma_inv                       # (k, d)
        mvv = t1 @ V
        mvv = 0.5 * (mvv + mvv.T)

        ll = -0.5 * (n_total * dim * np.log(2.0 * np.pi)
                     + n_total * np.linalg.slogdet(Sigma)[1]
                     + float(np.sum(sigma_inv * second_moment)))
        r_acc = np.zeros((speaker_dim, speaker_dim))
        c_acc = np.zeros((dim, speaker_dim))
        for count in np.unique(counts):
            sel = counts == count
            f_grp = sums[sel]                      # (m, d)
            post_prec = eye_k + count * mvv
            prec_inv = np.linalg.inv(post_prec)
            prec_inv = 0.5 * (prec_inv + prec_inv.T)
            proj = f_grp @ t1.T                    # (m, k)
            ey = proj @ prec_inv                   # posterior means
            m_grp = int(sel.sum())
            ll += -0.5 * (m_grp * np.linalg.slogdet(post_prec)[1]
                          - float(np.sum(ey * proj)))
            r_acc += count * (m_grp * prec_inv + ey.T @ ey)
            c_acc += f_grp.T @ ey
        history.append(float(ll))
        if len(history) > 1:
            prev = history[-2]
            if ll < prev - cfg.rel_tolerance * abs(prev):
                raise NonConvergence(
                    f"marginal likelihood fell from {prev} to {ll}")

        V = np.linalg.solve(r_acc.T, c_acc.T).T
        Sigma = (second_moment - V @ c_acc.T) / n_total
        Sigma = 0.5 * (Sigma + Sigma.T)
        eigs = np.linalg.eigvalsh(Sigma)
        if eigs[0] < cfg.sigma_floor_eig:
            Sigma += cfg.sigma_floor_scale * (np.trace(Sigma) / dim) * np.eye(dim)

    model = PldaModel(mu=mu, V=V, Sigma=Sigma, em_log_likelihoods=history)
    return model.finalize()


def score_pairwise(enroll: IVector, test: IVector, model: PldaModel) -> float:
    """Exact same/different-speaker LLR for one enrollment/test pair."""
    _check_normalized(enroll, "enrollment")
    _check_normalized(test, "test")
    if enroll.dim != model.ivector_dim or test.dim != model.ivector_dim:
        raise DimensionMismatch(
            f"i-vector dims ({enroll.dim}, {test.dim}) vs model "
            f"{model.ivector_dim}")
    e = model.project(enroll.eta)
    t = model.project(test.eta)
    return float(e @ model.quad_weight @ e
                 + t @ model.quad_weight @ t
                 + 2.0 * (e @ model.cross_weight @ t)
                 + model.offset)


def build_index(enrollment, model: PldaModel,
                dtype=np.float64) -> IdentificationIndex:
    """Precompute the gallery-side scoring terms.

    For each enrollment i-vector, stores its projected self-term and its
    cross-ready row; both are all a query needs besides its own projection.
    dtype may be float32 to halve memory for very large galleries.
    """
    ids = []
    etas = []
    for utt_id, iv in enrollment:
        _check_normalized(iv, "enrollment")
        ids.append(utt_id)
        etas.append(iv.eta)
    if not ids:
        raise ValueError("enrollment collection is empty")
    E = np.vstack(etas)
    if E.shape[1] != model.ivector_dim:
        raise DimensionMismatch(
            f"enrollment dim {E.shape[1]} vs model {model.ivector_dim}")
    proj = (E - model.mu) @ model.projection.T
    self_terms = np.einsum("ij,ij->i", proj @ model.quad_weight, proj)
    weighted = proj @ model.cross_weight
    return IdentificationIndex(self_terms=self_terms.astype(dtype),
                               weighted_rows=weighted.astype(dtype),
                               utterance_ids=tuple(ids))


def score_projected(query: np.ndarray, index: IdentificationIndex,
                    workers: int = 1) -> np.ndarray:
    """Score an already speaker-space-projected query against the index.

    Returns self_terms + 2 * weighted_rows @ query; the query self-term
    and the pair constant are omitted since they shift every gallery row
    equally and cannot change the ranking. The row product is partitioned
    across `workers` threads; per-row summation order is fixed so results
    are bit-identical for any worker count.
    """
    rows = index.weighted_rows
    query = np.asarray(query, dtype=rows.dtype)
    if query.shape != (rows.shape[1],):
        raise DimensionMismatch(
            f"projected query shape {query.shape} vs index rows "
            f"{rows.shape[1]}")
    # einsum (not BLAS gemv) for the row dots: its accumulation order
    # depends only on each row, never on where a partition starts, which
    # is what keeps the output bit-identical across worker counts.
    if workers <= 1 or index.size < 4096:
        cross = np.einsum("ij,j->i", rows, query)
    else:
        cross = np.empty(index.size, dtype=rows.dtype)
        bounds = np.linspace(0, index.size, workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(
                lambda se: np.einsum("ij,j->i", rows[se[0]:se[1]], query,
                                     out=cross[se[0]:se[1]]),
                zip(bounds[:-1], bounds[1:])))
    return index.self_terms + 2.0 * cross


def score_all(test: IVector, index: IdentificationIndex, model: PldaModel,
              workers: int = 1) -> np.ndarray:
    """Score a query i-vector against every gallery row at once."""
    _check_normalized(test, "test")
    if test.dim != model.ivector_dim:
        raise DimensionMismatch(
            f"test dim {test.dim} vs model {model.ivector_dim}")
    query = model.project(test.eta)
    return score_projected(query, index, workers=workers)
