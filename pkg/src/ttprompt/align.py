"""SVD alignment of node features into a common latent dimension.

Each graph is decomposed independently; the aligned matrix is X V_k where
V_k holds the top right-singular vectors. Signs are fixed so the
largest-magnitude entry of each right-singular vector is positive, making
the output deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class AlignedFeatures:
    matrix: np.ndarray
    target_dim: int


def svd_align(features, d_a):
    """Project features onto the top d_a right-singular directions.

    If d_a exceeds the number of available singular vectors, the extra
    columns are zero.
    """
    if d_a < 1:
        raise ValueError(f"alignment dimension must be >= 1, got {d_a}")
    features = np.asarray(features, dtype=np.float64)
    if features.size == 0:
        raise DataError("cannot align an empty feature matrix")
    if not np.all(np.isfinite(features)):
        raise DataError("non-finite entries in feature matrix")

    _, _, vt = np.linalg.svd(features, full_matrices=False)
    flip = vt[np.arange(vt.shape[0]), np.argmax(np.abs(vt), axis=1)] < 0
    vt[flip] *= -1.0

    k = min(d_a, vt.shape[0])
    out = np.zeros((features.shape[0], d_a))
    out[:, :k] = features @ vt[:k].T
    return AlignedFeatures(matrix=out, target_dim=int(d_a))
