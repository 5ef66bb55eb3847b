"""Mesh smoothness regularization for stage-2 vertex optimization."""

import numpy as np
import scipy.sparse as sp


def umbrella_matrix(faces: np.ndarray, n_vertices: int) -> sp.csr_matrix:
    """Uniform graph Laplacian L = I - D^-1 A over the face edge graph.

    Rows of isolated vertices are zero so they carry no penalty.
    """
    faces = np.asarray(faces, dtype=np.int64)
    ii = np.concatenate([faces[:, 0], faces[:, 1], faces[:, 2],
                         faces[:, 1], faces[:, 2], faces[:, 0]])
    jj = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0],
                         faces[:, 0], faces[:, 1], faces[:, 2]])
    adj = sp.coo_matrix((np.ones(len(ii)), (ii, jj)),
                        shape=(n_vertices, n_vertices)).tocsr()
    adj.data[:] = 1.0  # csr conversion summed duplicate edges; rebinarize
    degree = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.zeros(n_vertices)
    connected = degree > 0
    inv[connected] = 1.0 / degree[connected]
    lap = sp.diags(connected.astype(np.float64)) - sp.diags(inv) @ adj
    return lap.tocsr()


def laplacian_energy(lap: sp.csr_matrix,
                     vertices: np.ndarray) -> tuple[float, np.ndarray]:
    """Energy ||L v||^2 and its gradient 2 L^T (L v)."""
    d = lap @ vertices
    return float((d * d).sum()), 2.0 * (lap.T @ d)
