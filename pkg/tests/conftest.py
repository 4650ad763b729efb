import numpy as np
import pytest

from _synth import desk_observations


@pytest.fixture(scope="session")
def desk_data():
    """Synthetic desk-scale dataset shared across tests (fixed seed)."""
    return desk_observations()


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger jit compilation once so timed tests measure the algorithms."""
    from vmap import _kernels as kernels

    rng = np.random.default_rng(0)
    nodes = rng.uniform(size=(8, 4))
    values = rng.uniform(size=8)
    v = np.full(8, 0.9)
    betas = kernels.lsp_local_betas(nodes, values, v)
    kernels.lsp_predict(nodes, values, betas, np.full(8, 0.6), 1.5, rng.uniform(size=(2, 4)))
    codes = np.zeros(8, dtype=np.int64)
    tau = np.eye(3)
    kernels.cgp_corr(nodes, codes, codes, nodes, codes, codes, np.ones(4), tau, tau)
    basis = np.ones((8, 1))
    chol = np.linalg.cholesky(basis.T @ basis)
    resid = values - values.mean()
    kernels.mars_scan(
        basis, chol, resid, nodes,
        np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64),
        np.unique(nodes[:, 0]), np.array([0, 8], dtype=np.int64),
        float(resid @ resid),
    )
    return True
