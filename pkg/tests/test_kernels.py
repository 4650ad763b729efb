"""Numba and numpy kernel paths must agree on the same inputs."""

import numpy as np
import pytest

from vmap import _kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba unavailable")


@pytest.fixture(scope="module")
def lsp_setup():
    rng = np.random.default_rng(11)
    n, p = 60, 4
    nodes = rng.uniform(size=(n, p))
    values = np.sin(nodes @ np.array([3.0, -2.0, 1.0, 4.0]))
    diff = nodes[:, None, :] - nodes[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    off = dist + np.diag(np.full(n, np.inf))
    r = np.partition(off, 5, axis=1)[:, 5]
    u = np.minimum(dist.max() / 2, r)
    v = 1.1 * r
    return nodes, values, u, v, float(dist.max())


@needs_numba
class TestPathEquality:
    def test_lsp_local_betas(self, lsp_setup):
        nodes, values, _, v, _ = lsp_setup
        a = K.lsp_local_betas_numba(nodes, values, v)
        b = K.lsp_local_betas_numpy(nodes, values, v)
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-11)

    def test_lsp_predict(self, lsp_setup):
        nodes, values, u, v, dmax = lsp_setup
        betas = K.lsp_local_betas_numpy(nodes, values, v)
        rng = np.random.default_rng(12)
        queries = np.vstack([rng.uniform(size=(50, 4)), nodes[:5]])
        pa, fa = K.lsp_predict_numba(nodes, values, betas, u, dmax, queries)
        pb, fb = K.lsp_predict_numpy(nodes, values, betas, u, dmax, queries)
        np.testing.assert_allclose(pa, pb, rtol=1e-10)
        assert (fa == fb).all()

    def test_cgp_corr(self):
        rng = np.random.default_rng(13)
        x1 = rng.uniform(size=(30, 4))
        x2 = rng.uniform(size=(20, 4))
        za1 = rng.integers(0, 3, 30)
        zb1 = rng.integers(0, 3, 30)
        za2 = rng.integers(0, 3, 20)
        zb2 = rng.integers(0, 3, 20)
        theta = np.array([0.5, 2.0, 1.0, 3.3])
        tau_a = np.array([[1.0, 0.6, 0.2], [0.6, 1.0, 0.4], [0.2, 0.4, 1.0]])
        tau_b = np.array([[1.0, -0.3, 0.1], [-0.3, 1.0, 0.5], [0.1, 0.5, 1.0]])
        a = K.cgp_corr_numba(x1, za1, zb1, x2, za2, zb2, theta, tau_a, tau_b)
        b = K.cgp_corr_numpy(x1, za1, zb1, x2, za2, zb2, theta, tau_a, tau_b)
        np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_mars_scan(self):
        rng = np.random.default_rng(14)
        n = 150
        x = rng.uniform(size=(n, 4))
        y = 1.0 + np.maximum(x[:, 2] - 0.4, 0) * 3.0 + 0.05 * rng.standard_normal(n)
        basis = np.column_stack([np.ones(n), np.maximum(x[:, 0] - 0.5, 0)])
        coef = np.linalg.lstsq(basis, y, rcond=None)[0]
        resid = y - basis @ coef
        rss = float(resid @ resid)
        chol = np.linalg.cholesky(basis.T @ basis + 1e-12 * np.eye(2))
        pair_parent = np.array([0, 0, 0, 0, 1, 1, 1], dtype=np.int64)
        pair_var = np.array([0, 1, 2, 3, 1, 2, 3], dtype=np.int64)
        chunks = []
        offsets = [0]
        for parent, var in zip(pair_parent, pair_var):
            active = basis[:, parent] != 0
            chunk = np.unique(x[active, var])
            chunks.append(chunk)
            offsets.append(offsets[-1] + chunk.size)
        knots = np.concatenate(chunks)
        off = np.asarray(offsets, dtype=np.int64)
        pa, ka, da = K.mars_scan_numba(basis, chol, resid, x, pair_parent, pair_var, knots, off, rss)
        pb, kb, db = K.mars_scan_numpy(basis, chol, resid, x, pair_parent, pair_var, knots, off, rss)
        assert pa == pb
        assert ka == pytest.approx(kb, abs=0)
        assert da == pytest.approx(db, rel=1e-9)
        # the winning pair must target the active variable
        assert pair_var[pa] == 2


class TestDispatch:
    def test_flag_selects_numpy(self, monkeypatch):
        monkeypatch.setenv("VMAP_NUMBA", "0")
        assert K._numba_enabled() is False

    def test_default_follows_availability(self, monkeypatch):
        monkeypatch.delenv("VMAP_NUMBA", raising=False)
        assert K._numba_enabled() == K.HAVE_NUMBA
