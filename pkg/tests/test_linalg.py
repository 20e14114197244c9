import numpy as np
import pytest

import factored_opl as fo
from factored_opl.linalg import pinv, pinv_symmetric_stack


def random_psd(rng, dim):
    a = rng.standard_normal((dim, max(1, dim // 2)))
    return a @ a.T


def test_pinv_identity():
    assert np.allclose(pinv(np.eye(4)), np.eye(4), atol=1e-12)


def test_pinv_diagonal_zeroes_null_directions():
    out = pinv(np.diag([2.0, 0.0]))
    assert np.allclose(out, np.diag([0.5, 0.0]), atol=1e-12)


def test_pinv_gamma_uniform_logging():
    # Gamma for uniform logging over the 4 actions of a (2,2) scheme,
    # marginal mode; built independently by explicit summation here
    scheme = fo.FeatureScheme(cards=(2, 2), s=2)
    space = fo.ActionSpace.full(scheme)
    table = space.indicators(fo.MARGINAL)
    gamma = sum(0.25 * np.outer(row, row) for row in table)
    out = pinv(gamma, symmetric=True)
    assert np.abs(gamma @ out @ gamma - gamma).max() < 1e-10


@pytest.mark.parametrize("dim", [3, 8, 16, 64])
@pytest.mark.parametrize("symmetric", [False, True])
def test_penrose_conditions_random_psd(dim, symmetric):
    rng = np.random.default_rng(dim)
    for _ in range(5):
        m = random_psd(rng, dim)
        out = pinv(m, symmetric=symmetric)
        assert np.abs(m @ out @ m - m).max() < 1e-8
        assert np.abs(out @ m @ out - out).max() < 1e-8
        assert np.abs(m @ out - (m @ out).T).max() < 1e-8
        assert np.abs(out @ m - (out @ m).T).max() < 1e-8


def test_pinv_involution_on_full_rank_symmetric():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 6))
    m = a @ a.T + 6 * np.eye(6)
    assert np.abs(pinv(pinv(m, symmetric=True), symmetric=True) - m).max() < 1e-6


def test_pinv_rejects_bad_inputs():
    with pytest.raises(ValueError):
        pinv(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        pinv(np.eye(2), tol=0.0)
    with pytest.raises(ValueError):
        pinv(np.eye(2), tol=1.5)


def test_symmetric_stack_matches_single():
    rng = np.random.default_rng(3)
    mats = np.stack([random_psd(rng, 5) for _ in range(4)])
    stacked = pinv_symmetric_stack(mats)
    for i in range(4):
        assert np.allclose(stacked[i], pinv(mats[i]), atol=1e-9)
        assert np.array_equal(stacked[i], stacked[i].T)
