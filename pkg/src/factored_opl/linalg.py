"""Moore-Penrose pseudoinverse for the small dense matrices used by the
projection estimators.

The second-moment matrices of action indicators are symmetric PSD and
rank-deficient whenever some indicator coordinate has zero logging mass,
so a relative singular-value cutoff is applied.
"""
import numpy as np

DEFAULT_TOL = 1e-10


def pinv(m: np.ndarray, tol: float = DEFAULT_TOL, symmetric: bool = False) -> np.ndarray:
    """Pseudoinverse via SVD, zeroing singular values below ``tol * sigma_max``.

    With ``symmetric=True`` a symmetric eigendecomposition is used instead,
    which is faster and returns an exactly symmetric result.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("matrix contains non-finite entries")
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must be in (0, 1), got {tol}")
    if symmetric:
        return pinv_symmetric_stack(m[None])[0]
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    cutoff = tol * (s[0] if s.size else 0.0)
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (vt.T * inv_s) @ u.T


def pinv_symmetric_stack(mats: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Batched pseudoinverse of a stack of symmetric matrices, shape (..., d, d)."""
    mats = np.asarray(mats, dtype=np.float64)
    if not np.isfinite(mats).all():
        raise ValueError("matrix stack contains non-finite entries")
    w, v = np.linalg.eigh(mats)
    cutoff = tol * np.abs(w).max(axis=-1, keepdims=True)
    keep = np.abs(w) > cutoff
    inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    out = (v * inv_w[..., None, :]) @ np.swapaxes(v, -1, -2)
    # eigh output is symmetric up to rounding; make it exact
    return 0.5 * (out + np.swapaxes(out, -1, -2))
