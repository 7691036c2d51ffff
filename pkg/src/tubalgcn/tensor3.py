"""Dense third-order tensor algebra built on the M-product.

Tensors are plain numpy arrays of shape (I, J, T) in C order.  The third
axis is time: the tube at (i, j) is ``x[i, j, :]`` and the frontal slice
at time t is ``x[:, :, t]``.  Real tensors use float64, complex ones
complex128.

Layout convention for unfold3/fold3: ``unfold3`` produces a T x (I*J)
matrix whose column ``i*J + j`` is the tube at (i, j).  fold3 inverts it.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "as_tensor3",
    "mode_n_product",
    "unfold3",
    "fold3",
    "m_transform",
    "m_inverse_transform",
    "facewise_product",
    "m_product",
]

# Imaginary residue allowed when demoting a complex result that should be
# real (e.g. the DFT-based M-product of real operands).
IMAG_RESIDUE_TOL = 1e-8


class DimensionMismatchError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


def as_tensor3(x) -> np.ndarray:
    """Coerce ``x`` to a 3-d float64/complex128 array."""
    a = np.asarray(x)
    if a.ndim != 3:
        raise DimensionMismatchError(f"expected a third-order tensor, got ndim={a.ndim}")
    if np.iscomplexobj(a):
        return a.astype(np.complex128, copy=False)
    return a.astype(np.float64, copy=False)


def _as_matrix(u) -> np.ndarray:
    a = np.asarray(u)
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got ndim={a.ndim}")
    if np.iscomplexobj(a):
        return a.astype(np.complex128, copy=False)
    return a.astype(np.float64, copy=False)


def mode_n_product(x, u, n: int) -> np.ndarray:
    """Mode-n product of a third-order tensor with a matrix.

    Axis ``n`` is 1-based (n in {1, 2, 3}).  The size of x along axis n
    must equal u's column count; that axis is replaced by u's row count.
    """
    x = as_tensor3(x)
    u = _as_matrix(u)
    if n not in (1, 2, 3):
        raise DimensionMismatchError(f"axis must be 1, 2 or 3, got {n}")
    ax = n - 1
    if u.shape[1] != x.shape[ax]:
        raise DimensionMismatchError(
            f"mode-{n} product: matrix has {u.shape[1]} columns but tensor "
            f"axis {n} has size {x.shape[ax]}"
        )
    out = np.tensordot(u, x, axes=([1], [ax]))
    # tensordot puts the new axis first; rotate it back into place.
    return np.moveaxis(out, 0, ax)


def unfold3(x) -> np.ndarray:
    """Stack the tubes of x as columns of a T x (I*J) matrix."""
    x = as_tensor3(x)
    i, j, t = x.shape
    return x.reshape(i * j, t).T.copy()


def fold3(m, dims) -> np.ndarray:
    """Inverse of unfold3 for the given target dims (I, J, T)."""
    m = _as_matrix(m)
    i, j, t = dims
    if m.shape != (t, i * j):
        raise DimensionMismatchError(
            f"fold3: matrix shape {m.shape} inconsistent with dims {dims}"
        )
    return m.T.reshape(i, j, t).copy()


def m_transform(x, m) -> np.ndarray:
    """Mode-3 product with a T x T transform matrix."""
    x = as_tensor3(x)
    m = _as_matrix(m)
    t = x.shape[2]
    if m.shape != (t, t):
        raise DimensionMismatchError(
            f"m_transform: transform is {m.shape}, tensor has T={t}"
        )
    return mode_n_product(x, m, 3)


def m_inverse_transform(x, tm) -> np.ndarray:
    """Undo the M-transform using the precomputed inverse of ``tm``."""
    return m_transform(x, tm.m_inv)


def facewise_product(x, y) -> np.ndarray:
    """Slice-by-slice matrix product of two tensors (I,J,T) x (J,K,T)."""
    x = as_tensor3(x)
    y = as_tensor3(y)
    if x.shape[2] != y.shape[2]:
        raise DimensionMismatchError(
            f"facewise product: T mismatch {x.shape[2]} vs {y.shape[2]}"
        )
    if x.shape[1] != y.shape[0]:
        raise DimensionMismatchError(
            f"facewise product: inner dims {x.shape[1]} vs {y.shape[0]}"
        )
    return np.einsum("ijt,jkt->ikt", x, y)


def _demote_real(z: np.ndarray, tol: float = IMAG_RESIDUE_TOL) -> np.ndarray:
    residue = np.max(np.abs(z.imag)) if np.iscomplexobj(z) else 0.0
    if residue > tol:
        raise ValueError(f"imaginary residue {residue:.3e} exceeds tolerance {tol:.0e}")
    return np.ascontiguousarray(z.real) if np.iscomplexobj(z) else z


def m_product(x, y, tm) -> np.ndarray:
    """M-product: transform both operands, multiply face-wise, transform back.

    For real operands the result is demoted to real (the imaginary residue
    is asserted small); complex operands yield a complex result.
    """
    x = as_tensor3(x)
    y = as_tensor3(y)
    xh = m_transform(x, tm.m)
    yh = m_transform(y, tm.m)
    z = m_transform(facewise_product(xh, yh), tm.m_inv)
    if not np.iscomplexobj(x) and not np.iscomplexobj(y):
        return _demote_real(z)
    return z
