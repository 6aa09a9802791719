"""Small Hermitian linear-algebra helpers shared by the rate functions.

Hermitian matrices are plain complex ``ndarray`` objects.  ``as_hermitian``
validates and symmetrizes its input so downstream code can rely on exact
conjugate symmetry.
"""

import numpy as np

from .errors import DomainError

LN2 = np.log(2.0)


def as_hermitian(a, psd=False, name="matrix"):
    """Return ``a`` as a read-only complex Hermitian array.

    The result is ``(a + a^H) / 2`` so that ``out[i, j] == conj(out[j, i])``
    holds exactly.  With ``psd=True`` the smallest eigenvalue is checked
    against ``-1e-9 * ||a||_2``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    asym = np.abs(a - a.conj().T).max() if a.size else 0.0
    scale = max(np.abs(a).max() if a.size else 0.0, 1.0)
    if asym > 1e-8 * scale:
        raise ValueError(f"{name} is not Hermitian (asymmetry {asym:.3g})")
    out = 0.5 * (a + a.conj().T)
    if psd and not is_psd(out):
        raise ValueError(f"{name} is not positive semidefinite")
    out.setflags(write=False)
    return out


def is_psd(a, rtol=1e-9):
    w = np.linalg.eigvalsh(a)
    norm = np.abs(w).max() if w.size else 0.0
    return bool(w.min() >= -rtol * norm)


def log2det(a):
    """log2 det of a Hermitian positive definite matrix via Cholesky.

    Works on stacked arrays ``(..., d, d)``.  Raises ``DomainError`` if any
    argument is not numerically positive definite.
    """
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise DomainError("log-det argument is not positive definite") from exc
    diag = np.abs(np.diagonal(c, axis1=-2, axis2=-1))
    return 2.0 * np.log2(diag).sum(axis=-1)


def replication(m, n):
    """Replication operator ``1_m kron I_n`` as a ``(m*n, n)`` matrix."""
    return np.kron(np.ones((m, 1)), np.eye(n)).astype(complex)


def block_diag(*blocks):
    """Block diagonal matrix; zero-size blocks are allowed."""
    sizes = [b.shape[-1] for b in blocks]
    d = sum(sizes)
    out = np.zeros(blocks[0].shape[:-2] + (d, d), dtype=complex)
    i = 0
    for b, s in zip(blocks, sizes):
        out[..., i:i + s, i:i + s] = b
        i += s
    return out


def hermitian_basis(n):
    """Real basis of the n x n Hermitian matrices, shape ``(n*n, n, n)``.

    Diagonal units come first, then for each ``i < j`` the symmetric pair
    ``E_ij + E_ji`` followed by ``1j*(E_ij - E_ji)``.
    """
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1j
            e[j, i] = -1j
            basis.append(e)
    return np.array(basis)


def hermitian_coords(a):
    """Coordinates of Hermitian ``a`` (``(..., n, n)``) in ``hermitian_basis``."""
    n = a.shape[-1]
    coords = [a[..., i, i].real for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            coords.append(a[..., i, j].real)
            coords.append(a[..., i, j].imag)
    return np.stack(coords, axis=-1)
