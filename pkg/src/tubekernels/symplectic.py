"""Symplectic linear algebra on R^{2n} and the Gaussian kernels built from it.

Real vectors ``v = (a_1..a_n, b_1..b_n)`` are identified with complex vectors
``Z = a + i b``.  With this identification the standard complex structure is
``J0 = [[0, I], [-I, 0]]`` and the symplectic form is ``omega0(u, v) = u^T J0 v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .errors import ContractError, DimensionError, NumericalError

TOL_SYM = 1e-9


def J0(n: int) -> np.ndarray:
    """Standard symplectic matrix ``[[0, I], [-I, 0]]`` of size 2n."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _W(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2.0)


def _half_dim(A: np.ndarray) -> int:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] % 2:
        raise DimensionError(f"symplectic matrices have even size, got {A.shape[0]}")
    return A.shape[0] // 2


def symplectic_defect(A: np.ndarray) -> float:
    """Return ``max |A^T J0 A - J0|``."""
    n = _half_dim(A)
    A = np.asarray(A, dtype=float)
    J = J0(n)
    return float(np.max(np.abs(A.T @ J @ A - J)))


def is_symplectic(A: np.ndarray, tol: float = TOL_SYM) -> bool:
    """Test membership in Sp(2n).

    Parameters
    ----------
    A : (2n, 2n) array_like
        Real matrix.
    tol : float
        Threshold on the sup norm of ``A^T J0 A - J0``.

    Raises
    ------
    DimensionError
        If `A` is not square of even size.
    """
    return symplectic_defect(A) <= tol


@dataclass(frozen=True)
class CayleyBlocks:
    """Blocks of the complexified matrix ``W A W^{-1} = [[P, Q], [conj Q, conj P]]``."""

    P: np.ndarray
    Q: np.ndarray

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def complex_matrix(self) -> np.ndarray:
        return np.block([[self.P, self.Q], [self.Q.conj(), self.P.conj()]])

    def reassemble(self) -> np.ndarray:
        """Recover the real symplectic matrix."""
        W = _W(self.n)
        A = np.linalg.solve(W, self.complex_matrix() @ W)
        return A.real


def complexify(A: np.ndarray, tol: float = TOL_SYM) -> CayleyBlocks:
    """Complexify a real symplectic matrix.

    Parameters
    ----------
    A : (2n, 2n) array_like
        Real symplectic matrix.
    tol : float
        Tolerance for the symplecticity check and for the lower bound on the
        singular values of ``P``.

    Returns
    -------
    CayleyBlocks
        ``P`` and ``Q`` such that ``W A W^{-1} = [[P, Q], [conj Q, conj P]]``.

    Examples
    --------
    >>> blocks = complexify(J0(1))
    >>> complex(blocks.P[0, 0])
    -1j
    """
    n = _half_dim(A)
    A = np.asarray(A, dtype=float)
    defect = symplectic_defect(A)
    if defect > tol * max(1.0, float(np.max(np.abs(A))) ** 2):
        raise ContractError(f"matrix is not symplectic (defect {defect:.3e})")
    W = _W(n)
    Ac = W @ A @ np.linalg.inv(W)
    P = Ac[:n, :n].copy()
    Q = Ac[:n, n:].copy()
    smin = np.linalg.svd(P, compute_uv=False)[-1]
    if smin < 1.0 - tol * max(1.0, float(np.linalg.norm(A, 2))):
        raise NumericalError(f"P has singular value {smin} < 1", condition=1.0 / max(smin, 1e-300))
    return CayleyBlocks(P, Q)


def to_complex(v: np.ndarray) -> np.ndarray:
    """Map ``(a, b)`` in R^{2n} (last axis) to ``a + i b`` in C^n."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] % 2:
        raise DimensionError(f"expected even length, got {v.shape[-1]}")
    n = v.shape[-1] // 2
    return v[..., :n] + 1j * v[..., n:]


def _pair(v1, v2):
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape[-1] != v2.shape[-1]:
        raise DimensionError(f"dimension mismatch: {v1.shape[-1]} vs {v2.shape[-1]}")
    return v1, v2


def omega0(u, v) -> np.ndarray:
    """Standard symplectic pairing ``u^T J0 v`` along the last axis."""
    u, v = _pair(u, v)
    n = u.shape[-1] // 2
    return np.sum(u[..., :n] * v[..., n:] - u[..., n:] * v[..., :n], axis=-1)


def h0(v1, v2) -> np.ndarray:
    """Hermitian product ``sum Z1 conj(Z2)``."""
    v1, v2 = _pair(v1, v2)
    return np.sum(to_complex(v1) * to_complex(v2).conj(), axis=-1)


def psi2(v1, v2) -> complex | np.ndarray:
    """Quadratic form ``h0(v1, v2) - |v1|^2/2 - |v2|^2/2``.

    Equal to ``-i omega0(v1, v2) - |v1 - v2|^2 / 2``.  Works along the last
    axis, so batches of vectors are accepted.
    """
    v1, v2 = _pair(v1, v2)
    return h0(v1, v2) - 0.5 * np.sum(v1 * v1, axis=-1) - 0.5 * np.sum(v2 * v2, axis=-1)


def psi2_alt(v1, v2) -> complex | np.ndarray:
    """Second expression for :func:`psi2`, used as a cross-check."""
    v1, v2 = _pair(v1, v2)
    d = v1 - v2
    return -1j * omega0(v1, v2) - 0.5 * np.sum(d * d, axis=-1)


def _inv_P(blocks: CayleyBlocks) -> np.ndarray:
    cond = np.linalg.cond(blocks.P)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"P is singular (condition number {cond:.3e})", condition=cond)
    return np.linalg.inv(blocks.P)


def psi_A(blocks: CayleyBlocks, v1, v2) -> complex | np.ndarray:
    """Gaussian exponent attached to a symplectic matrix.

    ``1/2 (Z1^T conj(Q) P^{-1} Z1 + 2 conj(Z2)^T P^{-1} Z1
    - conj(Z2)^T P^{-1} Q conj(Z2) - |Z1|^2 - |Z2|^2)``

    Parameters
    ----------
    blocks : CayleyBlocks
    v1, v2 : array_like, shape (..., 2n)

    Raises
    ------
    NumericalError
        If ``P`` is numerically singular.
    """
    v1, v2 = _pair(v1, v2)
    if v1.shape[-1] != 2 * blocks.n:
        raise DimensionError(f"vectors of length {v1.shape[-1]} for n={blocks.n}")
    Pi = _inv_P(blocks)
    Z1 = to_complex(v1)
    Z2c = to_complex(v2).conj()
    PiZ1 = Z1 @ Pi.T
    term1 = np.sum((Z1 @ blocks.Q.conj()) * PiZ1, axis=-1)
    term2 = 2.0 * np.sum(Z2c * PiZ1, axis=-1)
    term3 = np.sum(Z2c * (Z2c @ (Pi @ blocks.Q).T), axis=-1)
    norms = np.sum(np.abs(Z1) ** 2, axis=-1) + np.sum(np.abs(Z2c) ** 2, axis=-1)
    return 0.5 * (term1 + term2 - term3 - norms)


def bargmann_kernel(Z, W) -> complex | np.ndarray:
    """Level-one Bargmann kernel ``pi^{-n} exp(psi2(Z, W))``."""
    Z, W = _pair(Z, W)
    n = Z.shape[-1] // 2
    return np.pi ** (-n) * np.exp(psi2(Z, W))


def metaplectic_kernel(blocks: CayleyBlocks, Z, W) -> complex | np.ndarray:
    """Metaplectic kernel ``pi^{-n} det(P)^{-1/2} exp(Psi_A(Z, W))``.

    The square root uses the principal branch, so the value is defined up to
    the overall sign of the metaplectic double cover.  Compare moduli.
    """
    det = complex(np.linalg.det(blocks.P))
    return np.pi ** (-blocks.n) * det ** -0.5 * np.exp(psi_A(blocks, Z, W))


# --- random elements of Sp(2n) -------------------------------------------------

def unitary_embedding(U: np.ndarray) -> np.ndarray:
    """Real form ``[[Re U, -Im U], [Im U, Re U]]`` of a unitary matrix."""
    U = np.asarray(U, dtype=complex)
    return np.block([[U.real, -U.imag], [U.imag, U.real]])


def shear(S: np.ndarray, lower: bool = False) -> np.ndarray:
    """Symplectic shear ``[[I, S], [0, I]]`` (or its transpose) for symmetric S."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    eye, zero = np.eye(n), np.zeros((n, n))
    if lower:
        return np.block([[eye, zero], [S, eye]])
    return np.block([[eye, S], [zero, eye]])


def squeeze(D: np.ndarray) -> np.ndarray:
    """Diagonal symplectic scaling ``diag(D, 1/D)``."""
    D = np.asarray(D, dtype=float)
    return np.diag(np.concatenate([D, 1.0 / D]))


def random_symplectic(n: int, rng: np.random.Generator, n_factors: int = 4,
                      scale: float = 0.5) -> np.ndarray:
    """Random element of Sp(2n) as a product of elementary factors.

    Each factor is a unitary rotation, an upper or lower shear with symmetric
    entries bounded by `scale`, or a squeeze with log-factors bounded by
    `scale`.  Bounded factors keep condition numbers moderate.
    """
    A = np.eye(2 * n)
    for _ in range(n_factors):
        kind = rng.integers(4)
        if kind == 0:
            U = unitary_group.rvs(n, random_state=rng) if n > 1 else np.array([[np.exp(1j * rng.uniform(0, 2 * np.pi))]])
            F = unitary_embedding(U)
        elif kind in (1, 2):
            S = rng.uniform(-scale, scale, size=(n, n))
            F = shear(0.5 * (S + S.T), lower=(kind == 2))
        else:
            F = squeeze(np.exp(rng.uniform(-scale, scale, size=n)))
        A = F @ A
    return A
