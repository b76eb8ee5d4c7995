"""Closed-form complex Gaussian integrals.

The basic object is ``int exp(-u^T M u / 2 + b^T u + c) du`` over R^m with
``M`` complex symmetric and ``Re M`` positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .symplectic import is_symplectic, omega0, psi2

PD_THRESHOLD = 1e-12


@dataclass(frozen=True)
class ComplexQuadratic:
    """Exponent ``-u^T M u / 2 + b^T u + c``."""

    M: np.ndarray
    b: np.ndarray | None = None
    c: complex = 0.0

    @property
    def m(self) -> int:
        return np.asarray(self.M).shape[0]

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """Exponent at points ``u`` of shape (..., m)."""
        M = np.asarray(self.M, dtype=complex)
        b = np.zeros(self.m) if self.b is None else np.asarray(self.b, dtype=complex)
        u = np.asarray(u, dtype=float)
        quad = np.einsum("...i,ij,...j->...", u, M, u)
        return -0.5 * quad + u @ b + self.c


def sqrt_det_continued(M: np.ndarray) -> complex:
    """``det(M)^{1/2}`` continued along ``Re M + s i Im M``, ``s`` from 0 to 1.

    Writing ``Re M = L L^T``, the eigenvalues of ``L^{-1} M L^{-T}`` are
    ``1 + i s_j`` with real ``s_j``.  Along the path they stay in the right
    half plane, so each factor takes its principal square root.
    """
    M = np.asarray(M, dtype=complex)
    R = 0.5 * (M.real + M.real.T)
    L = np.linalg.cholesky(R)
    Linv = np.linalg.inv(L)
    S = Linv @ (0.5 * (M.imag + M.imag.T)) @ Linv.T
    s = np.linalg.eigvalsh(0.5 * (S + S.T))
    return complex(np.prod(np.diag(L)) * np.prod(np.sqrt(1.0 + 1j * s)))


def check_quadratic(q: ComplexQuadratic) -> None:
    """Validate symmetry and positivity of ``Re M``.

    Raises
    ------
    DimensionError
        Non-square ``M`` or mismatched ``b``.
    DomainError
        ``M`` not symmetric or ``Re M`` not positive definite.
    """
    M = np.asarray(q.M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"M must be square, got {M.shape}")
    if q.b is not None and np.asarray(q.b).shape != (M.shape[0],):
        raise DimensionError(f"b has shape {np.asarray(q.b).shape}, expected ({M.shape[0]},)")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise DomainError("M is not symmetric")
    lam_min = np.linalg.eigvalsh(0.5 * (M.real + M.real.T))[0]
    if lam_min <= PD_THRESHOLD:
        raise DomainError(f"Re M is not positive definite (smallest eigenvalue {lam_min:.3e})")


def gauss_integral(q: ComplexQuadratic) -> complex:
    """Evaluate ``int exp(-u^T M u / 2 + b^T u + c) du`` in closed form.

    Returns ``(2 pi)^{m/2} det(M)^{-1/2} exp(b^T M^{-1} b / 2 + c)`` with the
    square root continued from ``Re M`` (see :func:`sqrt_det_continued`).

    Examples
    --------
    >>> round(gauss_integral(ComplexQuadratic(2 * np.eye(1))).real, 12)
    1.772453850906
    """
    check_quadratic(q)
    M = np.asarray(q.M, dtype=complex)
    m = M.shape[0]
    expo = complex(q.c)
    if q.b is not None:
        b = np.asarray(q.b, dtype=complex)
        expo += 0.5 * complex(b @ np.linalg.solve(M, b))
    return (2 * np.pi) ** (m / 2) / sqrt_det_continued(M) * np.exp(expo)


@dataclass(frozen=True)
class SplitDims:
    """Splitting of the horizontal coordinates at a point of the zero locus.

    Vectors of R^{2n}, ``n = d - 1``, are stored as ``(a_1..a_n, b_1..b_n)``.
    The first ``d_G`` of the ``a`` coordinates form the vertical block ``v``
    (along the orbit), the first ``d_G`` of the ``b`` coordinates form the
    transverse block ``t = J v`` and everything else is the horizontal block
    ``h``.  The ``h`` block keeps the same ``(a, b)`` layout with
    ``n - d_G`` complex coordinates.
    """

    d: int
    d_G: int

    def __post_init__(self):
        if self.d < 1 or not 0 <= self.d_G <= max(self.d - 1, 0):
            raise DimensionError(f"need 0 <= d_G <= d - 1, got d={self.d}, d_G={self.d_G}")

    @property
    def n(self) -> int:
        return self.d - 1

    @property
    def t_idx(self) -> np.ndarray:
        return self.n + np.arange(self.d_G)

    @property
    def v_idx(self) -> np.ndarray:
        return np.arange(self.d_G)

    @property
    def h_idx(self) -> np.ndarray:
        n, k = self.n, self.d_G
        return np.concatenate([np.arange(k, n), n + np.arange(k, n)])

    def split(self, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return the ``(t, v, h)`` blocks of a vector of length 2n."""
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != 2 * self.n:
            raise DimensionError(f"expected length {2 * self.n}, got {w.shape[-1]}")
        return w[..., self.t_idx], w[..., self.v_idx], w[..., self.h_idx]

    def join(self, t, v, h) -> np.ndarray:
        """Inverse of :meth:`split`."""
        w = np.zeros(2 * self.n)
        w[self.t_idx] = t
        w[self.v_idx] = v
        w[self.h_idx] = h
        return w


def a_chi_quadratic(B: np.ndarray, dims: SplitDims) -> ComplexQuadratic:
    """Quadratic form of ``-|u^t|^2 - |u^h|^2/2 - i omega0(u^v, u^t) - |B u|^2/2``."""
    B = np.asarray(B, dtype=float)
    if B.shape != (2 * dims.n, 2 * dims.n):
        raise DimensionError(f"B has shape {B.shape}, expected {(2 * dims.n,) * 2}")
    M = (B.T @ B).astype(complex)
    M[dims.t_idx, dims.t_idx] += 2.0
    M[dims.h_idx, dims.h_idx] += 1.0
    # omega0(u^v, u^t) = u^v . u^t in these coordinates
    M[dims.v_idx, dims.t_idx] += 1j
    M[dims.t_idx, dims.v_idx] += 1j
    return ComplexQuadratic(M)


def a_chi(B: np.ndarray, dims: SplitDims) -> complex:
    """Gaussian integral of the concentration-locus amplitude.

    Parameters
    ----------
    B : (2d-2, 2d-2) array_like
        Symplectic linearization of the flow in horizontal frames.
    dims : SplitDims

    Returns
    -------
    complex
        Equals ``pi^{d-1}`` when ``B`` is orthogonal.
    """
    if not is_symplectic(B):
        raise DomainError("B must be symplectic")
    return gauss_integral(a_chi_quadratic(B, dims))


def _horizontal_quadratic(dims: SplitDims, h1: np.ndarray, h2: np.ndarray) -> ComplexQuadratic:
    m = h1.shape[0]
    if m == 0:
        return ComplexQuadratic(np.zeros((0, 0)), np.zeros(0), 0.0)
    k = m // 2
    J = np.block([[np.zeros((k, k)), np.eye(k)], [-np.eye(k), np.zeros((k, k))]])
    # -i omega0(h1 - h2, u) + g0(h1 + h2, u) is linear in u
    b = -1j * (J.T @ (h1 - h2)) + (h1 + h2)
    c = -0.5 * (h1 @ h1) - 0.5 * (h2 @ h2)
    return ComplexQuadratic(2.0 * np.eye(m), b, c)


def _vt_quadratic(dims: SplitDims, t1: np.ndarray, t2: np.ndarray) -> ComplexQuadratic:
    k = dims.d_G
    if k == 0:
        return ComplexQuadratic(np.zeros((0, 0)), np.zeros(0), 0.0)
    # variables ordered (u^t, u^v); exponent
    # -|t1|^2 - |u^t|^2 - i u^v.u^t - |u^v|^2/2 - i u^v.t2 - |u^t - t2|^2/2
    eye = np.eye(k)
    M = np.block([[3.0 * eye, 1j * eye], [1j * eye, eye]])
    b = np.concatenate([t2, -1j * t2]).astype(complex)
    c = -(t1 @ t1) - 0.5 * (t2 @ t2)
    return ComplexQuadratic(M, b, c)


def _gauss_or_constant(q: ComplexQuadratic) -> complex:
    if q.m == 0:
        return complex(np.exp(q.c))
    return gauss_integral(q)


@dataclass(frozen=True)
class DiagIntegrals:
    """Closed forms and engine values of the two diagonal-case integrals."""

    horizontal: complex
    vertical_transverse: complex
    horizontal_engine: complex
    vertical_transverse_engine: complex

    def max_discrepancy(self) -> float:
        return max(abs(self.horizontal - self.horizontal_engine),
                   abs(self.vertical_transverse - self.vertical_transverse_engine))


def diag_case_integrals(dims: SplitDims, v1, v2) -> DiagIntegrals:
    """Horizontal and vertical-transverse integrals of the diagonal case.

    Closed forms ``pi^{d-1-d_G} exp(psi2(v1^h, v2^h))`` and
    ``pi^{d_G} exp(-|v1^t|^2 - |v2^t|^2)`` are returned together with the
    corresponding values of :func:`gauss_integral` applied to the integrands

    * ``-i omega0(v1^h - v2^h, u) - |v1^h|^2/2 - |v2^h|^2/2 - |u|^2
      + g0(v1^h + v2^h, u)`` over ``u`` in the ``h`` block,
    * ``-|v1^t|^2 - |u^t|^2 - i omega0(u^v, u^t) - |u^v|^2/2
      - i omega0(u^v, v2^t) - |u^t - v2^t|^2/2`` over ``(u^t, u^v)``.

    Parameters
    ----------
    dims : SplitDims
    v1, v2 : array_like, shape (2d-2,)
        Horizontal coordinates in the ``(a, b)`` layout of :class:`SplitDims`.
    """
    t1, _, h1 = dims.split(v1)
    t2, _, h2 = dims.split(v2)
    k = dims.d_G
    horiz = np.pi ** (dims.n - k) * np.exp(psi2(h1, h2)) if h1.size else 1.0 + 0j
    vt = np.pi ** k * np.exp(-(t1 @ t1) - (t2 @ t2))
    return DiagIntegrals(
        horizontal=complex(horiz),
        vertical_transverse=complex(vt),
        horizontal_engine=_gauss_or_constant(_horizontal_quadratic(dims, h1, h2)),
        vertical_transverse_engine=_gauss_or_constant(_vt_quadratic(dims, t1, t2)),
    )
