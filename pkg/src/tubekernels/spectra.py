"""Lattice eigendata of the flat torus and tempered Poisson kernels on the tube.

The Laplace eigenfunctions are ``(2 pi)^{-d/2} exp(i k.x)`` with eigenvalue
``|k|`` of the square root of the Laplacian.  Their holomorphic extensions to
the boundary point ``(x, p)`` are ``(2 pi)^{-d/2} exp(i k.x - k.p)``.

Fourier transforms use ``f^(s) = (2 pi)^{-1/2} int exp(-i s t) f(t) dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import i0e

from .errors import DomainError, NumericalError, TruncationError
from .geometry import GroupAction, TorusModel, TubePoint, sphere_area

DEFAULT_MODE_CAP = 50_000_000
# density of dx x dS(p) relative to the product of angle and surface measure
VOLUME_CONSTANT = 1.0


# --- modes and isotypes ----------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    """Lattice vector ``k`` with eigenvalue ``mu = |k|``."""

    k: tuple[int, ...]

    @property
    def mu2(self) -> int:
        return sum(c * c for c in self.k)

    @property
    def mu(self) -> float:
        return math.sqrt(self.mu2)


@dataclass(frozen=True)
class Isotype:
    """Character of the group action selecting lattice vectors.

    Subtorus: ``k . g_i == nu_i`` for each generator.  Finite cyclic group of
    order ``m`` along ``g``: ``k . g == nu (mod m)``.
    """

    action: GroupAction
    nu: int | tuple[int, ...] = 0

    @property
    def nu_vector(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.nu, dtype=np.int64))

    @property
    def dim(self) -> int:
        """Dimension of the irreducible representation (abelian groups: 1)."""
        return 1

    @property
    def constraint_coords(self) -> int:
        """Largest coordinate index entering the selector."""
        G = np.array(self.action.generators)
        return int(np.max(np.nonzero(np.any(G != 0, axis=0))[0]))

    def selects(self, k: np.ndarray) -> np.ndarray:
        lab = self.action.character_label(k)
        if self.action.kind == "finite-cyclic":
            return lab == int(self.nu_vector[0]) % self.action.m
        nu = self.nu_vector
        if nu.shape[0] != lab.shape[1]:
            raise DomainError(f"isotype label has {nu.shape[0]} entries, action has {lab.shape[1]} generators")
        return np.all(lab == nu, axis=1)

    def selects_prefix(self, prefix: np.ndarray) -> np.ndarray:
        """Selector applied to the leading coordinates (all constrained ones present)."""
        d = self.action.d
        full = np.zeros((prefix.shape[0], d), dtype=np.int64)
        full[:, : prefix.shape[1]] = prefix
        return self.selects(full)


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Lattice vectors in lexicographic order with their squared norms."""

    k: np.ndarray
    mu2: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return np.sqrt(self.mu2.astype(float))

    def __len__(self) -> int:
        return self.k.shape[0]

    def __iter__(self):
        for row in self.k:
            yield Mode(tuple(int(c) for c in row))


def _isqrt(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    r = np.floor(np.sqrt(np.maximum(x, 0).astype(float))).astype(np.int64)
    r -= (r * r > x).astype(np.int64)
    r += ((r + 1) * (r + 1) <= x).astype(np.int64)
    return np.where(x < 0, -1, r)


def _expand(prefix: np.ndarray, lo: np.ndarray, hi: np.ndarray, cap: int) -> np.ndarray:
    """Append a coordinate ranging over ``[lo_i, hi_i]`` to every prefix row."""
    lengths = np.maximum(hi - lo + 1, 0)
    total = int(lengths.sum())
    if total > cap:
        raise TruncationError(f"mode enumeration needs {total} entries, cap is {cap}")
    rows = np.repeat(np.arange(prefix.shape[0]), lengths)
    starts = np.repeat(np.cumsum(lengths) - lengths, lengths)
    vals = np.arange(total) - starts + np.repeat(lo, lengths)
    return np.column_stack([prefix[rows], vals])


def enumerate_modes(d: int, lambda_max: float, margin: float = 0.0,
                    iso: Isotype | None = None, lambda_min: float | None = None,
                    cap: int = DEFAULT_MODE_CAP) -> ModeSet:
    """All ``k`` in ``Z^d`` with ``lambda_min <= |k| <= lambda_max + margin``.

    Parameters
    ----------
    d : int
    lambda_max, margin : float
    iso : Isotype, optional
        Restrict to one isotypic component.
    lambda_min : float, optional
        Lower radius (annulus enumeration); ``None`` means 0.
    cap : int
        Memory guard on the number of generated vectors.

    Returns
    -------
    ModeSet
        In lexicographic order of ``k``.

    Raises
    ------
    TruncationError
        If more than `cap` vectors would be generated.
    """
    if lambda_max <= 0 and lambda_min is None:
        if lambda_max < 0:
            raise DomainError("lambda_max must be positive")
    R = lambda_max + margin
    r2max = int(math.floor(R * R + 1e-9)) if R >= 0 else -1
    lo_r = 0.0 if lambda_min is None else max(lambda_min, 0.0)
    r2min = int(math.ceil(lo_r * lo_r - 1e-9))
    last_constrained = iso.constraint_coords if iso is not None else -1

    prefix = np.zeros((1, 0), dtype=np.int64)
    s2 = np.zeros(1, dtype=np.int64)
    for j in range(d - 1):
        r = _isqrt(r2max - s2)
        prefix = _expand(prefix, -r, r, cap)
        s2 = np.sum(prefix * prefix, axis=1)
        if iso is not None and j == last_constrained:
            keep = iso.selects_prefix(prefix)
            prefix, s2 = prefix[keep], s2[keep]
    hi = _isqrt(r2max - s2)
    need = r2min - s2
    lo = np.where(need <= 0, 0, _isqrt(need - 1) + 1)
    # negative branch [-hi, -lo] (excluding 0 when lo == 0) and positive [lo, hi]
    neg = _expand(prefix, -hi, -np.maximum(lo, 1), cap)
    pos = _expand(prefix, lo, hi, cap)
    k = np.concatenate([neg, pos])
    order = np.lexsort(k.T[::-1])
    k = k[order]
    if iso is not None and last_constrained == d - 1:
        k = k[iso.selects(k)]
    mu2 = np.sum(k * k, axis=1)
    k.setflags(write=False)
    mu2.setflags(write=False)
    return ModeSet(k, mu2)


# --- cutoffs ----------------------------------------------------------------------

def _bump(t: np.ndarray, eps: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < eps
    out[inside] = np.exp(-1.0 / (1.0 - (t[inside] / eps) ** 2))
    return out


@dataclass(frozen=True)
class Cutoff:
    """Compactly supported test function with a cached Fourier transform.

    Parameters
    ----------
    family : {"bump", "autocorrelated-bump"}
        ``"bump"`` is ``b(t) = exp(-1 / (1 - (t/eps)^2))`` on ``|t| < eps``.
        ``"autocorrelated-bump"`` is ``b * b(-.)``, which has a nonnegative
        transform, positive value at the center and support ``|t| < 2 eps``.
    epsilon : float
        Half-width of the base bump.
    t0 : float
        Center; the transform picks up ``exp(-i s t0)``.
    trunc_tol : float
        Relative threshold defining the spectral window, see :meth:`window`.
    grid_step : float, optional
        Step of the interpolation grid for the transform.
    """

    family: str = "autocorrelated-bump"
    epsilon: float = 0.4
    t0: float = 0.0
    trunc_tol: float = 1e-10
    grid_step: float | None = None
    n_nodes: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.family not in ("bump", "autocorrelated-bump"):
            raise DomainError(f"unknown cutoff family {self.family!r}")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not 0 < self.trunc_tol < 1:
            raise DomainError("trunc_tol must lie in (0, 1)")

    @property
    def autocorrelated(self) -> bool:
        return self.family == "autocorrelated-bump"

    @property
    def support(self) -> tuple[float, float]:
        w = 2 * self.epsilon if self.autocorrelated else self.epsilon
        return (self.t0 - w, self.t0 + w)

    def mirrored(self) -> "Cutoff":
        """The reflected cutoff ``t -> chi(-t)``."""
        return Cutoff(self.family, self.epsilon, -self.t0, self.trunc_tol, self.grid_step, self.n_nodes)

    # base bump quadrature on [0, eps]
    @cached_property
    def _nodes(self):
        n = self.n_nodes or 400
        x, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * self.epsilon * (x + 1.0)
        return t, 0.5 * self.epsilon * w * _bump(t, self.epsilon)

    def _bump_hat(self, s: np.ndarray) -> np.ndarray:
        t, wb = self._nodes
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape)
        for i in range(0, s.size, 2048):
            chunk = s.ravel()[i:i + 2048]
            out.ravel()[i:i + 2048] = np.cos(np.outer(chunk, t)) @ wb
        return 2.0 * out / math.sqrt(2 * math.pi)

    def chi_hat_direct(self, s) -> np.ndarray:
        """Transform evaluated by quadrature at every point (no interpolation)."""
        s = np.asarray(s, dtype=float)
        bh = self._bump_hat(s).reshape(s.shape)
        val = math.sqrt(2 * math.pi) * bh ** 2 if self.autocorrelated else bh
        if self.t0 != 0.0:
            return val * np.exp(-1j * s * self.t0)
        return val

    @cached_property
    def _grid(self):
        step = self.grid_step or min(0.01, self.epsilon / 40)
        peak = float(abs(self.chi_hat_direct(np.array([0.0]))[0]))
        floor = 1e-3 * self.trunc_tol * peak
        chunk = max(int(round(20.0 / step)), 16)
        vals = [self._centered(np.arange(chunk) * step)]
        while np.max(np.abs(vals[-1][-chunk // 2:])) > floor:
            start = len(vals) * chunk
            if start * step > 20000:
                raise NumericalError("cutoff transform does not decay within the grid cap")
            vals.append(self._centered((start + np.arange(chunk)) * step))
        grid = np.concatenate(vals)
        s = np.arange(grid.size) * step
        # mirror so the spline sees the even extension around 0
        spline = CubicSpline(np.concatenate([-s[:0:-1], s]), np.concatenate([grid[:0:-1], grid]))
        return s, grid, spline, peak

    def _centered(self, s):
        bh = self._bump_hat(s)
        return math.sqrt(2 * math.pi) * bh ** 2 if self.autocorrelated else bh

    @property
    def grid_max(self) -> float:
        return float(self._grid[0][-1])

    def chi_hat(self, s):
        """Interpolated transform; zero beyond the grid (tail below ``1e-3 trunc_tol``)."""
        s = np.asarray(s, dtype=float)
        sg, _, spline, _ = self._grid
        a = np.abs(s)
        val = np.where(a <= sg[-1], spline(np.minimum(a, sg[-1])), 0.0)
        if self.t0 != 0.0:
            return val * np.exp(-1j * s * self.t0)
        return val

    @cached_property
    def window(self) -> float:
        """Smallest ``W`` with ``|chi^(s)| <= trunc_tol * max|chi^|`` for ``|s| >= W``."""
        s, grid, _, peak = self._grid
        above = np.nonzero(np.abs(grid) > self.trunc_tol * peak)[0]
        return float(s[above[-1] + 1]) if above.size else 0.0

    def tail_mass(self, start: float) -> float:
        """``int_{|s| > start} |chi^(s)| ds`` from the cached grid."""
        s, grid, _, _ = self._grid
        m = s >= start
        if np.count_nonzero(m) < 2:
            return 0.0
        return 2.0 * float(integrate.trapezoid(np.abs(grid[m]), s[m]))

    def chi(self, t) -> np.ndarray:
        """The cutoff in the time domain."""
        t = np.atleast_1d(np.asarray(t, dtype=float)) - self.t0
        if not self.autocorrelated:
            return _bump(t, self.epsilon)
        eps = self.epsilon
        x, w = np.polynomial.legendre.leggauss(400)
        out = np.zeros(t.shape)
        for i, ti in enumerate(t.ravel()):
            a, b = max(-eps, ti - eps), min(eps, ti + eps)
            if b <= a:
                continue
            u = 0.5 * (b - a) * x + 0.5 * (b + a)
            out.ravel()[i] = 0.5 * (b - a) * np.sum(w * _bump(u, eps) * _bump(u - ti, eps))
        return out

    @cached_property
    def chi_center(self) -> float:
        """Value at the center, ``chi(t0)``."""
        return float(self.chi(self.t0)[0])


# --- kernels ----------------------------------------------------------------------

@dataclass(frozen=True)
class KernelValue:
    """Lattice-sum value with its bookkeeping."""

    value: complex
    n_modes: int
    trunc_bound: float
    window: float


@lru_cache(maxsize=64)
def _annulus_modes(d: int, lo: float, hi: float, iso: Isotype | None, cap: int) -> ModeSet:
    return enumerate_modes(d, hi, 0.0, iso, lambda_min=lo if lo > 0 else None, cap=cap)


def _fsum_complex(z: np.ndarray) -> complex:
    return complex(math.fsum(z.real), math.fsum(z.imag))


def _decay_rate(model: TorusModel, iso: Isotype | None, pq: np.ndarray) -> tuple[float, float]:
    """Constants ``(rate, offset)`` with ``-2 tau |k| - k.pq <= -rate |k| + offset`` on the isotype."""
    tau = model.tau
    if iso is None or iso.action.kind != "subtorus":
        return 2 * tau - float(np.linalg.norm(pq)), 0.0
    G = iso.action.matrix
    Q, _ = np.linalg.qr(G)
    perp = pq - Q @ (Q.T @ pq)
    # k = k_par + k_perp with k_par fixed by the character
    k_par = G @ np.linalg.solve(G.T @ G, iso.nu_vector.astype(float))
    return 2 * tau - float(np.linalg.norm(perp)), float(abs(k_par @ pq))


def truncation_bound(cutoff: Cutoff, d: int, lam: float, window: float,
                     rate: float = 0.0, offset: float = 0.0) -> float:
    """Estimate of the modes left out of a lattice sum by the spectral window.

    An omitted mode with ``|k| = mu`` contributes at most
    ``(2 pi)^{-d} |chi^(lam - mu)| exp(-rate mu + offset)``.  The number of
    lattice points per unit radius is estimated by the area of the sphere of
    radius ``mu + sqrt(d)``.
    """
    s, grid, _, _ = cutoff._grid
    m = s >= window
    if np.count_nonzero(m) < 2:
        return 0.0
    total = 0.0
    for sign in (1.0, -1.0):
        mu = lam + sign * s[m]
        ok = mu >= 0
        if np.count_nonzero(ok) < 2:
            continue
        r = mu[ok] + math.sqrt(d)
        dens = sphere_area(d - 1) * r ** (d - 1) if d > 1 else 2.0 * np.ones_like(r)
        w = np.abs(grid[m][ok]) * dens * np.exp(-max(rate, 0.0) * mu[ok] + offset)
        total += abs(float(integrate.trapezoid(w, s[m][ok])))
    return (2 * math.pi) ** (-d) * total


def poisson_kernel(model: TorusModel, cutoff: Cutoff, iso: Isotype | None, lam: float,
                   pt1: TubePoint, pt2: TubePoint, window: float | None = None,
                   cap: int = DEFAULT_MODE_CAP) -> KernelValue:
    """Tempered Poisson kernel of an isotypic component by lattice summation.

    ``sum_k chi^(lam - |k|) exp(-2 tau |k|) phi~_k(x) conj(phi~_k(y))``

    Parameters
    ----------
    model : TorusModel
    cutoff : Cutoff
    iso : Isotype or None
        ``None`` sums over every mode.
    lam : float
    pt1, pt2 : TubePoint
    window : float, optional
        Spectral half-width ``|lam - |k|| <= window``; defaults to
        ``cutoff.window``.  A window of at least ``lam`` keeps every mode
        below ``lam``.
    cap : int
        Mode-count guard.

    Returns
    -------
    KernelValue
    """
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    W = cutoff.window if window is None else float(window)
    modes = _annulus_modes(model.d, max(lam - W, 0.0), lam + W, iso, cap)
    kv = modes.k.astype(float)
    mu = modes.mu
    weights = cutoff.chi_hat(lam - mu)
    pq = pt1.p + pt2.p
    expo = -2 * model.tau * mu - kv @ pq + 1j * (kv @ (pt1.x - pt2.x))
    terms = weights * np.exp(expo)
    val = (2 * math.pi) ** (-model.d) * _fsum_complex(np.asarray(terms, dtype=complex))
    rate, offset = _decay_rate(model, iso, pq)
    bound = truncation_bound(cutoff, model.d, lam, W, rate, offset)
    return KernelValue(val, len(modes), bound, W)


# --- complexified norms and Weyl sums --------------------------------------------

def _q_quad(d: int, tau: float, r: float) -> float:
    # substitute u = 1 + cos(theta); the Jacobian is (u (2 - u))^{(d-3)/2}
    alpha = (d - 3) / 2
    res = integrate.quad(lambda u: math.exp(-2 * tau * r * u), 0.0, 2.0, weight="alg",
                         wvar=(alpha, alpha), epsabs=0.0, epsrel=1e-13, limit=200, full_output=1)
    val, err = res[0], res[1]
    if len(res) > 3 and err > 1e-8 * abs(val):
        raise NumericalError(f"sphere quadrature did not converge (error {err:.2e})")
    return tau ** (d - 1) * sphere_area(d - 2) * val


def q_tau_profile(model: TorusModel, k_norm, method: str = "auto"):
    """Sphere average ``tau^{d-1} int_{S^{d-1}} exp(-2 tau r (1 + cos)) dw``.

    ``r = |k|``.  Closed forms are used for ``d <= 3``
    (``d = 2``: ``2 pi tau exp(-2 tau r) I0(2 tau r)``); otherwise, or with
    ``method="quad"``, an adaptive quadrature in the polar angle with the
    Jacobi weight ``sin^{d-2}``.

    Returns
    -------
    float or ndarray
        The normalized value ``q(r) (r / (pi tau))^{(d-1)/2}`` tends to 1.
    """
    d, tau = model.d, model.tau
    r = np.asarray(k_norm, dtype=float)
    if np.any(r < 0):
        raise DomainError("k_norm must be nonnegative")
    if method not in ("auto", "quad"):
        raise DomainError(f"unknown method {method!r}")
    if method == "auto" and d <= 3:
        if d == 1:
            out = 1.0 + np.exp(-4 * tau * r)
        elif d == 2:
            out = 2 * math.pi * tau * i0e(2 * tau * r)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(r > 0, math.pi * tau * (-np.expm1(-4 * tau * r)) / np.where(r > 0, r, 1.0),
                               4 * math.pi * tau ** 2)
        return float(out) if out.ndim == 0 else out
    if d < 2:
        raise DomainError("quadrature path needs d >= 2")
    flat = [_q_quad(d, tau, float(x)) for x in r.ravel()]
    out = np.array(flat).reshape(r.shape)
    return float(out) if out.ndim == 0 else out


def complexified_norm(model: TorusModel, k) -> float:
    """Squared norm of the extended eigenfunction ``phi~_k`` on the boundary.

    With the density ``dx x dS(p)`` this is ``exp(2 tau |k|) q(|k|)``; the
    ``(2 pi)^{-d}`` of the eigenfunction cancels the torus volume.
    """
    mu = Mode(tuple(int(c) for c in np.atleast_1d(getattr(k, "k", k)))).mu
    return VOLUME_CONSTANT * math.exp(2 * model.tau * mu) * q_tau_profile(model, mu)


def _q_by_norm(model: TorusModel, mu2: np.ndarray) -> np.ndarray:
    uniq, inv = np.unique(mu2, return_inverse=True)
    return np.asarray(q_tau_profile(model, np.sqrt(uniq.astype(float))), dtype=float)[inv]


def weyl_sum_P(model: TorusModel, iso: Isotype | None, lam: float,
               cap: int = DEFAULT_MODE_CAP) -> float:
    """``sum_{|k| <= lam, k in iso} exp(-2 tau |k|) |phi~_k|^2``."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    modes = enumerate_modes(model.d, lam, 0.0, iso, cap=cap)
    return VOLUME_CONSTANT * math.fsum(_q_by_norm(model, modes.mu2))


def trace_P(model: TorusModel, cutoff: Cutoff, iso: Isotype | None, lam: float,
            cap: int = DEFAULT_MODE_CAP) -> float:
    """Trace of the tempered Poisson operator, ``sum chi^(lam - mu) q(mu)``."""
    W = cutoff.window
    modes = _annulus_modes(model.d, max(lam - W, 0.0), lam + W, iso, cap)
    w = np.real(cutoff.chi_hat(lam - modes.mu))
    return VOLUME_CONSTANT * math.fsum(w * _q_by_norm(model, modes.mu2))
