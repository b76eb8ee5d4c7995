"""Flat-torus model of the tube boundary and its group actions.

Points of the boundary are pairs ``(x, p)`` with ``x`` in the torus
``(R / 2 pi Z)^d`` and ``|p| = tau``.  The contact form is ``-p . dx``, the
Reeb field is ``-(p / tau^2) . d/dx`` and the geodesic flow is the translation
``(x, p) -> (x + t p / tau, p)``.  The Kahler metric is the Euclidean one in
``(x, p)``; its half is used for all norms unless a function says otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gamma

from .errors import ContractError, DimensionError, DomainError
from .gaussian import SplitDims
from .symplectic import symplectic_defect

SQRT2 = math.sqrt(2.0)
ZERO_LOCUS_TOL = 1e-9


@dataclass(frozen=True)
class GroupAction:
    """Translation action of a subtorus or of a finite cyclic group.

    Parameters
    ----------
    kind : {"subtorus", "finite-cyclic"}
    generators : tuple of integer tuples
        Direction vectors.  A subtorus acts by ``x -> x + G theta``; a finite
        cyclic group of order ``m`` acts by ``x -> x + 2 pi j g / m`` with the
        single generator ``g``.
    m : int
        Order of the finite cyclic group (ignored for subtori).
    """

    kind: str
    generators: tuple[tuple[int, ...], ...]
    m: int = 1

    def __post_init__(self):
        if self.kind not in ("subtorus", "finite-cyclic"):
            raise ContractError(f"unknown action kind {self.kind!r}")
        gens = tuple(tuple(int(c) for c in g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        if not gens:
            raise ContractError("at least one generator is required")
        d = len(gens[0])
        if any(len(g) != d for g in gens):
            raise DimensionError("generators have different lengths")
        G = np.array(gens, dtype=float).T
        if np.linalg.matrix_rank(G) != len(gens):
            raise ContractError("generators are linearly dependent")
        if self.kind == "finite-cyclic":
            if len(gens) != 1:
                raise ContractError("a finite cyclic action takes exactly one generator")
            if self.m < 1:
                raise ContractError(f"group order must be positive, got {self.m}")

    @classmethod
    def trivial(cls, d: int) -> "GroupAction":
        return cls("finite-cyclic", (tuple(int(i == 0) for i in range(d)),), 1)

    @classmethod
    def circle(cls, d: int, axis: int = 0) -> "GroupAction":
        return cls("subtorus", (tuple(int(i == axis) for i in range(d)),))

    @classmethod
    def cyclic(cls, d: int, m: int, axis: int = 0) -> "GroupAction":
        return cls("finite-cyclic", (tuple(int(i == axis) for i in range(d)),), m)

    @property
    def d(self) -> int:
        return len(self.generators[0])

    @property
    def d_G(self) -> int:
        return len(self.generators) if self.kind == "subtorus" else 0

    @property
    def matrix(self) -> np.ndarray:
        """Generators as the columns of a ``d x k`` float matrix."""
        return np.array(self.generators, dtype=float).T

    @cached_property
    def stabilizer_order(self) -> int:
        """Order of the (point independent) stabilizer of the action."""
        if self.kind == "finite-cyclic":
            g = np.array(self.generators[0])
            return sum(1 for j in range(self.m) if np.all((j * g) % self.m == 0))
        # index of the lattice spanned by the generators in its saturation
        G = np.array(self.generators, dtype=np.int64).T
        k = G.shape[1]
        index = 0
        for rows in itertools.combinations(range(G.shape[0]), k):
            minor = int(round(np.linalg.det(G[list(rows), :])))
            index = math.gcd(index, abs(minor))
        return index

    @property
    def order(self) -> int:
        """Number of group elements (finite case)."""
        return self.m if self.kind == "finite-cyclic" else 0

    def shift(self, g) -> np.ndarray:
        """Translation vector in ``x`` produced by group element `g`."""
        if self.kind == "finite-cyclic":
            if isinstance(g, (bool, np.bool_)) or not isinstance(g, (int, np.integer)):
                raise DomainError(f"finite group elements are integers, got {g!r}")
            return 2 * np.pi * int(g) * np.array(self.generators[0], dtype=float) / self.m
        theta = np.atleast_1d(np.asarray(g, dtype=float))
        if theta.shape != (self.d_G,):
            raise DomainError(f"subtorus elements have {self.d_G} angles, got {theta.shape}")
        return self.matrix @ theta

    def identity(self):
        return 0 if self.kind == "finite-cyclic" else np.zeros(self.d_G)

    def character_label(self, k: np.ndarray) -> np.ndarray:
        """Character index carried by lattice vectors ``k`` (rows).

        Subtorus: ``k . g_i`` for every generator (shape ``(N, d_G)``).
        Finite cyclic: ``k . g mod m`` (shape ``(N,)``).
        """
        k = np.atleast_2d(np.asarray(k, dtype=np.int64))
        Gi = np.array(self.generators, dtype=np.int64).T
        lab = k @ Gi
        if self.kind == "finite-cyclic":
            return lab[:, 0] % self.m
        return lab


@dataclass(frozen=True, eq=False)
class TubePoint:
    """Point ``(x, p)`` of the tube boundary.  ``x`` is not reduced mod 2 pi."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        p = np.array(self.p, dtype=float)
        if x.shape != p.shape or x.ndim != 1:
            raise DimensionError(f"x and p must be vectors of equal length, got {x.shape}, {p.shape}")
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def d(self) -> int:
        return self.x.shape[0]

    def wrapped(self) -> "TubePoint":
        return TubePoint(np.mod(self.x, 2 * np.pi), self.p)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])


@dataclass(frozen=True, eq=False)
class Frame:
    """Adapted frame at a boundary point.

    ``basis`` holds an orthonormal basis ``u_1..u_n`` of ``p^perp`` (columns).
    The horizontal coordinate vector ``(a, b)`` corresponds to the tangent
    vector ``dx = sqrt(2) sum a_i u_i``, ``dp = sqrt(2) sum b_i u_i``, so the
    coordinate basis is orthonormal for the halved metric and ``J`` maps
    ``dx`` to ``dp``.  The reeb coordinate ``theta`` adds ``theta * reeb``.
    """

    origin: TubePoint
    tau: float
    basis: np.ndarray
    d_G: int = 0
    split: bool = False

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    @property
    def reeb(self) -> np.ndarray:
        """Reeb vector as ``(dx, dp)`` of length 2d."""
        return np.concatenate([-self.origin.p / self.tau ** 2, np.zeros(self.origin.d)])

    @property
    def horizontal(self) -> np.ndarray:
        """Rows ``e_1..e_n, J e_1..J e_n`` as ``(dx, dp)`` vectors."""
        U = SQRT2 * self.basis.T
        Z = np.zeros_like(U)
        return np.block([[U, Z], [Z, U]])

    @property
    def dims(self) -> SplitDims:
        if not self.split:
            raise DomainError("frame was built without the vertical/transverse splitting")
        return SplitDims(self.origin.d, self.d_G)

    def tangent(self, theta: float, v) -> tuple[np.ndarray, np.ndarray]:
        """Tangent vector ``theta * reeb + sum v_i e_i`` as ``(dx, dp)``."""
        v = np.asarray(v, dtype=float)
        if v.shape != (2 * self.n,):
            raise DimensionError(f"expected {2 * self.n} horizontal coordinates, got {v.shape}")
        w = theta * self.reeb + v @ self.horizontal
        d = self.origin.d
        return w[:d], w[d:]

    def coordinates(self, dx, dp) -> tuple[float, np.ndarray]:
        """Inverse of :meth:`tangent` for vectors tangent to the boundary."""
        dx = np.asarray(dx, dtype=float)
        dp = np.asarray(dp, dtype=float)
        theta = float(-self.origin.p @ dx)
        a = self.basis.T @ dx / SQRT2
        b = self.basis.T @ dp / SQRT2
        return theta, np.concatenate([a, b])


def _orthonormal_complement(p: np.ndarray, first: np.ndarray) -> np.ndarray:
    """Gram-Schmidt basis of ``p^perp`` starting from the columns of `first`."""
    d = p.shape[0]
    vecs = [p / np.linalg.norm(p)]
    cands = [first[:, j] for j in range(first.shape[1])] + [np.eye(d)[:, j] for j in range(d)]
    for c in cands:
        w = c.astype(float).copy()
        for _ in range(2):
            for q in vecs:
                w -= (q @ w) * q
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            vecs.append(w / nw)
        if len(vecs) == d:
            break
    return np.column_stack(vecs[1:]) if d > 1 else np.zeros((1, 0))


@dataclass(frozen=True)
class Linearization:
    """Matrix of the linearized flow in horizontal frames."""

    B: np.ndarray
    symplectic_defect: float
    reeb_leak: float


@dataclass(frozen=True)
class TorusModel:
    """Tube of radius `tau` over the flat torus of dimension `d`."""

    d: int
    tau: float
    action: GroupAction = field(default=None)

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"dimension must be positive, got {self.d}")
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if self.action is None:
            object.__setattr__(self, "action", GroupAction.trivial(self.d))
        if self.action.d != self.d:
            raise DimensionError(f"action acts on dimension {self.action.d}, model has {self.d}")
        if self.action.d_G > 0 and self.action.d_G > self.d - 1:
            raise DomainError(f"need d_G <= d - 1, got d_G={self.action.d_G}, d={self.d}")

    @property
    def d_G(self) -> int:
        return self.action.d_G

    # -- points ---------------------------------------------------------------

    def point(self, x, p) -> TubePoint:
        """Validated boundary point."""
        pt = TubePoint(x, p)
        if pt.d != self.d:
            raise DimensionError(f"point of dimension {pt.d} for model of dimension {self.d}")
        if abs(np.linalg.norm(pt.p) - self.tau) > 1e-12 * max(1.0, self.tau):
            raise DomainError(f"|p| = {np.linalg.norm(pt.p)} differs from tau = {self.tau}")
        return pt

    def point_on_sphere(self, x, direction) -> TubePoint:
        """Boundary point with ``p = tau * direction / |direction|``."""
        u = np.asarray(direction, dtype=float)
        return self.point(x, self.tau * u / np.linalg.norm(u))

    def rho(self, pt: TubePoint) -> float:
        return float(pt.p @ pt.p)

    def contact_form(self, pt: TubePoint, dx) -> float:
        """``alpha(dx, dp) = -p . dx``."""
        return float(-pt.p @ np.asarray(dx, dtype=float))

    # -- flow and group -------------------------------------------------------

    def geodesic_flow(self, pt: TubePoint, t: float) -> TubePoint:
        """``(x, p) -> (x + t p / tau, p)``."""
        return TubePoint(pt.x + t * pt.p / self.tau, pt.p)

    def group_act(self, g, pt: TubePoint) -> TubePoint:
        """Translate ``x`` by the group element `g`; ``p`` is unchanged."""
        return TubePoint(pt.x + self.action.shift(g), pt.p)

    def moment(self, pt: TubePoint, xi=None) -> float | np.ndarray:
        """Moment map ``p . xi``.

        With ``xi=None`` returns the vector of pairings with all generators.
        Finite actions have a zero-dimensional Lie algebra and return 0.
        """
        if self.action.kind != "subtorus":
            return 0.0
        if xi is None:
            return self.action.matrix.T @ pt.p
        return float(pt.p @ np.asarray(xi, dtype=float))

    def in_zero_locus(self, pt: TubePoint, tol: float = ZERO_LOCUS_TOL) -> bool:
        m = self.moment(pt)
        return bool(np.all(np.abs(m) <= tol * max(1.0, self.tau)))

    def z_locus_distance(self, pt: TubePoint, metric: str = "hat") -> float:
        """Geodesic distance from `pt` to the zero locus of the moment map.

        The zero locus is ``T^d x (sphere in the orthocomplement of the
        generators)``, so the distance is the angle between ``p`` and that
        subspace times ``tau``.

        Parameters
        ----------
        metric : {"hat", "tilde"}
            ``"hat"`` uses the Euclidean metric in ``(x, p)``; ``"tilde"``
            uses its half, which divides lengths by sqrt(2).
        """
        if metric not in ("hat", "tilde"):
            raise DomainError(f"unknown metric {metric!r}")
        if self.action.kind != "subtorus":
            return 0.0
        Q, _ = np.linalg.qr(self.action.matrix)
        perp = pt.p - Q @ (Q.T @ pt.p)
        ratio = min(1.0, np.linalg.norm(perp) / np.linalg.norm(pt.p))
        dist = self.tau * math.acos(ratio)
        return dist if metric == "hat" else dist / SQRT2

    # -- frames ---------------------------------------------------------------

    def nhlc_frame(self, pt: TubePoint, split: bool = False) -> Frame:
        """Adapted frame at `pt`.

        The horizontal basis starts with the generator directions (projected on
        ``p^perp``), so at points of the zero locus the first ``d_G`` ``a``
        coordinates span the orbit directions and the first ``d_G`` ``b``
        coordinates span their images under ``J``.

        Raises
        ------
        DomainError
            If ``split`` is requested off the zero locus.
        """
        if split and not self.in_zero_locus(pt):
            raise DomainError("the vertical/transverse splitting needs a point of the zero locus")
        first = self.action.matrix if self.action.kind == "subtorus" else np.zeros((self.d, 0))
        U = _orthonormal_complement(pt.p, first)
        return Frame(pt, self.tau, U, self.d_G, split)

    def displace(self, pt: TubePoint, frame: Frame, theta: float, v) -> TubePoint:
        """Move from `pt` by ``theta * reeb + sum v_i e_i`` in the frame.

        The ``x`` part moves linearly.  The ``p`` part follows the great circle
        of the momentum sphere with initial velocity ``dp``, so ``|p| = tau``
        holds exactly and the move agrees with the linear one to first order.

        Raises
        ------
        DomainError
            If the displacement is not small compared with ``tau``.
        """
        dx, dp = frame.tangent(theta, v)
        size = math.hypot(np.linalg.norm(dx), np.linalg.norm(dp))
        if size >= self.tau / 2:
            raise DomainError(f"displacement {size:.3g} is not small relative to tau={self.tau}")
        return TubePoint(pt.x + dx, self._rotate_p(pt.p, dp))

    def _rotate_p(self, p: np.ndarray, dp: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(dp)
        if r == 0.0:
            return p.copy()
        ang = r / self.tau
        q = math.cos(ang) * p + self.tau * math.sin(ang) * dp / r
        return self.tau * q / np.linalg.norm(q)

    def flow_linearization(self, pt12: TubePoint, t1: float,
                           frames: tuple[Frame, Frame] | None = None,
                           h: float = 1e-6) -> Linearization:
        """Jacobian of the time ``-t1`` flow in horizontal frames.

        Parameters
        ----------
        pt12 : TubePoint
            Base point; the flow maps it to ``x2 = flow(pt12, -t1)``.
        t1 : float
        frames : pair of Frame, optional
            Frames at ``pt12`` and ``x2`` (built with :meth:`nhlc_frame` if omitted).
        h : float
            Central finite-difference step.

        Returns
        -------
        Linearization
            ``B`` with column j the image of the j-th horizontal coordinate
            vector, the symplectic defect of ``B`` and the largest Reeb
            component of the images (zero when the flow preserves the contact
            plane).
        """
        x2 = self.geodesic_flow(pt12, -t1)
        if frames is None:
            frames = (self.nhlc_frame(pt12), self.nhlc_frame(x2))
        f1, f2 = frames

        def flow_ext(x, p):
            # homogeneous extension off the sphere |p| = tau
            return x - t1 * p / np.linalg.norm(p), p

        n2 = 2 * f1.n
        B = np.zeros((n2, n2))
        leak = 0.0
        for j in range(n2):
            e = np.zeros(n2)
            e[j] = 1.0
            dx, dp = f1.tangent(0.0, e)
            xp, pp = flow_ext(pt12.x + h * dx, pt12.p + h * dp)
            xm, pm = flow_ext(pt12.x - h * dx, pt12.p - h * dp)
            theta, coords = f2.coordinates((xp - xm) / (2 * h), (pp - pm) / (2 * h))
            B[:, j] = coords
            leak = max(leak, abs(theta))
        return Linearization(B, symplectic_defect(B), leak)

    # -- orbits and volumes ---------------------------------------------------

    def injectivity_threshold(self) -> float:
        """Shortest time ``t != 0`` with ``flow_t(x) = g x`` possible for some x, g."""
        if self.action.kind == "finite-cyclic":
            g = np.array(self.action.generators[0], dtype=float)
            best = 2 * np.pi
            for j in range(1, self.action.m):
                s = 2 * np.pi * j * g / self.action.m
                r = s - 2 * np.pi * np.round(s / (2 * np.pi))
                nr = np.linalg.norm(r)
                if nr > 1e-12:
                    best = min(best, nr)
            return float(best)
        Q, _ = np.linalg.qr(self.action.matrix)
        best = np.inf
        for n in itertools.product(range(-2, 3), repeat=self.d):
            w = 2 * np.pi * np.array(n, dtype=float)
            r = w - Q @ (Q.T @ w)
            nr = np.linalg.norm(r)
            if nr > 1e-9:
                best = min(best, nr)
        return float(best)

    def orbit_intersection(self, x1: TubePoint, x2: TubePoint, cutoff, tol: float = 1e-9):
        """Solve ``g . flow_t(x2) = x1`` for ``t`` in the support of the cutoff.

        Parameters
        ----------
        x1, x2 : TubePoint
        cutoff : object with a ``support`` attribute, or a pair ``(lo, hi)``
        tol : float
            Residual tolerance on the torus.

        Returns
        -------
        list of (group element, t)
            Sorted by ``t`` then by element.  Empty when ``x1`` is not on the
            flow-out of the orbit of ``x2`` within the support.

        Raises
        ------
        DomainError
            If the support is too long for the solution to be unique.
        """
        lo, hi = getattr(cutoff, "support", cutoff)
        if hi - lo >= self.injectivity_threshold():
            raise DomainError("cutoff support exceeds the injectivity threshold of the model")
        if np.linalg.norm(x1.p - x2.p) > tol * max(1.0, self.tau):
            return []
        phat = x2.p / self.tau
        w0 = x1.x - x2.x
        ts = np.arange(lo, hi + 0.5, 0.5)
        out = []
        if self.action.kind == "finite-cyclic":
            for j in range(self.action.m):
                w = w0 - self.action.shift(j)
                cands = {tuple(np.round((t * phat - w) / (2 * np.pi)).astype(int)) for t in ts}
                for n in sorted(cands):
                    rhs = w + 2 * np.pi * np.array(n)
                    t = float(rhs @ phat)
                    if lo - tol <= t <= hi + tol and np.linalg.norm(rhs - t * phat) <= tol:
                        out.append((j, t))
        else:
            G = self.action.matrix
            k = G.shape[1]
            spacing = 0.5 / max(1.0, float(np.max(np.linalg.norm(G, axis=0))))
            cgrid = np.arange(0.0, 2 * np.pi + spacing, spacing)
            cands = set()
            for t in ts:
                for c in itertools.product(cgrid, repeat=k):
                    cands.add(tuple(np.round((t * phat + G @ np.array(c) - w0) / (2 * np.pi)).astype(int)))
            A = np.column_stack([phat, G])
            seen = set()
            for n in sorted(cands):
                rhs = w0 + 2 * np.pi * np.array(n)
                sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
                t, c = float(sol[0]), np.mod(sol[1:], 2 * np.pi)
                if not (lo - tol <= t <= hi + tol) or np.linalg.norm(A @ sol - rhs) > tol:
                    continue
                key = (round(t, 8),) + tuple(np.round(c, 8) % round(2 * np.pi, 8))
                if key not in seen:
                    seen.add(key)
                    out.append((c, t))
        out.sort(key=lambda e: (e[1], tuple(np.atleast_1d(e[0]))))
        return out

    def effective_volume(self, pt: TubePoint) -> float:
        """Volume of the orbit through `pt` in the halved metric.

        Subtorus actions: quadrature of the orbit density over the parameter
        torus, divided by the stabilizer order.  Finite actions: the number of
        points in the orbit.

        Raises
        ------
        DomainError
            If `pt` is not in the zero locus.
        """
        if not self.in_zero_locus(pt):
            raise DomainError("effective volume is defined on the zero locus")
        if self.action.kind == "finite-cyclic":
            return float(self.action.m // self.action.stabilizer_order)
        G = self.action.matrix
        k = G.shape[1]
        nodes = np.linspace(0.0, 2 * np.pi, 9)[:-1]
        total = 0.0
        for theta in itertools.product(nodes, repeat=k):
            # the orbit map theta -> x + G theta has constant metric 0.5 G^T G
            gram = 0.5 * G.T @ G
            total += math.sqrt(np.linalg.det(gram))
        total *= (2 * np.pi / len(nodes)) ** k
        return total / self.action.stabilizer_order

    def tube_volume(self) -> float:
        """Volume of the boundary for ``dx x dS(p)``, the Euclidean-induced density."""
        return (2 * np.pi) ** self.d * sphere_area(self.d - 1) * self.tau ** (self.d - 1)

    def zero_locus_volume(self, density: str = "riemannian") -> float:
        """Volume of the zero locus, both components counted when it is disconnected.

        Parameters
        ----------
        density : {"riemannian", "halved"}
            ``"riemannian"`` uses the Euclidean metric in ``(x, p)``;
            ``"halved"`` uses half of it.
        """
        k = self.d_G
        sdim = self.d - k - 1
        vol = (2 * np.pi) ** self.d * sphere_area(sdim) * self.tau ** sdim
        if density == "riemannian":
            return vol
        if density == "halved":
            return vol * 2.0 ** (-(self.d + sdim) / 2)
        raise DomainError(f"unknown density {density!r}")

    def quotient_volume(self, density: str = "riemannian") -> float:
        """Volume of the orbit space ``Z / G``.

        The zero-locus volume in the chosen density divided by the orbit volume
        in the halved metric.

        Raises
        ------
        DomainError
            Unless the action is a free subtorus action.
        """
        if self.action.kind != "subtorus" or self.action.stabilizer_order != 1:
            raise DomainError("quotient volume needs a free subtorus action")
        pt = self.point(np.zeros(self.d), self.tau * _unit_perp(self.action.matrix))
        return self.zero_locus_volume(density) / self.effective_volume(pt)


def sphere_area(m: int) -> float:
    """Area of the unit sphere of dimension m (``m = 0`` gives 2 points)."""
    return float(2 * np.pi ** ((m + 1) / 2) / gamma((m + 1) / 2))


def _unit_perp(G: np.ndarray) -> np.ndarray:
    """A unit coordinate direction projected off the span of the columns of G."""
    d = G.shape[0]
    Q, _ = np.linalg.qr(G)
    for j in range(d):
        e = np.eye(d)[:, j]
        r = e - Q @ (Q.T @ e)
        if np.linalg.norm(r) > 1e-8:
            return r / np.linalg.norm(r)
    raise DomainError("generators span the whole space")


def torus_shear(n: int, t1: float, tau: float) -> np.ndarray:
    """Closed-form linearization of the time ``-t1`` flow: ``[[I, -t1/tau I], [0, I]]``."""
    eye = np.eye(n)
    return np.block([[eye, -t1 / tau * eye], [np.zeros((n, n)), eye]])
