"""Tight-binding lattice conventions and the moving-frame dispersion relation.

In the frame that drifts with the potential at speed ``v`` the band picks up a
linear ramp, ``E(q) = -2 kappa cos(q a) + q v``.  Elastic scattering of an
incident Bloch wave ``q0`` couples it to every real root of ``E(q) = E(q0)``;
roots with non-negative group velocity are transmitted-like, the others are
reflected-like.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LatticeSpec",
    "DispersionSolution",
    "energy",
    "group_velocity",
    "critical_velocity",
    "find_elastic_roots",
    "find_elastic_roots_mirrored",
    "elastic_roots_for",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Finite open chain of sites ``n_min..n_max`` with hopping ``kappa``."""

    kappa: float = 1.0
    a: float = 1.0
    n_min: int = -100
    n_max: int = 100

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.n_max - self.n_min + 1 < 3:
            raise ValueError(
                f"need at least 3 sites, got n_min={self.n_min}, n_max={self.n_max}"
            )

    @property
    def size(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def positions(self) -> np.ndarray:
        return self.sites * self.a


@dataclass
class DispersionSolution:
    """Real roots of ``E(q) = E0`` split by the sign of the group velocity.

    ``q_beta`` holds roots with ``v_g >= 0`` (tangent roots included and also
    listed in ``tangent``); ``Q_alpha`` holds roots with ``v_g < 0``.
    """

    E0: float
    q0: float | None
    v: float
    q_beta: list[float]
    Q_alpha: list[float]
    tol: float
    tangent: list[float] = field(default_factory=list)

    @property
    def roots(self) -> list[float]:
        return sorted(self.q_beta + self.Q_alpha)


def energy(q, v: float, spec: LatticeSpec):
    """Moving-frame band energy ``-2 kappa cos(q a) + q v``."""
    return -2.0 * spec.kappa * np.cos(q * spec.a) + q * v


def group_velocity(q, v: float, spec: LatticeSpec):
    """``dE/dq = 2 a kappa sin(q a) + v``."""
    return 2.0 * spec.a * spec.kappa * np.sin(q * spec.a) + v


def critical_velocity(spec: LatticeSpec) -> float:
    """Drift speed ``2 kappa a`` above which ``E(q)`` is monotone."""
    return 2.0 * spec.kappa * spec.a


def _bisect(f, lo: np.ndarray, hi: np.ndarray, max_iter: int = 200) -> np.ndarray:
    """Vectorised bisection; every ``[lo, hi]`` must bracket a sign change."""
    f_lo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        f_mid = f(mid)
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
    # pick the endpoint with the smaller residual
    return np.where(np.abs(f(lo)) <= np.abs(f(hi)), lo, hi)


def _extrema(lo: float, hi: float, v: float, spec: LatticeSpec) -> np.ndarray:
    """Points in ``(lo, hi)`` where ``sin(q a) = -v / (2 kappa a)``."""
    s = v / critical_velocity(spec)
    if s >= 1.0:
        return np.empty(0)
    base = np.arcsin(s)
    two_pi = 2.0 * np.pi
    k_lo = int(np.floor(lo * spec.a / two_pi)) - 1
    k_hi = int(np.ceil(hi * spec.a / two_pi)) + 1
    k = np.arange(k_lo, k_hi + 1) * two_pi
    pts = np.concatenate([-base + k, np.pi + base + k]) / spec.a
    pts = pts[(pts > lo) & (pts < hi)]
    return np.sort(pts)


def _classify(roots, E0, q0, v, spec, tol, tangent_mask) -> DispersionSolution:
    roots = np.asarray(roots, dtype=float)
    order = np.argsort(roots)
    roots = roots[order]
    tangent_mask = np.asarray(tangent_mask, dtype=bool)[order]
    vg = group_velocity(roots, v, spec)
    beta = tangent_mask | (vg >= 0)
    return DispersionSolution(
        E0=float(E0),
        q0=q0,
        v=float(v),
        q_beta=[float(r) for r in roots[beta]],
        Q_alpha=[float(r) for r in roots[~beta]],
        tol=tol,
        tangent=[float(r) for r in roots[tangent_mask]],
    )


def _rest_frame_roots(E0: float, spec: LatticeSpec, tol: float):
    """Roots of ``-2 kappa cos(q a) = E0`` in the zone ``(-pi/a, pi/a]``."""
    c = -E0 / (2.0 * spec.kappa)
    if abs(c) > 1.0:
        # allow a tangency within tol of the band edge
        if abs(2.0 * spec.kappa * (abs(c) - 1.0)) > tol:
            return [], []
        c = np.sign(c)
    q = float(np.arccos(c)) / spec.a
    if q * spec.a in (0.0, np.pi) or abs(np.sin(q * spec.a)) * 2.0 * spec.kappa * spec.a < tol:
        return [q], [True]
    return [-q, q], [False, False]


def find_elastic_roots(
    E0: float,
    v: float,
    spec: LatticeSpec,
    tol: float = 1e-12,
    q0: float | None = None,
) -> DispersionSolution:
    """All real roots of ``E(q) = E0`` for a drift ``v >= 0``.

    For ``v > 0`` the roots live in ``[(E0 - 2 kappa)/v, (E0 + 2 kappa)/v]``.
    The interval is cut at the analytic extrema of ``E``; each monotone piece
    holds at most one root, found by bisection.  For ``v = 0`` the band is
    periodic and only first-zone roots are returned.

    If ``q0`` is given it is the incident wavenumber with ``E(q0) = E0``; the
    bisected root closest to it is replaced by ``q0`` itself.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if v < 0:
        raise ValueError("v must be >= 0; use find_elastic_roots_mirrored for v < 0")

    def f(q):
        return energy(q, v, spec) - E0

    if v == 0:
        roots, tangent = _rest_frame_roots(E0, spec, tol)
    else:
        lo = (E0 - 2.0 * spec.kappa) / v
        hi = (E0 + 2.0 * spec.kappa) / v
        knots = np.concatenate([[lo], _extrema(lo, hi, v, spec), [hi]])
        fk = f(knots)
        on_knot = np.abs(fk) <= tol
        roots = list(knots[on_knot])
        vg = group_velocity(knots[on_knot], v, spec)
        tangent = list(np.abs(vg) <= max(tol, 1e-12))
        sign_change = (np.sign(fk[:-1]) * np.sign(fk[1:]) < 0) & ~on_knot[:-1] & ~on_knot[1:]
        if np.any(sign_change):
            found = _bisect(f, knots[:-1][sign_change], knots[1:][sign_change])
            roots.extend(found)
            tangent.extend([False] * len(found))
        bad = [r for r in roots if abs(f(r)) > tol]
        if bad:
            raise ArithmeticError(f"bisection residual above tol={tol} at q={bad}")

    if q0 is not None and roots:
        ref = q0
        if v == 0:
            # fold into the first zone
            ref = np.pi / spec.a - np.mod(np.pi / spec.a - q0, 2.0 * np.pi / spec.a)
        i = int(np.argmin(np.abs(np.asarray(roots) - ref)))
        if abs(roots[i] - ref) < 1e-9 * max(1.0, abs(ref)):
            roots[i] = ref
    return _classify(roots, E0, q0, v, spec, tol, tangent)


def find_elastic_roots_mirrored(
    E0: float,
    v: float,
    spec: LatticeSpec,
    tol: float = 1e-12,
    q0: float | None = None,
) -> DispersionSolution:
    """Like :func:`find_elastic_roots` but accepts any sign of ``v``.

    ``E(q; -v) = E(-q; v)``, so for ``v < 0`` the roots are the negated roots
    of the ``|v|`` problem and their group velocities flip sign.
    """
    if v >= 0:
        return find_elastic_roots(E0, v, spec, tol, q0)
    mirror = find_elastic_roots(E0, -v, spec, tol, None if q0 is None else -q0)
    roots = [-r for r in mirror.roots]
    tangent_set = {-r for r in mirror.tangent}
    if q0 is not None:
        roots = [q0 if abs(r - q0) < 1e-9 * max(1.0, abs(q0)) else r for r in roots]
    return _classify(
        roots, E0, q0, v, spec, tol, [r in tangent_set for r in roots]
    )


def elastic_roots_for(q0: float, v: float, spec: LatticeSpec, tol: float = 1e-12) -> DispersionSolution:
    """Roots at the energy of the incident wave ``q0`` (``E0 = E(q0)``)."""
    return find_elastic_roots_mirrored(float(energy(q0, v, spec)), v, spec, tol, q0=q0)
