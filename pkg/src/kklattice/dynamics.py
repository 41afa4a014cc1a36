"""Time evolution of the lab-frame lattice amplitudes.

    i dc_n/dt = -kappa (c_{n+1} + c_{n-1}) + V(n a + v t) c_n

with open (hard-wall) ends.  ``evolve`` is an adaptive classical RK4 with
step doubling; ``free_propagate`` is the exact V = 0 propagator used as the
reference and as a test oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import jv

from .lattice import LatticeSpec
from .potentials import Potential, sample_on_lattice

__all__ = [
    "FieldState",
    "IntegratorConfig",
    "Evolution",
    "EdgeLeakWarning",
    "StepUnderflowError",
    "rhs",
    "evolve",
    "free_propagate",
    "bessel_propagate",
    "hopping_matrix",
    "gaussian_packet",
    "write_snapshots",
]


class EdgeLeakWarning(UserWarning):
    pass


class StepUnderflowError(ArithmeticError):
    pass


@dataclass
class FieldState:
    t: float
    c: np.ndarray
    norm_tag: float | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=complex)
        if self.norm_tag is None:
            self.norm_tag = float(np.vdot(self.c, self.c).real)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.c, self.c).real)

    def check(self, spec: LatticeSpec) -> None:
        if self.c.shape != (spec.size,):
            raise ValueError(f"state has {self.c.shape} sites, lattice has {spec.size}")


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 0.5
    edge_guard: float = 1e-6

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass
class Evolution:
    """Outcome of :func:`evolve`."""

    state: FieldState
    snapshots: list[FieldState] = field(default_factory=list)
    edge_leak: float = 0.0
    leaked: bool = False
    error_estimate: float = 0.0
    n_steps: int = 0
    n_rejected: int = 0


def rhs(state: FieldState, p: Potential | None, spec: LatticeSpec) -> np.ndarray:
    """``dc/dt = i kappa (c_{n+1} + c_{n-1}) - i V(n a + v t) c_n``."""
    V = sample_on_lattice(p, spec, state.t).values
    return _deriv(state.c, V, spec.kappa)


def _deriv(y, V, kappa):
    out = np.empty_like(y)
    out[1:-1] = y[2:] + y[:-2]
    out[0] = y[1]
    out[-1] = y[-2]
    out *= 1j * kappa
    out -= 1j * V * y
    return out


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


def _rk4_step_k1(f, t, y, h, k1):
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(
    state0: FieldState,
    p: Potential | None,
    spec: LatticeSpec,
    cfg: IntegratorConfig = IntegratorConfig(),
    t_final: float = 50.0,
    snapshot_times=(),
) -> Evolution:
    """Integrate from ``state0.t`` to ``t_final`` with adaptive RK4.

    Each step is taken once with ``h`` and twice with ``h/2``; the difference
    (divided by 15) is the local error estimate, measured component-wise
    against ``abs_tol + rel_tol * |c|``.  Accepted steps keep the
    Richardson-extrapolated value.  The potential is re-sampled at every
    stage time.
    """
    state0.check(spec)
    t0 = float(state0.t)
    if not t_final > t0:
        raise ValueError(f"t_final={t_final} must exceed the initial time {t0}")
    snaps = sorted(float(s) for s in snapshot_times)
    if snaps and (snaps[0] < t0 or snaps[-1] > t_final):
        raise ValueError("snapshot times must lie within [t0, t_final]")

    kappa = spec.kappa
    drift = 0.0 if p is None else p.v
    static = None
    if p is None:
        static = np.zeros(spec.size, dtype=complex)
    elif drift == 0:
        static = sample_on_lattice(p, spec, t0).values

    def f(t, y):
        V = static if static is not None else sample_on_lattice(p, spec, t).values
        return _deriv(y, V, kappa)

    h_min = 1e-12 / kappa
    t, y = t0, state0.c.copy()
    h = min(cfg.max_step, 0.05 / kappa, t_final - t0)
    out = Evolution(state=state0)
    snap_iter = iter(snaps)
    next_snap = next(snap_iter, None)
    while next_snap is not None and next_snap <= t0:
        out.snapshots.append(FieldState(t0, y.copy()))
        next_snap = next(snap_iter, None)
    warned = False

    while t < t_final:
        target = t_final if next_snap is None else min(t_final, next_snap)
        h = min(h, cfg.max_step, target - t)
        k1 = f(t, y)
        while True:
            if h < h_min:
                raise StepUnderflowError(f"step {h:.3g} fell below {h_min:.3g} at t={t:.6g}")
            y_big = _rk4_step_k1(f, t, y, h, k1)
            y_half = _rk4_step_k1(f, t, y, 0.5 * h, k1)
            y_small = _rk4_step(f, t + 0.5 * h, y_half, 0.5 * h)[0]
            diff = (y_small - y_big) / 15.0
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_small))
            err = float(np.max(np.abs(diff) / scale))
            if err <= 1.0:
                break
            out.n_rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
        y = y_small + diff
        t = target if abs(target - (t + h)) < 1e-12 * max(1.0, abs(target)) else t + h
        out.n_steps += 1
        out.error_estimate += float(np.max(np.abs(diff)))
        edge = max(abs(y[0]), abs(y[-1]))
        out.edge_leak = max(out.edge_leak, edge)
        if edge > cfg.edge_guard:
            out.leaked = True
            if not warned:
                warnings.warn(
                    f"edge leak: |c| = {edge:.3g} at the lattice boundary (t={t:.4g})",
                    EdgeLeakWarning,
                    stacklevel=2,
                )
                warned = True
        while next_snap is not None and t >= next_snap:
            out.snapshots.append(FieldState(t, y.copy()))
            next_snap = next(snap_iter, None)
        h *= min(5.0, 0.9 * err ** -0.2) if err > 0 else 5.0

    out.state = FieldState(t, y)
    return out


def hopping_matrix(spec: LatticeSpec) -> np.ndarray:
    """Dense ``H_0`` with ``-kappa`` on the first off-diagonals."""
    n = spec.size
    H = np.zeros((n, n))
    i = np.arange(n - 1)
    H[i, i + 1] = H[i + 1, i] = -spec.kappa
    return H


def _free_eigensystem(spec: LatticeSpec):
    n = spec.size
    return eigh_tridiagonal(np.zeros(n), -spec.kappa * np.ones(n - 1))


def free_propagate(state0: FieldState, spec: LatticeSpec, t: float) -> FieldState:
    """Exact V = 0 evolution by ``t`` (absolute time ``state0.t + t``).

    Up to 512 sites this diagonalises the tridiagonal hopping matrix, giving
    ``exp(-i H_0 t)`` to rounding; larger lattices use the image-sum Bessel
    kernel of :func:`bessel_propagate`.
    """
    state0.check(spec)
    if t == 0:
        return FieldState(state0.t, state0.c.copy())
    if spec.size > 512:
        return bessel_propagate(state0, spec, t)
    w, U = _free_eigensystem(spec)
    c = U @ (np.exp(-1j * w * t) * (U.T @ state0.c))
    return FieldState(state0.t + t, c)


def bessel_propagate(state0: FieldState, spec: LatticeSpec, t: float, tol: float = 1e-16) -> FieldState:
    """V = 0 evolution from the lattice Bessel kernel.

    On the infinite chain ``c_n(t) = sum_m i^(n-m) J_(n-m)(2 kappa t) c_m(0)``.
    Hard walls just outside ``n_min`` and ``n_max`` are imposed by odd images
    with period ``2 (N + 1)``.
    """
    N = spec.size
    z = 2.0 * spec.kappa * t
    period = 2 * (N + 1)
    # |J_j(z)| < tol for |j| beyond this order
    jmax = int(abs(z) + 10 + 10 * abs(z) ** (1 / 3))
    while abs(jv(jmax, z)) > tol and jmax < 10 * (N + abs(z) + 10):
        jmax += 10

    def kernel(j):
        j = np.asarray(j)
        out = np.zeros(j.shape, dtype=complex)
        ok = np.abs(j) <= jmax
        jj = j[ok]
        out[ok] = (1j) ** np.mod(jj, 4) * jv(jj, z)
        return out

    idx = np.arange(1, N + 1)
    diff = idx[:, None] - idx[None, :]
    summ = idx[:, None] + idx[None, :]
    n_img = jmax // period + 2
    G = np.zeros((N, N), dtype=complex)
    for s in range(-n_img, n_img + 1):
        G += kernel(diff + s * period) - kernel(summ + s * period)
    return FieldState(state0.t + t, G @ state0.c)


def gaussian_packet(spec: LatticeSpec, q0: float, d: float, w: float, tail_tol: float = 1e-10) -> FieldState:
    """Normalised ``exp(-(n a - d)^2 / w^2) exp(i q0 n a)`` at ``t = 0``."""
    if not w > 0:
        raise ValueError(f"w must be positive, got {w}")
    x = spec.positions
    if not x[0] <= d <= x[-1]:
        raise ValueError(f"packet centre d={d} is outside the lattice [{x[0]}, {x[-1]}]")
    c = np.exp(-((x - d) ** 2) / w**2) * np.exp(1j * q0 * x)
    c /= np.linalg.norm(c)
    tail = max(abs(c[0]), abs(c[-1]))
    if tail > tail_tol:
        warnings.warn(f"packet tail {tail:.3g} at the lattice edge", EdgeLeakWarning, stacklevel=2)
    return FieldState(0.0, c)


def write_snapshots(path, states, spec: LatticeSpec, append: bool = False) -> None:
    """CSV with columns ``t, n, re, im`` (one row per site per snapshot)."""
    import csv
    from pathlib import Path

    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            fh.write(f"# t in 1/kappa, n = x/a, amplitudes c_n; kappa={spec.kappa!r} a={spec.a!r}\n")
            writer.writerow(["t", "n", "re", "im"])
        for s in states:
            for n, cn in zip(spec.sites, s.c):
                writer.writerow([repr(float(s.t)), int(n), repr(float(cn.real)), repr(float(cn.imag))])
