"""Kramers-Kronig potentials: evaluation, lattice sampling, spectra and checks.

The family used throughout is

    V(x) = V0 * exp(i Omega x) / (x/a + i alpha)**m,    alpha > 0,

whose only pole sits at ``x = -i alpha a``.  V is therefore holomorphic in
the closed upper half plane and its Fourier transform (convention
``V^(k) = int V(x) exp(-i k x) dx``) is supported on ``k >= Omega``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.signal import fftconvolve

from .lattice import LatticeSpec

__all__ = [
    "KKPotential",
    "FunctionPotential",
    "TabulatedPotential",
    "SampledPotential",
    "PoleEvaluationError",
    "WindowWarning",
    "evaluate",
    "sample_on_lattice",
    "exact_spectrum",
    "spectrum",
    "hilbert_transform",
    "kk_residual",
    "holomorphy_log_slope",
    "load_table",
    "save_table",
]


class PoleEvaluationError(ValueError):
    pass


class WindowWarning(UserWarning):
    """Sampling window too small for the potential's decay."""


@dataclass(frozen=True)
class KKPotential:
    """Closed-form drifting Kramers-Kronig potential.

    Attributes:
        V0: complex amplitude (energy units).
        Omega: carrier wavenumber, ``>= 0``.
        alpha: pole offset in units of ``a``; must be positive.
        m: pole order.
        v: drift velocity; the lattice sees ``V(n a + v t)``.
        a: length unit used in ``x/a``.
    """

    V0: complex
    Omega: float
    alpha: float
    m: int = 1
    v: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be an integer >= 1, got {self.m}")
        if self.Omega < 0:
            raise ValueError(f"Omega must be >= 0, got {self.Omega}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")

    def __call__(self, x):
        return evaluate(self, x)

    def with_(self, **changes) -> "KKPotential":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class FunctionPotential:
    """Arbitrary callable ``func(x)`` on real positions, optionally drifting."""

    func: Callable[[np.ndarray], np.ndarray]
    v: float = 0.0

    def __call__(self, x):
        return np.asarray(self.func(x), dtype=complex)


@dataclass(frozen=True)
class TabulatedPotential:
    """Site-indexed values loaded from a file; static only."""

    n: np.ndarray
    values: np.ndarray

    @property
    def v(self) -> float:
        return 0.0


Potential = Union[KKPotential, FunctionPotential, TabulatedPotential]


@dataclass
class SampledPotential:
    values: np.ndarray
    time_tag: float


def evaluate(p: KKPotential, x):
    """``V0 exp(i Omega x) / (x/a + i alpha)^m`` at (possibly complex) ``x``."""
    x = np.asarray(x, dtype=complex)
    z = x / p.a + 1j * p.alpha
    if np.any(np.abs(z) < 1e-12):
        raise PoleEvaluationError(f"pole evaluation at x = {-1j * p.alpha * p.a}")
    return p.V0 * np.exp(1j * p.Omega * x) / z**p.m


def _real_axis(p, x):
    if isinstance(p, KKPotential):
        return evaluate(p, x)
    if isinstance(p, FunctionPotential):
        return p(x)
    raise TypeError(f"cannot evaluate {type(p).__name__} off the lattice")


def sample_on_lattice(p: Potential | None, spec: LatticeSpec, t: float = 0.0) -> SampledPotential:
    """Values ``V(n a + v t)`` on every site of ``spec``."""
    if p is None:
        return SampledPotential(np.zeros(spec.size, dtype=complex), t)
    if isinstance(p, TabulatedPotential):
        values = np.zeros(spec.size, dtype=complex)
        idx = np.asarray(p.n) - spec.n_min
        keep = (idx >= 0) & (idx < spec.size)
        values[idx[keep]] = np.asarray(p.values)[keep]
        return SampledPotential(values, t)
    x = spec.positions + p.v * t
    return SampledPotential(np.asarray(_real_axis(p, x), dtype=complex), t)


def exact_spectrum(p: KKPotential, k, delta: float = 0.0):
    """Closed-form Fourier transform of ``G(xi) = V(xi + i delta a)``.

    Residue evaluation gives, with ``s = k - Omega`` and ``b = (alpha + delta) a``,

        G^(k) = V0 a^m (-2 pi i) (-i s)^(m-1) / (m-1)! * exp(-s b - Omega delta a)

    for ``s > 0`` and zero for ``s < 0`` (half the jump at ``s = 0``).
    For ``delta = 0`` this is the spectrum of V itself.
    """
    k = np.asarray(k, dtype=float)
    s = k - p.Omega
    b = (p.alpha + delta) * p.a
    sp = np.where(s > 0, s, 0.0)
    amp = (
        p.V0
        * p.a**p.m
        * (-2j * np.pi)
        * (-1j * sp) ** (p.m - 1)
        / math.factorial(p.m - 1)
        * np.exp(-sp * b - p.Omega * delta * p.a)
    )
    step = np.where(s > 0, 1.0, np.where(s == 0, 0.5, 0.0))
    return amp * step


def _fft_transform(samples: np.ndarray, x0: float, dx: float):
    n = samples.size
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    vals = dx * np.exp(-1j * k * x0) * np.fft.fft(samples)
    order = np.argsort(k)
    return k[order], vals[order]


def spectrum(p: KKPotential, window_half_width: float, n_samples: int = 2**16):
    """Discrete approximation of ``V^(k)`` from samples on ``[-L, L)``.

    Returns ``(k, V_hat)`` sorted by ``k``.  The grid must reach ``|k| >= 4 Omega``.
    """
    L = float(window_half_width)
    if n_samples < 1024 or n_samples & (n_samples - 1):
        raise ValueError(f"n_samples must be a power of two >= 1024, got {n_samples}")
    dx = 2.0 * L / n_samples
    if np.pi / dx < 4.0 * p.Omega:
        raise ValueError(
            f"k-grid reaches only {np.pi / dx:.3g}; need {4 * p.Omega:.3g} (raise n_samples)"
        )
    x = -L + dx * np.arange(n_samples)
    values = _real_axis(p, x)
    _check_window(p, L)
    return _fft_transform(values, x[0], dx)


def _check_window(p, L: float, rel: float = 1e-6):
    edge = max(abs(_real_axis(p, -L)), abs(_real_axis(p, L)))
    centre = abs(_real_axis(p, 0.0))
    if edge >= rel * centre:
        warnings.warn(
            f"|V(+-L)| = {edge:.3g} is not below {rel:g} |V(0)| = {rel * centre:.3g}",
            WindowWarning,
            stacklevel=3,
        )


def hilbert_transform(u: np.ndarray, taper: float = 0.05) -> np.ndarray:
    """Principal-value Hilbert transform ``(1/pi) PV int u(y) / (x - y) dy``.

    ``u`` is sampled on a uniform grid.  Uses the odd-offset kernel
    ``2 / (pi j)`` for odd ``j`` (exact for band-limited samples) as a linear
    convolution via FFT, so there is no wrap-around.  A cosine taper of
    relative width ``taper`` is applied at both ends.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if taper > 0:
        nt = max(1, int(taper * n))
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(nt) / nt))
        w = np.ones(n)
        w[:nt] = ramp
        w[n - nt:] = ramp[::-1]
        u = u * w
    j = np.arange(-(n - 1), n)
    kernel = np.zeros(j.size)
    odd = j % 2 != 0
    kernel[odd] = 2.0 / (np.pi * j[odd])
    return fftconvolve(u, kernel, mode="full")[n - 1 : 2 * n - 1]


def kk_residual(
    p: Potential,
    spec: LatticeSpec,
    step: float | None = None,
    widen: int = 8,
) -> float:
    """Normalised mismatch between ``Im V`` and the Hilbert transform of ``Re V``.

    V is sampled with spacing ``step`` (default ``a/32``) on a window ``widen``
    times the lattice span; the mismatch is measured over the lattice span
    only and normalised by ``||V||`` there.  Returns 0 for a vanishing V.
    """
    a = spec.a
    step = a / 32 if step is None else float(step)
    lo, hi = spec.n_min * a, spec.n_max * a
    half = 0.5 * widen * (hi - lo)
    centre = 0.5 * (lo + hi)
    n_half = int(np.ceil(half / step))
    x = centre + step * np.arange(-n_half, n_half + 1)
    V = np.asarray(_real_axis(p, x), dtype=complex)
    inside = (x >= lo) & (x <= hi)
    scale = np.linalg.norm(V[inside])
    if scale == 0:
        return 0.0
    H = hilbert_transform(V.real)
    return float(np.linalg.norm(V.imag[inside] - H[inside]) / scale)


def holomorphy_log_slope(p: KKPotential, x: np.ndarray, deltas=(1.0, 2.0)) -> float:
    """Slope of ``log max_x |V(x + i delta a)|`` against ``delta a``.

    For the KK family this is ``<= -Omega``.
    """
    d = np.asarray(deltas, dtype=float) * p.a
    logs = [np.log(np.max(np.abs(evaluate(p, x + 1j * di)))) for di in d]
    return float(np.polyfit(d, logs, 1)[0])


def load_table(path: str | Path) -> TabulatedPotential:
    """Read ``n  Re(V/kappa)  Im(V/kappa)`` lines (``#`` starts a comment)."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, got {data.shape[1]}")
    n = data[:, 0]
    if np.any(n != np.round(n)):
        raise ValueError(f"{path}: site indices must be integers")
    return TabulatedPotential(n.astype(int), data[:, 1] + 1j * data[:, 2])


def save_table(path: str | Path, n, values) -> None:
    values = np.asarray(values, dtype=complex)
    np.savetxt(
        path,
        np.column_stack([np.asarray(n), values.real, values.imag]),
        fmt=["%d", "%.17g", "%.17g"],
        header="n re_V_over_kappa im_V_over_kappa",
    )
