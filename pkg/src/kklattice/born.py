"""First-order scattering on the complex-displaced line ``X = xi + i delta a``.

On the displaced line the potential ``G(xi) = V(xi + i delta a)`` carries the
factor ``exp(-Omega delta a)`` uniformly, so for large ``delta`` one Born
iteration suffices.  With outgoing boundary conditions the first-order
amplitudes are residues of the Born integrand at the elastic roots,

    r_alpha(delta) = -i S(Q_alpha) / |v_g(Q_alpha)|,
    t_beta(delta)  = delta_{beta,0} - i S(q_beta) / |v_g(q_beta)|,

with ``S(k) = G^_delta(k - q0)``.  Real-axis amplitudes follow from the
exact connection formulas ``r(0) = r(delta) exp[-(q0 - Q) delta a]`` and the
same for ``t``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .lattice import (
    DispersionSolution,
    LatticeSpec,
    energy,
    find_elastic_roots_mirrored,
    group_velocity,
)
from .potentials import KKPotential, WindowWarning, _fft_transform, evaluate, exact_spectrum

__all__ = [
    "BornAmplitudes",
    "ConnectionRow",
    "PoleInRangeError",
    "ProjectionError",
    "displaced_spectrum",
    "displaced_transform",
    "born_phi",
    "born_amplitudes",
    "project_amplitudes",
    "connection_check",
    "mapped_amplitudes",
    "decay_slope",
]

UNIT = LatticeSpec()


class PoleInRangeError(ValueError):
    """An elastic root lies inside the one-sided Born integration range."""


class ProjectionError(ArithmeticError):
    pass


@dataclass
class BornAmplitudes:
    """First-order amplitudes on the line ``Im X = delta a``.

    ``r_alpha`` and ``t_beta`` hold ``(root, amplitude)`` pairs; the entry of
    ``t_beta`` whose root equals ``q0`` is the forward amplitude.  ``*_err``
    are quadrature error bounds on the amplitudes.  ``phi_norm`` is NaN when
    the Born integrand has poles in range.
    """

    delta: float
    q0: float
    r_alpha: list[tuple[float, complex]]
    t_beta: list[tuple[float, complex]]
    phi_norm: float = float("nan")
    r_err: list[float] = field(default_factory=list)
    t_err: list[float] = field(default_factory=list)

    @property
    def forward(self) -> complex:
        for q, t in self.t_beta:
            if q == self.q0:
                return t
        raise KeyError("forward root q0 missing from t_beta")


@dataclass
class ConnectionRow:
    kind: str  # "r" or "t"
    root: float
    amp1: complex
    amp2: complex
    mapped1: complex
    mapped2: complex
    residual: float
    resolved: bool
    bound: float = 0.0


def displaced_spectrum(p: KKPotential, delta: float, window_half_width: float = 400.0, n_samples: int = 2**16):
    """FFT estimate of ``G^_delta(k)`` for ``k >= 0``.

    ``G(xi) = V(xi + i delta a)`` is sampled on ``[-L, L)``; exactly
    ``G^_delta(k) = V^(k) exp(-k delta a)``.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    L = float(window_half_width)
    dx = 2.0 * L / n_samples
    if np.pi / dx < 4.0 * p.Omega:
        raise ValueError("k-grid does not reach 4 Omega; raise n_samples")
    xi = -L + dx * np.arange(n_samples)
    g = evaluate(p, xi + 1j * delta * p.a)
    g0 = abs(evaluate(p, 1j * delta * p.a))
    if max(abs(g[0]), abs(evaluate(p, L + 1j * delta * p.a))) >= 1e-6 * g0:
        warnings.warn("displaced potential not negligible at the window edge", WindowWarning, stacklevel=2)
    k, G = _fft_transform(g, xi[0], dx)
    keep = k >= 0
    return k[keep], G[keep]


def _envelope_derivative(p: KKPotential, d: float, x: float, n: int) -> complex:
    """n-th derivative of ``V0 exp(-Omega d) (x/a + i(alpha + d/a))^-m`` at ``x``."""
    z = x / p.a + 1j * (p.alpha + d / p.a)
    coef = 1.0
    for j in range(n):
        coef *= -(p.m + j)
    return p.V0 * math.exp(-p.Omega * d) * coef * z ** (-p.m - n) / p.a**n


def displaced_transform(p: KKPotential, delta: float, k: float, n_tail: int = 8):
    """Quadrature value of ``G^_delta(k) = int V(xi + i delta a) e^{-i k xi} dxi``.

    The carrier ``exp(i Omega xi)`` is pulled out and the envelope is
    integrated against ``cos``/``sin`` of ``w xi`` (``w = k - Omega``) on
    ``[-X, X]`` by adaptive oscillatory quadrature.  The two tails beyond
    ``X`` are summed from their integration-by-parts series
    ``e^{-i w X} sum_n f^(n)(X) / (i w)^(n+1)``.  Returns
    ``(value, error_bound)``.
    """
    d = delta * p.a
    w = float(k) - p.Omega
    b = (p.alpha + delta) * p.a
    scale = abs(evaluate(p, 1j * d)) * b

    def env(x):
        return evaluate(p, x + 1j * d) * np.exp(-1j * p.Omega * x)

    def sym(x):
        return env(x) + env(-x)

    def anti(x):
        return env(x) - env(-x)

    tol = 1e-15 * scale
    total = 0j
    err = 0.0
    if w == 0:
        for part, unit in ((lambda x: sym(x).real, 1.0), (lambda x: sym(x).imag, 1j)):
            val, e = integrate.quad(part, 0, np.inf, epsabs=tol, epsrel=1e-13, limit=1000)
            total += unit * val
            err += e
        return total, err
    aw = abs(w)
    sgn = 1.0 if w > 0 else -1.0
    X = max(200.0 * p.a, 100.0 * b, 60.0 / aw)
    # int_0^X [sym cos(w x) - i anti sin(w x)] dx
    pieces = (
        (lambda x: sym(x).real, "cos", 1.0),
        (lambda x: sym(x).imag, "cos", 1j),
        (lambda x: anti(x).real, "sin", -1j * sgn),
        (lambda x: anti(x).imag, "sin", sgn),
    )
    limit = int(min(20000, 200 + 4 * aw * X))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for f, weight, unit in pieces:
            val, e = integrate.quad(
                f, 0.0, X, weight=weight, wvar=aw, epsabs=tol, epsrel=1e-13, limit=limit
            )
            total += unit * val
            err += e
    # tails: int_X^inf f(x) e^{-iwx} dx + int_X^inf f(-y) e^{iwy} dy
    iw = 1j * w
    right = sum(_envelope_derivative(p, d, X, n) / iw ** (n + 1) for n in range(n_tail))
    left = sum((-1) ** n * _envelope_derivative(p, d, -X, n) / (-iw) ** (n + 1) for n in range(n_tail))
    tail = np.exp(-iw * X) * right + np.exp(iw * X) * left
    last = abs(_envelope_derivative(p, d, X, n_tail)) / aw ** (n_tail + 1)
    return total + tail, err + 2.0 * last


def _check_pole_free(p: KKPotential, q0: float, spec: LatticeSpec):
    if p.v == 0:
        raise PoleInRangeError(
            "pole in integration range: at v = 0 the band is periodic and roots recur for all k"
        )
    E0 = float(energy(q0, p.v, spec))
    roots = find_elastic_roots_mirrored(E0, p.v, spec, q0=q0)
    k_min = q0 + p.Omega
    top = max(roots.roots)
    if not top < k_min:
        raise PoleInRangeError(
            f"pole in integration range: elastic root {top:.6g} >= q0 + Omega = {k_min:.6g}; "
            "first-order extraction would need a contour prescription"
        )
    return E0, roots


def born_phi(p: KKPotential, delta: float, q0: float, xi_grid, spec: LatticeSpec = UNIT):
    """First-order correction ``phi(xi)`` on the displaced line.

        phi(xi) = (1/2pi) int_{q0+Omega}^inf G^_delta(k - q0) e^{i k xi} / D(k) dk,
        D(k) = E0 + 2 kappa cos(k a) - v k,

    using the closed-form spectrum of the KK family.  Refuses with
    :class:`PoleInRangeError` if ``D`` vanishes on the integration range.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    xi_grid = np.atleast_1d(np.asarray(xi_grid, dtype=float))
    if p.V0 == 0:
        return np.zeros(xi_grid.shape, dtype=complex)
    E0, _ = _check_pole_free(p, q0, spec)
    k_min = q0 + p.Omega
    b = (p.alpha + delta) * p.a
    k_max = k_min + (45.0 + 10.0 * (p.m - 1)) / b

    def F(k):
        D = E0 + 2.0 * spec.kappa * np.cos(k * spec.a) - p.v * k
        return exact_spectrum(p, k - q0, delta) / D

    ks = np.linspace(k_min, k_max, 257)
    fmax = float(np.max(np.abs(F(ks))))
    tol = 1e-13 * fmax * (k_max - k_min)
    out = np.empty(xi_grid.shape, dtype=complex)
    re = lambda k: F(k).real  # noqa: E731
    im = lambda k: F(k).imag  # noqa: E731
    for i, xi in enumerate(xi_grid):
        if xi == 0:
            cr = integrate.quad(re, k_min, k_max, epsabs=tol, epsrel=1e-11, limit=400)[0]
            ci = integrate.quad(im, k_min, k_max, epsabs=tol, epsrel=1e-11, limit=400)[0]
            out[i] = cr + 1j * ci
            continue
        kw = dict(wvar=xi, epsabs=tol, epsrel=1e-11, limit=400)
        rc = integrate.quad(re, k_min, k_max, weight="cos", **kw)[0]
        rs = integrate.quad(re, k_min, k_max, weight="sin", **kw)[0]
        ic = integrate.quad(im, k_min, k_max, weight="cos", **kw)[0]
        is_ = integrate.quad(im, k_min, k_max, weight="sin", **kw)[0]
        out[i] = (rc - is_) + 1j * (rs + ic)
    return out / (2.0 * np.pi)


def born_amplitudes(
    p: KKPotential,
    delta: float,
    q0: float,
    roots: DispersionSolution,
    spec: LatticeSpec = UNIT,
    phi_grid=None,
) -> BornAmplitudes:
    """Residue (outgoing-wave) first-order amplitudes at displacement ``delta``.

    Tangent roots (``v_g = 0``) get NaN amplitudes.  ``phi_norm`` is
    ``max |phi|`` over ``phi_grid`` (default ``xi in [-40a, 40a]``) when the
    integrand is pole-free.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    tangent = set(roots.tangent)

    def amp(k):
        if k in tangent:
            return complex("nan"), float("nan")
        vg = abs(float(group_velocity(k, p.v, spec)))
        if p.V0 == 0:
            return 0j, 0.0
        S, err = displaced_transform(p, delta, k - q0)
        return -1j * S / vg, err / vg

    r, r_err = [], []
    for Q in roots.Q_alpha:
        a, e = amp(Q)
        r.append((Q, a))
        r_err.append(e)
    t, t_err = [], []
    for q in roots.q_beta:
        a, e = amp(q)
        if q == q0:
            a = 1.0 + a
        t.append((q, a))
        t_err.append(e)
    phi_norm = float("nan")
    try:
        grid = np.arange(-40.0, 40.0 + 1e-9, 0.5) * spec.a if phi_grid is None else phi_grid
        phi_norm = float(np.max(np.abs(born_phi(p, delta, q0, grid, spec))))
    except PoleInRangeError:
        pass
    return BornAmplitudes(delta, q0, r, t, phi_norm, r_err, t_err)


def project_amplitudes(
    p: KKPotential,
    delta: float,
    q0: float,
    roots: DispersionSolution,
    spec: LatticeSpec = UNIT,
    L: float | None = None,
    n_points: int = 240,
) -> BornAmplitudes:
    """Least-squares plane-wave content of ``phi`` in the far windows.

    Projects ``phi`` on ``exp(i Q xi)`` over ``[-L, -L/2]`` and on
    ``exp(i q xi)`` over ``[L/2, L]`` (default ``L = 400 a``).  Only defined
    where :func:`born_phi` is (pole-free integrand).
    """
    L = 400.0 * spec.a if L is None else L
    resolution = 2.0 * np.pi / (0.5 * L)
    for group in (roots.Q_alpha, roots.q_beta):
        g = np.sort(np.asarray(group))
        if g.size > 1 and np.min(np.diff(g)) < resolution:
            raise ProjectionError(
                f"ill-conditioned projection: roots closer than {resolution:.3g}"
            )
    rng = np.random.default_rng(0)
    left = -L + 0.5 * L * np.sort(rng.random(n_points))
    right = 0.5 * L + 0.5 * L * np.sort(rng.random(n_points))

    def fit(xi, ks):
        if not ks:
            return []
        phi = born_phi(p, delta, q0, xi, spec)
        A = np.exp(1j * np.outer(xi, ks))
        coef = np.linalg.lstsq(A, phi, rcond=None)[0]
        return list(coef)

    r = fit(left, list(roots.Q_alpha))
    t = fit(right, list(roots.q_beta))
    t = [c + (1.0 if q == q0 else 0.0) for q, c in zip(roots.q_beta, t)]
    return BornAmplitudes(
        delta,
        q0,
        list(zip(roots.Q_alpha, r)),
        list(zip(roots.q_beta, t)),
    )


def mapped_amplitudes(b: BornAmplitudes, spec: LatticeSpec = UNIT):
    """Real-axis amplitudes via ``amp(0) = amp(delta) exp[-(q0 - root) delta a]``."""
    d = b.delta * spec.a
    r = [(Q, a * np.exp(-(b.q0 - Q) * d)) for Q, a in b.r_alpha]
    t = [(q, a * np.exp(-(b.q0 - q) * d)) for q, a in b.t_beta]
    return r, t


def connection_check(
    p: KKPotential,
    q0: float,
    delta1: float,
    delta2: float,
    roots: DispersionSolution,
    spec: LatticeSpec = UNIT,
    rel_floor: float = 1e-8,
):
    """Delta-independence of the connection-mapped amplitudes.

    Returns ``(rows, A_residual)``.  Each row carries the relative mismatch
    of the two mapped amplitudes and ``bound``, the mapped quadrature error
    bound summed over both deltas.  A row is ``resolved`` when the
    scattered amplitude is known to relative accuracy ``rel_floor`` at both
    deltas; unresolved amplitudes are numerically zero and their relative
    mismatch is meaningless.  ``A_residual`` compares the continued incident
    wave ``exp(i q0 (xi + i delta a)) / exp(i q0 xi)`` with ``exp(-q0 delta a)``.
    """
    b1 = born_amplitudes(p, delta1, q0, roots, spec, phi_grid=[0.0])
    b2 = b1 if delta2 == delta1 else born_amplitudes(p, delta2, q0, roots, spec, phi_grid=[0.0])
    m1r, m1t = mapped_amplitudes(b1, spec)
    m2r, m2t = mapped_amplitudes(b2, spec)
    d1, d2 = delta1 * spec.a, delta2 * spec.a
    rows = []
    for kind, pairs1, pairs2, mp1, mp2, e1, e2 in (
        ("r", b1.r_alpha, b2.r_alpha, m1r, m2r, b1.r_err, b2.r_err),
        ("t", b1.t_beta, b2.t_beta, m1t, m2t, b1.t_err, b2.t_err),
    ):
        for (k, a1), (_, a2), (_, x1), (_, x2), err1, err2 in zip(pairs1, pairs2, mp1, mp2, e1, e2):
            if kind == "t" and k == q0:
                s1, s2 = abs(a1 - 1.0), abs(a2 - 1.0)
            else:
                s1, s2 = abs(a1), abs(a2)
            resolved = err1 <= rel_floor * s1 and err2 <= rel_floor * s2
            big = max(abs(x1), abs(x2))
            res = 0.0 if big == 0 or x1 == x2 else float(abs(x1 - x2) / big)
            bound = err1 * math.exp(-(q0 - k) * d1) + err2 * math.exp(-(q0 - k) * d2)
            rows.append(ConnectionRow(kind, k, a1, a2, x1, x2, res, bool(resolved), float(bound)))
    A_res = 0.0
    for dd in (d1, d2):
        A_res = max(A_res, abs(np.exp(1j * q0 * (1j * dd)) - math.exp(-q0 * dd)) / math.exp(-q0 * dd))
    return rows, float(A_res)


def decay_slope(p: KKPotential, q0: float, deltas=(2.0, 4.0, 8.0), xi_grid=None, spec: LatticeSpec = UNIT):
    """Least-squares slope of ``log max|phi|`` against ``delta a``, and the norms."""
    xi_grid = np.arange(-40.0, 40.0 + 1e-9, 0.25) * spec.a if xi_grid is None else xi_grid
    norms = np.array([np.max(np.abs(born_phi(p, d, q0, xi_grid, spec))) for d in deltas])
    slope = np.polyfit(np.asarray(deltas) * spec.a, np.log(norms), 1)[0]
    return float(slope), norms
