"""Wave-packet scattering experiments and invisibility metrics.

A run evolves a Gaussian packet through the drifting potential and compares
the outcome with the same packet propagated freely.  The potential centre sits
at ``x = -v t`` (the lattice sees ``V(n a + v t)``), so at ``t = 0`` it is at
the origin; left incidence starts the packet at ``d < 0`` moving right.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dynamics import (
    EdgeLeakWarning,
    FieldState,
    IntegratorConfig,
    StepUnderflowError,
    evolve,
    free_propagate,
    gaussian_packet,
)
from .lattice import LatticeSpec, critical_velocity, elastic_roots_for, group_velocity
from .potentials import KKPotential, PoleEvaluationError, Potential, TabulatedPotential

__all__ = [
    "Packet",
    "ExperimentSpec",
    "ScatteringReport",
    "ScanRow",
    "EdgeLeakError",
    "DISTANCE_THRESHOLD",
    "REFLECTION_THRESHOLD",
    "run_experiment",
    "invisibility_distance",
    "reflected_fraction",
    "spectral_split",
    "window_reflected_fraction",
    "clearance_time",
    "covering_lattice",
    "adapt",
    "root_separation",
    "in_theorem_region",
    "on_theorem_boundary",
    "scan_invisibility",
    "write_scan_csv",
    "write_report_csv",
    "SCAN_COLUMNS",
]

DISTANCE_THRESHOLD = 1e-2
REFLECTION_THRESHOLD = 1e-4
FLAT_BIN = 1e-3  # |sin(q a)| below this counts as transmitted

SCAN_COLUMNS = [
    "v_over_kappa_a",
    "omega_a",
    "side",
    "invisibility_distance",
    "reflected_fraction",
    "transmitted_fraction",
    "edge_leak",
    "passed",
]


class EdgeLeakError(RuntimeError):
    """A run reached the lattice boundary; its numbers are not trustworthy."""


class Packet(NamedTuple):
    q0: float
    d: float
    w: float


@dataclass(frozen=True)
class ExperimentSpec:
    lattice: LatticeSpec
    potential: Potential
    packet: Packet
    t_final: float = 50.0
    incidence: str = "left"
    snapshots: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "packet", Packet(*map(float, self.packet)))
        object.__setattr__(self, "snapshots", tuple(float(s) for s in self.snapshots))
        if self.incidence not in ("left", "right"):
            raise ValueError(f"incidence must be 'left' or 'right', got {self.incidence!r}")
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        q0, d, w = self.packet
        if not w > 0:
            raise ValueError(f"packet width must be positive, got {w}")
        vg = float(group_velocity(q0, 0.0, self.lattice))
        sign = 1.0 if self.incidence == "left" else -1.0
        if not sign * vg > 0:
            raise ValueError(f"{self.incidence} incidence needs {'+' if sign > 0 else '-'}v_g(q0), got {vg:.3g}")
        if not sign * d < 0:
            raise ValueError(f"{self.incidence} incidence needs the packet on the {self.incidence} (d={d})")
        for s in self.snapshots:
            if not 0 <= s <= self.t_final:
                raise ValueError(f"snapshot time {s} outside [0, {self.t_final}]")

    def mirrored(self) -> "ExperimentSpec":
        """Same setup launched from the other side (``q0 -> -q0``, ``d -> -d``)."""
        q0, d, w = self.packet
        side = "right" if self.incidence == "left" else "left"
        return replace(self, packet=Packet(-q0, -d, w), incidence=side)

    @property
    def drift(self) -> float:
        return float(getattr(self.potential, "v", 0.0))


@dataclass
class ScatteringReport:
    """Outcome of one experiment.

    ``reflected_fraction`` and ``transmitted_fraction`` are spectral shares
    weighted by ``norm_ratio`` (final over initial norm), i.e. fractions of
    the incident power.  They lie in [0, 1] for lossy potentials; with gain
    their sum can exceed 1, which sets ``gain``.
    """

    invisibility_distance: float
    reflected_fraction: float
    transmitted_fraction: float
    edge_leak: float
    final_state: FieldState
    reference_state: FieldState
    leaked: bool = False
    norm_ratio: float = 1.0
    gain: bool = False
    flat_fraction: float = 0.0
    reference_reflected: float = 0.0
    snapshots: list = field(default_factory=list)
    reference_snapshots: list = field(default_factory=list)
    n_steps: int = 0
    error_estimate: float = 0.0


def invisibility_distance(final: FieldState, reference: FieldState) -> float:
    """``|| |c| - |c_ref| || / ||c_ref||`` (insensitive to phases)."""
    if final.c.shape != reference.c.shape:
        raise ValueError(f"lattice mismatch: {final.c.shape} vs {reference.c.shape}")
    if not math.isclose(final.t, reference.t, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"time mismatch: {final.t} vs {reference.t}")
    den = np.linalg.norm(reference.c)
    if den == 0:
        raise ValueError("reference state is identically zero")
    return float(np.linalg.norm(np.abs(final.c) - np.abs(reference.c)) / den)


def spectral_split(c: np.ndarray, q0: float, a: float = 1.0, kappa: float = 1.0, v_frame: float = 0.0):
    """Shares ``(backward, forward, flat)`` of ``|c^(q)|^2``.

    Backward bins have group velocity ``2 a kappa sin(q a) - v_frame`` of
    opposite sign to that of ``q0``.  Bins with ``|sin(q a)| < 1e-3`` are
    counted as forward; their weight is also returned as ``flat``.
    """
    c = np.asarray(c, dtype=complex)
    power = np.abs(np.fft.fft(c)) ** 2
    total = power.sum()
    if total == 0:
        return 0.0, 0.0, 0.0
    q = 2.0 * np.pi * np.fft.fftfreq(c.size, d=a)
    vg = 2.0 * a * kappa * np.sin(q * a) - v_frame
    ref = np.sign(2.0 * a * kappa * np.sin(q0 * a) - v_frame)
    flat = np.abs(np.sin(q * a)) < FLAT_BIN
    back = (np.sign(vg) == -ref) & ~flat
    b = float(power[back].sum() / total)
    return b, 1.0 - b, float(power[flat].sum() / total)


def reflected_fraction(final: FieldState, q0: float, v_frame: float = 0.0, spec: LatticeSpec | None = None) -> float:
    """Share of the lattice spectrum travelling against the incident packet."""
    a, kappa = (1.0, 1.0) if spec is None else (spec.a, spec.kappa)
    return spectral_split(final.c, q0, a, kappa, v_frame)[0]


def window_reflected_fraction(final: FieldState, spec: LatticeSpec, incidence: str, centre: float) -> float:
    """Norm share on the incidence side of ``centre``: a spatial cross-check."""
    x = spec.positions
    side = x < centre if incidence == "left" else x > centre
    p = np.abs(final.c) ** 2
    return float(p[side].sum() / p.sum())


def clearance_time(packet: Packet, v: float, spec: LatticeSpec, minimum: float = 50.0) -> float:
    """Time for the packet to reach as far beyond the potential as it started.

    The packet moves at ``v_g(q0)`` and the potential centre at ``-v``; the
    result is ``max(minimum, 2 |d| / |v_g + v|)``.
    """
    closing = abs(float(group_velocity(packet.q0, 0.0, spec)) + v)
    if closing == 0:
        raise ValueError("packet and potential move together; no clearance")
    return max(minimum, 2.0 * abs(packet.d) / closing)


def covering_lattice(packet: Packet, v: float, t_final: float, base: LatticeSpec) -> LatticeSpec:
    """Smallest lattice containing ``base`` that no wave can cross by ``t_final``.

    Packet and potential trajectories are padded by the light cone ``2 kappa a T``
    plus five packet widths and 20 sites.
    """
    vg = float(group_velocity(packet.q0, 0.0, base))
    ends = [packet.d, packet.d + vg * t_final, 0.0, -v * t_final]
    pad = 2.0 * base.kappa * base.a * t_final + 5.0 * packet.w + 20.0 * base.a
    lo = math.floor((min(ends) - pad) / base.a)
    hi = math.ceil((max(ends) + pad) / base.a)
    return replace(base, n_min=min(base.n_min, lo), n_max=max(base.n_max, hi))


def adapt(e: ExperimentSpec) -> ExperimentSpec:
    """Extend ``t_final`` to the clearance time and the lattice to cover the run."""
    T = clearance_time(e.packet, e.drift, e.lattice, minimum=e.t_final)
    return replace(e, t_final=T, lattice=covering_lattice(e.packet, e.drift, T, e.lattice))


def _core_halfwidth(p: Potential, spec: LatticeSpec) -> float:
    alpha = getattr(p, "alpha", 0.0)
    return max(5.0 * spec.a, 10.0 * alpha * spec.a)


def run_experiment(e: ExperimentSpec, cfg: IntegratorConfig = IntegratorConfig(), on_leak: str = "raise") -> ScatteringReport:
    """Evolve the packet with and without the potential and compare.

    The initial packet must not overlap the potential core (``|x| <= max(5a,
    10 alpha a)``): its amplitude there has to be below ``1e-6`` of its peak.
    ``on_leak='raise'`` turns a boundary hit in either run into
    :class:`EdgeLeakError`; ``'flag'`` records it in the report.
    """
    if on_leak not in ("raise", "flag"):
        raise ValueError(f"on_leak must be 'raise' or 'flag', got {on_leak!r}")
    spec = e.lattice
    q0, d, w = e.packet
    if isinstance(e.potential, TabulatedPotential) and e.drift != 0:
        raise ValueError("tabulated potentials are static")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EdgeLeakWarning)
        state0 = gaussian_packet(spec, q0, d, w)
    core = np.abs(spec.positions) <= _core_halfwidth(e.potential, spec)
    peak = np.abs(state0.c).max()
    overlap = np.abs(state0.c[core]).max() if core.any() else 0.0
    if overlap >= 1e-6 * peak:
        raise ValueError(f"packet overlaps the potential core at t=0 (|c| = {overlap:.3g} there)")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EdgeLeakWarning)
        ev = evolve(state0, e.potential, spec, cfg, e.t_final, e.snapshots)
    ref = free_propagate(state0, spec, e.t_final)
    ref_snaps = [free_propagate(state0, spec, s.t) for s in ev.snapshots]
    ref_edge = max(max(abs(s.c[0]), abs(s.c[-1])) for s in [ref, state0, *ref_snaps])
    edge = max(ev.edge_leak, ref_edge, abs(state0.c[0]), abs(state0.c[-1]))
    leaked = ev.leaked or ref_edge > cfg.edge_guard
    if leaked and on_leak == "raise":
        raise EdgeLeakError(f"edge amplitude {edge:.3g} exceeds the guard {cfg.edge_guard:g}")

    back, fwd, flat = spectral_split(ev.state.c, q0, spec.a, spec.kappa)
    ratio = ev.state.norm / state0.norm
    refl, trans = back * ratio, fwd * ratio
    return ScatteringReport(
        invisibility_distance=invisibility_distance(ev.state, ref),
        reflected_fraction=refl,
        transmitted_fraction=trans,
        edge_leak=float(edge),
        final_state=ev.state,
        reference_state=ref,
        leaked=bool(leaked),
        norm_ratio=float(ratio),
        gain=bool(refl + trans > 1.0 + 1e-9),
        flat_fraction=flat * ratio,
        reference_reflected=spectral_split(ref.c, q0, spec.a, spec.kappa)[0],
        snapshots=ev.snapshots,
        reference_snapshots=ref_snaps,
        n_steps=ev.n_steps,
        error_estimate=ev.error_estimate,
    )


def root_separation(q0: float, v: float, spec: LatticeSpec) -> float:
    """``max |q - q0|`` over the elastic roots at the energy of ``q0``."""
    roots = elastic_roots_for(q0, v, spec).roots
    return max((abs(r - q0) for r in roots), default=0.0)


def in_theorem_region(v: float, Omega: float, spec: LatticeSpec) -> bool:
    """``0 < |v| < v_c`` and ``Omega >= 4 kappa / |v|``."""
    v = abs(v)
    return 0 < v < critical_velocity(spec) and Omega >= 4.0 * spec.kappa / v * (1 - 1e-12)


def on_theorem_boundary(v: float, Omega: float, spec: LatticeSpec) -> bool:
    return v != 0 and math.isclose(Omega, 4.0 * spec.kappa / abs(v), rel_tol=1e-12)


@dataclass
class ScanRow:
    v: float
    Omega: float
    side: str
    invisibility_distance: float = math.nan
    reflected_fraction: float = math.nan
    transmitted_fraction: float = math.nan
    edge_leak: float = math.nan
    passed: bool = False
    theorem: bool = False
    boundary: bool = False
    roots_within_bound: bool = True
    t_final: float = math.nan
    n_sites: int = 0
    error: str | None = None

    @property
    def key(self):
        return (self.v, self.Omega, self.side)


def _scan_point(args) -> ScanRow:
    base, v, Omega, side, cfg, adaptive = args
    spec0 = base.lattice
    row = ScanRow(
        v=float(v),
        Omega=float(Omega),
        side=side,
        theorem=in_theorem_region(v, Omega, spec0),
        boundary=on_theorem_boundary(v, Omega, spec0),
    )
    try:
        e = base if base.incidence == side else base.mirrored()
        e = replace(e, potential=e.potential.with_(v=float(v), Omega=float(Omega)))
        if v != 0:
            sep = root_separation(e.packet.q0, v, spec0)
            row.roots_within_bound = sep <= 4.0 * spec0.kappa / abs(v) * (1 + 1e-9)
        if adaptive:
            e = adapt(e)
        row.t_final, row.n_sites = e.t_final, e.lattice.size
        rep = run_experiment(e, cfg, on_leak="flag")
    except (ValueError, ArithmeticError, EdgeLeakError, StepUnderflowError, PoleEvaluationError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    row.invisibility_distance = rep.invisibility_distance
    row.reflected_fraction = rep.reflected_fraction
    row.transmitted_fraction = rep.transmitted_fraction
    row.edge_leak = rep.edge_leak
    if rep.leaked:
        row.error = "edge leak"
    row.passed = (
        row.error is None
        and rep.invisibility_distance < DISTANCE_THRESHOLD
        and rep.reflected_fraction < REFLECTION_THRESHOLD
    )
    return row


def scan_invisibility(
    base: ExperimentSpec,
    v_values,
    Omega_values,
    cfg: IntegratorConfig = IntegratorConfig(),
    threads: int = 1,
    adaptive: bool = True,
    sides=("left", "right"),
) -> list[ScanRow]:
    """One experiment per ``(v, Omega, side)``; failures become flagged rows.

    ``base`` must carry a :class:`KKPotential`; its ``v`` and ``Omega`` are
    replaced per grid point.  With ``adaptive`` each run is extended to the
    packet's clearance time on a lattice wide enough to keep the boundary
    quiet (the fixed default ``t_final`` leaves slow right-incidence packets
    still inside the potential).  Rows come back sorted by key.
    """
    if not isinstance(base.potential, KKPotential):
        raise TypeError("scan needs a closed-form KKPotential")
    vc = critical_velocity(base.lattice)
    for v in v_values:
        if not abs(v) < vc:
            raise ValueError(f"|v|={abs(v)} is not below the critical velocity {vc}")
    jobs = [
        (base, v, Om, side, cfg, adaptive)
        for v in v_values
        for Om in Omega_values
        for side in sides
    ]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_scan_point, jobs))
    else:
        rows = [_scan_point(j) for j in jobs]
    return sorted(rows, key=lambda r: r.key)


def _open_csv(path, append: bool, header_comment: str, columns):
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    fh = open(path, "a" if append else "w", newline="")
    writer = csv.writer(fh)
    if new:
        fh.write(f"# {header_comment}\n")
        writer.writerow(columns)
    return fh, writer


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_scan_csv(path, rows, append: bool = False) -> None:
    fh, writer = _open_csv(
        path, append, "units: v in kappa*a, omega in 1/a; fractions of incident power", SCAN_COLUMNS
    )
    with fh:
        for r in rows:
            writer.writerow(
                [_fmt(x) for x in (r.v, r.Omega, r.side, r.invisibility_distance, r.reflected_fraction,
                                   r.transmitted_fraction, r.edge_leak, r.passed)]
            )


REPORT_COLUMNS = [
    "side",
    "t_final",
    "invisibility_distance",
    "reflected_fraction",
    "transmitted_fraction",
    "flat_fraction",
    "norm_ratio",
    "gain",
    "edge_leak",
    "leaked",
]


def write_report_csv(path, reports, append: bool = False) -> None:
    """``reports`` is an iterable of ``(side, ScatteringReport)``."""
    fh, writer = _open_csv(
        path, append, "units: t in 1/kappa; fractions of incident power; edge_leak is |c| at the boundary",
        REPORT_COLUMNS,
    )
    with fh:
        for side, r in reports:
            writer.writerow(
                [_fmt(x) for x in (side, r.final_state.t, r.invisibility_distance, r.reflected_fraction,
                                   r.transmitted_fraction, r.flat_fraction, r.norm_ratio, r.gain,
                                   r.edge_leak, r.leaked)]
            )
