"""Command-line front end: ``kklattice <command> --config run.cfg``.

Config files are JSON.  Dimensionless inputs carry their unit in the key
(``omega_a`` is Omega*a, ``v_over_kappa_a`` is v/(kappa a), and so on).
Exit codes: 0 success, 2 invalid config or arguments, 3 numerical guard
tripped (edge leak, pole in range, step underflow, failed check).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .born import (
    PoleInRangeError,
    born_amplitudes,
    connection_check,
    decay_slope,
    mapped_amplitudes,
)
from .dynamics import IntegratorConfig, StepUnderflowError, write_snapshots
from .lattice import LatticeSpec, critical_velocity, elastic_roots_for, energy, group_velocity
from .potentials import KKPotential, holomorphy_log_slope, kk_residual, load_table, spectrum
from .scattering import (
    EdgeLeakError,
    ExperimentSpec,
    Packet,
    run_experiment,
    scan_invisibility,
    write_report_csv,
    write_scan_csv,
)

EXIT_OK, EXIT_INVALID, EXIT_GUARD = 0, 2, 3


class ConfigError(ValueError):
    pass


def _check(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _num(block, key, where, default=None, kind=float):
    if key not in block:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return default
    val = block[key]
    if kind is int:
        _check(isinstance(val, int) and not isinstance(val, bool), f"{where}.{key}", f"expected an integer, got {val!r}")
        return val
    _check(isinstance(val, (int, float)) and not isinstance(val, bool), f"{where}.{key}", f"expected a number, got {val!r}")
    _check(math.isfinite(val), f"{where}.{key}", "must be finite")
    return float(val)


def _known(block, where, allowed):
    _check(isinstance(block, dict), where, "expected an object")
    extra = sorted(set(block) - set(allowed))
    _check(not extra, where, f"unknown keys {extra}")


@dataclass(frozen=True)
class LatticeBlock:
    kappa: float = 1.0
    a: float = 1.0
    n_min: int = -100
    n_max: int = 100

    @classmethod
    def parse(cls, b):
        _known(b, "lattice", [f.name for f in fields(cls)])
        out = cls(
            _num(b, "kappa", "lattice", 1.0),
            _num(b, "a", "lattice", 1.0),
            _num(b, "n_min", "lattice", -100, int),
            _num(b, "n_max", "lattice", 100, int),
        )
        _check(out.kappa > 0, "lattice.kappa", "must be positive")
        _check(out.a > 0, "lattice.a", "must be positive")
        _check(out.n_max - out.n_min >= 2, "lattice", "need n_max - n_min >= 2")
        return out

    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.kappa, self.a, self.n_min, self.n_max)


@dataclass(frozen=True)
class PotentialBlock:
    V0_re: float = 0.0
    V0_im: float = 1.0
    omega_a: float = 10.0
    alpha: float = 0.3
    m: int = 1
    v_over_kappa_a: float = 0.0
    table: str | None = None

    @classmethod
    def parse(cls, b, base_dir: Path):
        _known(b, "potential", [f.name for f in fields(cls)])
        if "table" in b:
            _check(isinstance(b["table"], str), "potential.table", "expected a path string")
            path = (base_dir / b["table"]).resolve()
            _check(path.exists(), "potential.table", f"{path} does not exist")
            _check(not b.get("v_over_kappa_a"), "potential.v_over_kappa_a", "tabulated potentials are static")
            return cls(table=str(path))
        out = cls(
            _num(b, "V0_re", "potential", 0.0),
            _num(b, "V0_im", "potential", 0.0),
            _num(b, "omega_a", "potential"),
            _num(b, "alpha", "potential"),
            _num(b, "m", "potential", 1, int),
            _num(b, "v_over_kappa_a", "potential", 0.0),
        )
        _check(out.alpha > 0, "potential.alpha", "must be positive")
        _check(out.m >= 1, "potential.m", "must be >= 1")
        _check(out.omega_a >= 0, "potential.omega_a", "must be >= 0")
        return out

    def build(self, spec: LatticeSpec):
        if self.table is not None:
            t = load_table(self.table)
            return type(t)(t.n, t.values * spec.kappa)
        return KKPotential(
            V0=complex(self.V0_re, self.V0_im) * spec.kappa,
            Omega=self.omega_a / spec.a,
            alpha=self.alpha,
            m=self.m,
            v=self.v_over_kappa_a * spec.kappa * spec.a,
            a=spec.a,
        )


@dataclass(frozen=True)
class PacketBlock:
    q0_a: float = math.pi / 2
    d_over_a: float = -50.0
    w_over_a: float = 5.0
    side: str = "left"

    @classmethod
    def parse(cls, b):
        _known(b, "packet", [f.name for f in fields(cls)])
        out = cls(
            _num(b, "q0_a", "packet", math.pi / 2),
            _num(b, "d_over_a", "packet", -50.0),
            _num(b, "w_over_a", "packet", 5.0),
            b.get("side", "left"),
        )
        _check(out.side in ("left", "right", "both"), "packet.side", f"expected left|right|both, got {out.side!r}")
        _check(out.w_over_a > 0, "packet.w_over_a", "must be positive")
        _check(math.sin(out.q0_a) > 0, "packet.q0_a", "give the left-incidence packet (sin(q0 a) > 0); right mirrors it")
        _check(out.d_over_a < 0, "packet.d_over_a", "give the left-incidence start (d < 0); right mirrors it")
        return out


@dataclass(frozen=True)
class OutputBlock:
    t_final_kappa: float = 50.0
    snapshots: tuple = ()
    prefix: str = ""

    @classmethod
    def parse(cls, b):
        _known(b, "output", [f.name for f in fields(cls)])
        t = _num(b, "t_final_kappa", "output", 50.0)
        _check(t > 0, "output.t_final_kappa", "must be positive")
        snaps = b.get("snapshots", [])
        _check(isinstance(snaps, list), "output.snapshots", "expected a list of times")
        snaps = tuple(_num({"s": s}, "s", "output.snapshots") for s in snaps)
        _check(all(0 <= s <= t for s in snaps), "output.snapshots", f"times must lie in [0, {t}]")
        prefix = b.get("prefix", "")
        _check(isinstance(prefix, str), "output.prefix", "expected a string")
        return cls(t, snaps, prefix)


@dataclass(frozen=True)
class BornBlock:
    deltas: tuple = (4.0, 8.0)
    decay_deltas: tuple = (2.0, 4.0, 8.0)

    @classmethod
    def parse(cls, b):
        _known(b, "born", [f.name for f in fields(cls)])
        out = {}
        for key, default in (("deltas", (4.0, 8.0)), ("decay_deltas", (2.0, 4.0, 8.0))):
            vals = b.get(key, list(default))
            _check(isinstance(vals, list) and len(vals) >= 1, f"born.{key}", "expected a non-empty list")
            vals = tuple(_num({"d": d}, "d", f"born.{key}") for d in vals)
            _check(all(d >= 0 for d in vals), f"born.{key}", "displacements must be >= 0")
            out[key] = vals
        _check(len(out["decay_deltas"]) >= 2, "born.decay_deltas", "need at least two")
        return cls(**out)


@dataclass(frozen=True)
class ScanBlock:
    v_over_kappa_a: tuple = (0.2, 0.4, 0.8, 1.2, 1.6)
    omega_a: tuple = (4.0, 8.0, 10.0, 16.0, 24.0)
    adaptive: bool = True

    @classmethod
    def parse(cls, b):
        _known(b, "scan", [f.name for f in fields(cls)])
        out = {}
        for key, default in (("v_over_kappa_a", cls.v_over_kappa_a), ("omega_a", cls.omega_a)):
            vals = b.get(key, list(default))
            _check(isinstance(vals, list), f"scan.{key}", "expected a list")
            out[key] = tuple(_num({"x": x}, "x", f"scan.{key}") for x in vals)
        # v/(kappa a) is dimensionless, so v_c is 2 here
        bad = [v for v in out["v_over_kappa_a"] if not abs(v) < 2.0]
        _check(not bad, "scan.v_over_kappa_a", f"{bad} not below the critical velocity v_c = 2 kappa a")
        _check(all(o >= 0 for o in out["omega_a"]), "scan.omega_a", "must be >= 0")
        adaptive = b.get("adaptive", True)
        _check(isinstance(adaptive, bool), "scan.adaptive", "expected true/false")
        return cls(out["v_over_kappa_a"], out["omega_a"], adaptive)


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeBlock = field(default_factory=LatticeBlock)
    potential: PotentialBlock = field(default_factory=PotentialBlock)
    packet: PacketBlock = field(default_factory=PacketBlock)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output: OutputBlock = field(default_factory=OutputBlock)
    born: BornBlock = field(default_factory=BornBlock)
    scan: ScanBlock = field(default_factory=ScanBlock)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path = Path(".")) -> "RunConfig":
        _known(d, "config", ["lattice", "potential", "packet", "integrator", "output", "born", "scan", "description"])
        lat = LatticeBlock.parse(d.get("lattice", {}))
        ib = d.get("integrator", {})
        _known(ib, "integrator", ["rel_tol", "abs_tol", "max_step", "edge_guard"])
        integ = {k: _num(ib, k, "integrator", getattr(IntegratorConfig, k)) for k in ("rel_tol", "abs_tol", "max_step", "edge_guard")}
        for k in ("rel_tol", "abs_tol", "max_step"):
            _check(integ[k] > 0, f"integrator.{k}", "must be positive")
        return cls(
            lattice=lat,
            potential=PotentialBlock.parse(d.get("potential", {}), base_dir),
            packet=PacketBlock.parse(d.get("packet", {})),
            integrator=IntegratorConfig(**integ),
            output=OutputBlock.parse(d.get("output", {})),
            born=BornBlock.parse(d.get("born", {})),
            scan=ScanBlock.parse(d.get("scan", {})),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data, path.parent)

    def experiment(self, side: str) -> ExperimentSpec:
        spec = self.lattice.spec()
        pk = Packet(self.packet.q0_a / spec.a, self.packet.d_over_a * spec.a, self.packet.w_over_a * spec.a)
        e = ExperimentSpec(
            spec,
            self.potential.build(spec),
            pk,
            self.output.t_final_kappa / spec.kappa,
            "left",
            tuple(s / spec.kappa for s in self.output.snapshots),
        )
        return e if side == "left" else e.mirrored()

    def sides(self):
        return ("left", "right") if self.packet.side == "both" else (self.packet.side,)


def _outdir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _name(cfg: RunConfig, stem: str) -> str:
    return f"{cfg.output.prefix}{stem}.csv"


def cmd_dispersion(cfg: RunConfig, args) -> int:
    spec = cfg.lattice.spec()
    pot = cfg.potential
    _check(pot.table is None, "potential", "dispersion needs a drift velocity, not a table")
    v = pot.v_over_kappa_a * spec.kappa * spec.a
    q0 = cfg.packet.q0_a / spec.a
    sol = elastic_roots_for(q0, v, spec)
    print(f"v_c = {critical_velocity(spec)!r}  (kappa*a)")
    print(f"v = {v!r}  q0 = {q0!r}  E0 = {sol.E0!r}")
    print(f"{'q':>22} {'E(q)':>22} {'v_g(q)':>22}  class")
    rows = []
    for q in sol.roots:
        kind = "tangent" if q in sol.tangent else ("beta" if q in sol.q_beta else "alpha")
        E, vg = float(energy(q, v, spec)), float(group_velocity(q, v, spec))
        rows.append((q, E, vg, kind))
        print(f"{q:22.15g} {E:22.15g} {vg:22.15g}  {kind}")
    print("q set: " + (", ".join(f"{q:.12g}" for q in sol.q_beta) or "empty"))
    print("Q set: " + (", ".join(f"{q:.12g}" for q in sol.Q_alpha) or "empty"))
    out = _outdir(args)
    if out is not None:
        import csv

        path = out / _name(cfg, "dispersion")
        new = not (path.exists() and path.stat().st_size > 0)
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                fh.write("# units: q in 1/a, E in kappa, v_g and v in kappa*a\n")
                w.writerow(["v", "q0", "E0", "q", "E", "v_g", "class"])
            for q, E, vg, kind in rows:
                w.writerow([repr(v), repr(q0), repr(sol.E0), repr(q), repr(E), repr(vg), kind])
    return EXIT_OK


def cmd_potential_check(cfg: RunConfig, args) -> int:
    spec = cfg.lattice.spec()
    _check(cfg.potential.table is None, "potential", "potential-check needs the closed-form family")
    p = cfg.potential.build(spec)
    ok = True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        k, Vh = spectrum(p, 400.0 * spec.a, 2**16)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    mag = np.abs(Vh)
    ratio = float(mag[k < 0].max() / mag.max())
    good = ratio < 1e-4
    ok &= good
    print(f"spectrum one-sidedness: max_(k<0)|V^|/max|V^| = {ratio:.3e}  {'PASS' if good else 'FAIL'} (< 1e-4)")
    r1 = kk_residual(p, spec, step=spec.a / 8)
    r2 = kk_residual(p, spec, step=spec.a / 16)
    good = r2 == 0 or r1 / r2 >= 3.0
    ok &= good
    print(f"kk residual: step a/8 {r1:.3e}, a/16 {r2:.3e}, gain {r1 / r2 if r2 else math.inf:.3g}  {'PASS' if good else 'FAIL'} (>= 3x)")
    slope = holomorphy_log_slope(p, spec.positions)
    good = slope <= -p.Omega + 1e-6 * max(1.0, p.Omega)
    ok &= good
    print(f"holomorphy log-slope: {slope:.6g} vs -Omega = {-p.Omega:.6g}  {'PASS' if good else 'FAIL'}")
    return EXIT_OK if ok else EXIT_GUARD


def cmd_scatter(cfg: RunConfig, args) -> int:
    out = _outdir(args)
    reports = []
    leaked = False
    for side in cfg.sides():
        e = cfg.experiment(side)
        r = run_experiment(e, cfg.integrator, on_leak="flag")
        leaked |= r.leaked
        reports.append((side, r))
        print(
            f"{side:>5}: distance {r.invisibility_distance:.4e}  reflected {r.reflected_fraction:.4e}  "
            f"transmitted {r.transmitted_fraction:.4e}  norm ratio {r.norm_ratio:.6g}"
            + ("  [gain]" if r.gain else "")
            + ("  [EDGE LEAK]" if r.leaked else "")
        )
        if out is not None and r.snapshots:
            write_snapshots(out / _name(cfg, f"snapshots_{side}"), r.snapshots, e.lattice)
            write_snapshots(out / _name(cfg, f"reference_{side}"), r.reference_snapshots, e.lattice)
    if out is not None:
        write_report_csv(out / _name(cfg, "report"), reports, append=True)
    return EXIT_GUARD if leaked else EXIT_OK


def cmd_born(cfg: RunConfig, args) -> int:
    spec = cfg.lattice.spec()
    _check(cfg.potential.table is None, "potential", "born needs the closed-form family")
    p = cfg.potential.build(spec)
    q0 = cfg.packet.q0_a / spec.a
    if p.v == 0:
        raise PoleInRangeError(
            "pole in integration range: at v = 0 elastic roots recur in every zone; "
            "use a small drift (e.g. v_over_kappa_a = 0.05) as the static analogue"
        )
    roots = elastic_roots_for(q0, p.v, spec)
    deltas = cfg.born.deltas
    rows = []
    for d in deltas:
        b = born_amplitudes(p, d, q0, roots, spec, phi_grid=[0.0])
        mr, mt = mapped_amplitudes(b, spec)
        for kind, amps, mapped in (("r", b.r_alpha, mr), ("t", b.t_beta, mt)):
            for (k, a_), (_, m_) in zip(amps, mapped):
                rows.append((d, k, kind, a_, m_))
    for d, k, kind, a_, m_ in rows:
        print(f"delta {d:g}  {kind} root {k:.10g}  amp {a_.real:+.6e}{a_.imag:+.6e}i  mapped(0) {m_.real:+.6e}{m_.imag:+.6e}i")
    worst = 0.0
    if len(deltas) >= 2:
        for d1, d2 in zip(deltas[:-1], deltas[1:]):
            conn, A_res = connection_check(p, q0, d1, d2, roots, spec)
            res = [c.residual for c in conn if c.resolved]
            worst = max([worst, *res])
            print(
                f"connection {d1:g}->{d2:g}: resolved rows {len(res)}/{len(conn)}, "
                f"max residual {max(res, default=0.0):.3e}, A(delta) residual {A_res:.1e}"
            )
    try:
        slope, norms = decay_slope(p, q0, cfg.born.decay_deltas, spec=spec)
        print(f"decay: log max|phi| slope {slope:.6g} vs -Omega = {-p.Omega:.6g}")
    except PoleInRangeError as exc:
        print(f"decay: skipped ({exc})")
    out = _outdir(args)
    if out is not None:
        import csv

        path = out / _name(cfg, "born")
        new = not (path.exists() and path.stat().st_size > 0)
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                fh.write("# units: delta in a, root in 1/a; amplitudes are plane-wave ratios\n")
                w.writerow(["delta", "root", "kind", "re", "im", "mapped_re0", "mapped_im0"])
            for d, k, kind, a_, m_ in rows:
                w.writerow([repr(d), repr(k), kind, repr(a_.real), repr(a_.imag), repr(m_.real), repr(m_.imag)])
    return EXIT_GUARD if worst >= 1e-6 else EXIT_OK


def cmd_scan(cfg: RunConfig, args) -> int:
    _check(cfg.potential.table is None, "potential", "scan needs the closed-form family")
    base = cfg.experiment("left")
    sc = cfg.scan
    rows = scan_invisibility(
        base, sc.v_over_kappa_a, sc.omega_a, cfg.integrator, threads=args.threads, adaptive=sc.adaptive,
        sides=cfg.sides(),
    )
    for r in rows:
        tag = "theorem" + ("=" if r.boundary else "") if r.theorem else ""
        print(
            f"v {r.v:5.2f}  Omega {r.Omega:5.1f}  {r.side:>5}  distance {r.invisibility_distance:.3e}  "
            f"reflected {r.reflected_fraction:.3e}  {'pass' if r.passed else 'FAIL'}  {tag}"
            + (f"  [{r.error}]" if r.error else "")
        )
    out = _outdir(args)
    if out is not None:
        write_scan_csv(out / _name(cfg, "scan"), rows, append=True)
    bad = [r for r in rows if r.error or (r.theorem and not r.passed)]
    return EXIT_GUARD if bad else EXIT_OK


COMMANDS = {
    "dispersion": cmd_dispersion,
    "potential-check": cmd_potential_check,
    "scatter": cmd_scatter,
    "born": cmd_born,
    "scan": cmd_scan,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kklattice", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory for CSV files")
    ap.add_argument("--snapshots", default=None, help="comma-separated snapshot times (1/kappa)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for scan")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = RunConfig.load(args.config)
        if args.snapshots is not None:
            try:
                snaps = [float(s) for s in args.snapshots.split(",") if s.strip()]
            except ValueError:
                raise ConfigError(f"--snapshots: expected comma-separated numbers, got {args.snapshots!r}") from None
            out = cfg.output
            _check(all(0 <= s <= out.t_final_kappa for s in snaps), "--snapshots", f"times must lie in [0, {out.t_final_kappa}]")
            from dataclasses import replace

            cfg = replace(cfg, output=replace(out, snapshots=tuple(snaps)))
        _check(args.threads >= 1, "--threads", "must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EdgeLeakError, PoleInRangeError, StepUnderflowError, ArithmeticError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
