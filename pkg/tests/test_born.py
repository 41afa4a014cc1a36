import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kklattice.born import (
    PoleInRangeError,
    ProjectionError,
    born_amplitudes,
    born_phi,
    connection_check,
    decay_slope,
    displaced_spectrum,
    displaced_transform,
    mapped_amplitudes,
    project_amplitudes,
)
from kklattice.lattice import LatticeSpec, elastic_roots_for
from kklattice.potentials import KKPotential, exact_spectrum, spectrum

UNIT = LatticeSpec()
Q0 = np.pi / 2
FIG = KKPotential(1j, 10.0, 0.3, m=1, v=0.4)
M2 = FIG.with_(m=2)


def test_displaced_spectrum_at_zero_matches_spectrum():
    k, G = displaced_spectrum(M2, 0.0)
    k2, V = spectrum(M2, 400.0, 2**16)
    keep = k2 >= 0
    np.testing.assert_array_equal(k, k2[keep])
    np.testing.assert_allclose(G, V[keep], atol=1e-14)


@pytest.mark.parametrize("delta", [0.0, 1.0, 2.0])
def test_displaced_spectrum_support_starts_at_carrier(delta):
    k, G = displaced_spectrum(M2, delta)
    peak = np.max(np.abs(G))
    # window truncation leaves an absolute floor near 1e-13
    assert np.max(np.abs(G[k < M2.Omega - 0.05])) < 1e-4 * peak + 1e-12
    assert np.max(np.abs(G[(k > M2.Omega) & (k < M2.Omega + 1)])) > 0.1 * peak


def test_displaced_spectrum_fft_vs_closed_form():
    k, G = displaced_spectrum(M2, 1.0)
    sel = (k > 10.3) & (k < 25)
    ex = exact_spectrum(M2, k[sel], 1.0)
    assert np.max(np.abs(G[sel] - ex)) < 1e-3 * np.max(np.abs(ex))


@pytest.mark.parametrize("k", [10.2, 10.7, 11.5, 13.0, 16.0])
def test_imaginary_shift_ratio(k):
    for p in (FIG, M2):
        g1 = displaced_transform(p, 1.0, k)[0]
        g2 = displaced_transform(p, 2.0, k)[0]
        assert abs(g2) / abs(g1) == pytest.approx(np.exp(-k), rel=1e-8)


@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("delta", [0.0, 1.0, 4.0])
@pytest.mark.parametrize("k", [-3.0, 9.0, 10.13, 10.9, 13.0])
def test_quadrature_vs_closed_form(m, delta, k):
    p = FIG.with_(m=m)
    val, err = displaced_transform(p, delta, k)
    ex = exact_spectrum(p, k, delta)
    scale = abs(exact_spectrum(p, p.Omega + 1.0, delta))
    assert abs(val - ex) <= max(10 * err, 1e-12 * scale)
    if ex != 0:
        assert abs(val - ex) / abs(ex) < 1e-8


def test_phi_zero_potential():
    phi = born_phi(FIG.with_(V0=0), 4.0, Q0, np.linspace(-10, 10, 11))
    assert np.all(phi == 0)


def test_phi_refuses_poles():
    with pytest.raises(PoleInRangeError):
        born_phi(FIG.with_(Omega=4.0), 4.0, Q0, [0.0])
    with pytest.raises(PoleInRangeError):
        born_phi(FIG.with_(v=0.0), 4.0, Q0, [0.0])


def test_phi_nested_grids_agree():
    coarse = np.arange(-20, 20.01, 1.0)
    fine = np.arange(-20, 20.01, 0.5)
    a = born_phi(FIG, 2.0, Q0, coarse)
    b = born_phi(FIG, 2.0, Q0, fine)
    np.testing.assert_allclose(b[::2], a, rtol=0, atol=1e-10 * np.max(np.abs(a)))


def test_decay_law():
    slope, norms = decay_slope(FIG, Q0)
    assert abs(slope + FIG.Omega) <= 0.05 * FIG.Omega
    assert np.all(np.diff(norms) < 0)


def test_zero_potential_amplitudes():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    b = born_amplitudes(FIG.with_(V0=0), 4.0, Q0, roots)
    assert all(a == 0 for _, a in b.r_alpha)
    assert all(a == (1 if q == Q0 else 0) for q, a in b.t_beta)
    assert b.forward == 1


def test_theorem_region_mapped_amplitudes_vanish():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    rows, A_res = connection_check(FIG, Q0, 4.0, 8.0, roots)
    assert A_res < 1e-15
    for r in rows:
        if r.kind == "t" and r.root == Q0:
            assert r.mapped1 == pytest.approx(1.0, abs=1e-12)
        else:
            # support of the displaced spectrum starts beyond every root
            assert abs(r.mapped1) < 1e-12 and abs(r.mapped2) < 1e-12


def test_connection_formulas_resolved_rows():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    rows, _ = connection_check(FIG.with_(Omega=4.0), Q0, 4.0, 8.0, roots)
    resolved = [r for r in rows if r.resolved]
    assert {(r.kind, round(r.root, 4)) for r in resolved} == {("r", 5.6754), ("t", 6.4771)}
    for r in resolved:
        assert r.residual < 1e-6
    # mapped values pinned from the closed form: -i V^(Q - q0) / |v_g(Q)|
    for r in resolved:
        vg = abs(2 * np.sin(r.root) + 0.4)
        ex = -1j * exact_spectrum(FIG.with_(Omega=4.0), r.root - Q0) / vg
        assert r.mapped1 == pytest.approx(ex, rel=1e-9)


def test_connection_mismatch_within_quadrature_bound():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    rows, _ = connection_check(FIG.with_(Omega=4.0, m=2), Q0, 4.0, 8.0, roots)
    for r in rows:
        assert abs(r.mapped1 - r.mapped2) <= 10 * r.bound + 1e-14


def test_equal_deltas_zero_mismatch():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    rows, _ = connection_check(FIG.with_(Omega=4.0), Q0, 4.0, 4.0, roots)
    assert all(r.residual == 0.0 for r in rows)


def test_static_analogue_reflects_at_first_order():
    # the rest frame has infinitely many image roots; a small drift keeps them finite
    v = 0.05
    roots = elastic_roots_for(Q0, v, UNIT)
    rows, _ = connection_check(FIG.with_(v=v), Q0, 0.5, 1.0, roots)
    refl = [r for r in rows if r.kind == "r" and r.resolved]
    assert refl and max(abs(r.mapped1) for r in refl) > 0.1
    assert all(r.residual < 1e-6 for r in rows if r.resolved)


def test_projection_agrees_with_residues_when_pole_free():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    proj = project_amplitudes(FIG, 2.0, Q0, roots)
    res = born_amplitudes(FIG, 2.0, Q0, roots, phi_grid=[0.0])
    scale = born_amplitudes(FIG, 2.0, Q0, roots).phi_norm
    for (_, a), (_, b) in zip(proj.r_alpha + proj.t_beta, res.r_alpha + res.t_beta):
        assert abs(a - b) < 1e-3 * scale


def test_projection_resolution_guard():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    with pytest.raises(ProjectionError):
        project_amplitudes(FIG, 2.0, Q0, roots, L=2.0)


def test_tangent_roots_get_nan():
    v = 0.6
    q_ext = np.pi + np.arcsin(v / 2)
    from kklattice.lattice import energy, find_elastic_roots

    E0 = float(energy(q_ext, v, UNIT))
    # choose an incident root on the same energy
    sol = find_elastic_roots(E0, v, UNIT)
    q0 = next(q for q in sol.roots if q not in sol.tangent)
    sol = find_elastic_roots(E0, v, UNIT, q0=q0)
    b = born_amplitudes(FIG.with_(v=v), 4.0, q0, sol, phi_grid=[0.0])
    amps = dict(b.r_alpha + b.t_beta)
    assert any(np.isnan(amps[q]) for q in sol.tangent)


@settings(max_examples=40)
@given(q0=st.floats(-3.1, 3.1), v=st.floats(0.1, 1.95), extra=st.floats(1e-6, 2.0))
def test_theorem_region_integrand_pole_free(q0, v, extra):
    Omega = 4.0 / v * (1 + extra)
    roots = elastic_roots_for(q0, v, UNIT)
    assert max(roots.roots) < q0 + Omega


def test_mapping_is_exponential_factor():
    roots = elastic_roots_for(Q0, 0.4, UNIT)
    b = born_amplitudes(FIG.with_(Omega=4.0), 3.0, Q0, roots, phi_grid=[0.0])
    r, t = mapped_amplitudes(b)
    for (Q, a), (_, m) in zip(b.r_alpha, r):
        assert m == pytest.approx(a * np.exp(-(Q0 - Q) * 3.0), rel=1e-15)


def _born_visible(Omega, v, q0, delta=1.0):
    p = FIG.with_(Omega=Omega, v=v)
    roots = elastic_roots_for(q0, v, UNIT)
    b = born_amplitudes(p, delta, q0, roots, phi_grid=[0.0])
    r, t = mapped_amplitudes(b)
    errs = b.r_err + b.t_err
    for (q, m), e in zip(r + t, errs):
        if q == q0:
            m = m - 1.0
        if abs(m) > 1e-6 and e * np.exp(-(q0 - q) * delta) < 1e-3 * abs(m):
            return True
    return False


@pytest.mark.parametrize(
    "v, Omega, time_domain_visible",
    # left-incidence outcomes of the 5x5 scan (reflected fraction 4.8, 6.9,
    # 9.1e-5, 3.6e-6, 4.3e-9 with distance thresholds 1e-2)
    [(0.2, 4.0, True), (0.4, 4.0, True), (0.4, 10.0, False), (0.8, 16.0, False), (1.6, 24.0, False)],
)
def test_born_classification_matches_time_domain(v, Omega, time_domain_visible):
    assert _born_visible(Omega, v, Q0) == time_domain_visible
