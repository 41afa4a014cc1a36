import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from kklattice.lattice import LatticeSpec
from kklattice.potentials import (
    FunctionPotential,
    KKPotential,
    PoleEvaluationError,
    TabulatedPotential,
    WindowWarning,
    evaluate,
    exact_spectrum,
    hilbert_transform,
    holomorphy_log_slope,
    kk_residual,
    load_table,
    sample_on_lattice,
    save_table,
    spectrum,
)

UNIT = LatticeSpec()
M2 = KKPotential(V0=1j, Omega=10.0, alpha=0.3, m=2)


def test_validation():
    with pytest.raises(ValueError):
        KKPotential(1j, 10.0, alpha=0.0)
    with pytest.raises(ValueError):
        KKPotential(1j, 10.0, 0.3, m=0)
    with pytest.raises(ValueError):
        KKPotential(1j, -1.0, 0.3)


def test_pole_refused():
    p = KKPotential(1.0, 0.0, 0.5)
    with pytest.raises(PoleEvaluationError):
        evaluate(p, -0.5j)


def test_closed_form_value():
    p = KKPotential(1j, 10.0, 0.3)
    assert evaluate(p, 0.0) == pytest.approx(1j / 0.3j)
    x = 1.7
    assert evaluate(p, x) == pytest.approx(1j * np.exp(10j * x) / (x + 0.3j))


def test_sampling_follows_drift():
    p = KKPotential(1j, 10.0, 0.3, v=0.4)
    s = sample_on_lattice(p, UNIT, t=2.5)
    assert s.values == pytest.approx(evaluate(p, UNIT.positions + 1.0))
    assert sample_on_lattice(None, UNIT).values.sum() == 0


def test_tabulated_sampling_places_sites():
    tab = TabulatedPotential(np.array([-1, 0, 1, 500]), np.array([1.0, 2.0, 3.0, 9.0]))
    vals = sample_on_lattice(tab, UNIT).values
    assert vals[99:102] == pytest.approx([1, 2, 3])
    assert np.count_nonzero(vals) == 3


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("k", [9.0, 10.5, 11.0, 13.0])
def test_closed_form_spectrum_vs_quadrature(m, k):
    """Weighted QUADPACK on [-60, 60]; the 1/x^m tail beyond is below 1e-3."""
    p = KKPotential(1j, 10.0, 0.3, m=m)
    X = 60.0
    parts = [
        integrate.quad(lambda x: part(evaluate(p, x)), -X, X, weight=wt, wvar=k, limit=2000)[0]
        for part in (np.real, np.imag)
        for wt in ("cos", "sin")
    ]
    rc, rs, ic, is_ = parts
    window = (rc + is_) + 1j * (ic - rs)
    assert window == pytest.approx(exact_spectrum(p, k), abs=2e-3)


def test_fft_spectrum_matches_closed_form():
    k, Vh = spectrum(M2, 400.0, 2**16)
    ex = exact_spectrum(M2, k)
    sel = (k > 10.2) & (k < 20)
    assert np.max(np.abs(Vh[sel] - ex[sel])) < 1e-3 * np.max(np.abs(ex))


def test_spectrum_one_sided():
    k, Vh = spectrum(M2, 400.0, 2**16)
    assert np.max(np.abs(Vh[k < 0])) / np.max(np.abs(Vh)) < 1e-4
    assert np.all(exact_spectrum(M2, k[k < 10.0]) == 0)


def test_spectrum_guards():
    with pytest.raises(ValueError):
        spectrum(M2, 400.0, 3000)
    with pytest.raises(ValueError):
        spectrum(M2, 4000.0, 1024)
    with pytest.warns(WindowWarning):
        spectrum(KKPotential(1j, 10.0, 0.3), 50.0, 2**14)


def test_hilbert_known_pair():
    # 1/(x + i) is holomorphic above the axis: H[x/(1+x^2)] = -1/(1+x^2)
    x = np.arange(-2000, 2000, 0.05)
    u = x / (1 + x**2)
    h = hilbert_transform(u, taper=0.0)
    inner = np.abs(x) < 50
    assert np.max(np.abs(h[inner] + 1 / (1 + x[inner] ** 2))) < 1e-3


def test_hilbert_of_cosine_is_sine():
    x = np.arange(-4096, 4096) * 0.1
    env = np.exp(-((x / 150) ** 2))
    h = hilbert_transform(np.cos(2.0 * x) * env)
    inner = np.abs(x) < 40
    assert np.max(np.abs(h[inner] - np.sin(2.0 * x[inner]) * env[inner])) < 1e-3


@pytest.mark.parametrize("m", [1, 2])
def test_kk_residual_small_for_family(m):
    assert kk_residual(M2.with_(m=m), UNIT) < 1e-8


def test_kk_residual_large_for_real_gaussian():
    p = FunctionPotential(lambda x: np.exp(-(x**2) / 4.0))
    assert kk_residual(p, UNIT) > 0.5


def test_kk_residual_zero_potential():
    assert kk_residual(FunctionPotential(lambda x: 0 * x), UNIT) == 0.0


def test_kk_residual_refines():
    coarse = kk_residual(M2, UNIT, step=1 / 8)
    fine = kk_residual(M2, UNIT, step=1 / 16)
    assert coarse / fine >= 3.0


def test_holomorphy_slope():
    x = UNIT.positions
    for m in (1, 2):
        p = M2.with_(m=m)
        assert holomorphy_log_slope(p, x) <= -p.Omega + 1e-9


@given(
    x=st.floats(-50, 50),
    delta=st.floats(0, 5),
    Omega=st.floats(0, 20),
    alpha=st.floats(0.05, 2),
    m=st.integers(1, 3),
)
def test_displaced_bound(x, delta, Omega, alpha, m):
    p = KKPotential(1.0, Omega, alpha, m)
    val = abs(evaluate(p, x + 1j * delta))
    assert val <= np.exp(-Omega * delta) / (alpha + delta) ** m * (1 + 1e-12)


@given(
    k=st.floats(-5, 40),
    delta=st.floats(0, 8),
    alpha=st.floats(0.05, 2),
    m=st.integers(1, 3),
)
def test_displacement_identity(k, delta, alpha, m):
    p = KKPotential(0.5 + 1j, 10.0, alpha, m)
    lhs = exact_spectrum(p, k, delta)
    rhs = exact_spectrum(p, k) * np.exp(-k * delta)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def test_table_roundtrip(tmp_path):
    n = np.arange(-5, 6)
    vals = np.exp(1j * n) / (n + 0.3j)
    path = tmp_path / "v.txt"
    save_table(path, n, vals)
    tab = load_table(path)
    np.testing.assert_array_equal(tab.n, n)
    np.testing.assert_allclose(tab.values, vals, rtol=1e-15)


def test_table_rejects_bad_shape(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# comment\n1 2\n3 4\n")
    with pytest.raises(ValueError):
        load_table(path)
    path.write_text("0.5 1 2\n")
    with pytest.raises(ValueError):
        load_table(path)
