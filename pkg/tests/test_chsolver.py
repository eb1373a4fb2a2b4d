from types import SimpleNamespace

import numpy as np
import pytest

from chdisp.chsolver import (
    BlowupError,
    EnergyDriftError,
    GridField,
    Schedule,
    ch_rhs,
    energy,
    evolve,
    initial_field,
    kdv_evolve,
    mass,
    reference_resolution,
    reference_schedule,
    step_rk4,
    write_snapshot_csv,
)
from chdisp.hopf import InitialDatum, Sech2Profile
from chdisp.onephase import RiemannTriple, derive_params, eval_onephase


def _field(fun, L=np.pi, N=128, eps=0.1, nu=1.2):
    x = -L + 2 * L * np.arange(N) / N
    return GridField(L=L, N=N, values=fun(x), eps=eps, nu=nu)


def _deriv(f):
    k = np.pi / f.L * np.arange(f.N // 2 + 1)
    return np.fft.irfft(1j * k * np.fft.rfft(f.values), f.N)


def test_gridfield_validation():
    with pytest.raises(ValueError):
        GridField(L=1.0, N=100, values=np.zeros(100))
    with pytest.raises(ValueError):
        GridField(L=1.0, N=64, values=np.zeros(32))


def test_constant_is_stationary():
    f = _field(lambda x: np.full_like(x, -0.4))
    assert np.max(np.abs(ch_rhs(f))) < 1e-13


def test_nonfinite_rhs_raises():
    f = _field(np.sin)
    f.values[3] = np.nan
    with pytest.raises(BlowupError):
        ch_rhs(f)


def test_linear_dispersion_relation():
    # small amplitude: (1 + eps^2 k^2) u_t = -2 nu u_x, phase speed 2 nu / (1 + eps^2 k^2)
    A, kw, eps, nu = 1e-9, 3, 0.2, 1.2
    f = _field(lambda x: A * np.cos(kw * x), eps=eps, nu=nu)
    T, dt = 0.2, 1e-3
    for _ in range(int(round(T / dt))):
        f = step_rk4(f, dt)
    c = 2 * nu / (1 + eps ** 2 * kw ** 2)
    exact = A * np.cos(kw * (f.x - c * T))
    assert np.max(np.abs(f.values - exact)) < 1e-6 * A


def test_travelling_wave_rhs():
    """A one-phase wave is an exact travelling solution: u_t = -c u_x."""
    eps, nu = 0.05, 1.2
    T = RiemannTriple(0.2, -0.1, -0.5, nu)
    P = derive_params(T, qshift=0.0)
    L = 2 * eps * P.wavelength  # four periods on [-L, L)
    f = _field(lambda x: eval_onephase(x, 0.0, P, T, eps), L=L, N=512, eps=eps, nu=nu)
    ut = ch_rhs(f)
    ref = -T.c * _deriv(f)
    assert np.max(np.abs(ut - ref)) < 1e-8 * np.max(np.abs(ref))


def test_rk4_fourth_order():
    f0 = _field(lambda x: -0.5 / np.cosh(2 * np.sin(x)) ** 2, N=128, eps=0.2)
    T = 0.2

    def run(dt):
        f = f0
        for _ in range(int(round(T / dt))):
            f = step_rk4(f, dt)
        return f.values

    ref = run(T / 320)
    e1 = np.max(np.abs(run(T / 20) - ref))
    e2 = np.max(np.abs(run(T / 40) - ref))
    assert e1 / e2 == pytest.approx(16.0, rel=0.15)


def test_time_reversal():
    f0 = _field(lambda x: -0.5 / np.cosh(2 * np.sin(x)) ** 2, N=128, eps=0.2)
    f = f0
    for _ in range(50):
        f = step_rk4(f, 2e-3)
    for _ in range(50):
        f = step_rk4(f, -2e-3)
    assert np.max(np.abs(f.values - f0.values)) < 1e-10


@pytest.fixture(scope="module")
def short_run():
    d = InitialDatum(Sech2Profile(), nu=1.2, eps=0.1)
    snaps, recs = evolve(d, 0.5, Schedule(dt_coarse=1e-3, dt_fine=1e-4, switch_time=0.4, snapshots=(0.25,)),
                         N=2 ** 11)
    return d, snaps, recs


def test_snapshots_and_switch(short_run):
    _, snaps, recs = short_run
    assert [s.t for s in snaps] == pytest.approx([0.25, 0.5])
    assert [r.t for r in recs] == pytest.approx([0.0, 0.25, 0.5])


def test_conservation(short_run):
    d, snaps, recs = short_run
    f0 = initial_field(d, 2 ** 11)
    assert max(r.drift for r in recs) < 1e-9
    for s in snaps:
        assert mass(s) == pytest.approx(mass(f0), abs=1e-12)


def test_energy_drift_guard():
    d = InitialDatum(Sech2Profile(), nu=1.2, eps=0.1)
    with pytest.raises(EnergyDriftError):
        evolve(d, 0.05, Schedule(dt_coarse=2e-2, energy_bound=1e-30), N=2 ** 10)


def test_energy_definition():
    f = _field(lambda x: 0.3 * np.sin(x), eps=0.5, nu=1.0)
    # int 2 nu u^2 + eps^2 u u_x^2 + u^3 over a period: only 2 nu u^2 survives
    assert energy(f) == pytest.approx(2.0 * 0.09 * np.pi, rel=1e-13)


def test_kdv_soliton():
    """``a sech^2(g (x - s t))`` with ``a = 4 eps^2 g^2``, ``s = 2 nu + a``."""
    eps, nu, g = 0.1, 1.2, 5.0
    a = 4 * eps ** 2 * g ** 2
    s = 2 * nu + a
    prof = SimpleNamespace(u0=lambda x: a / np.cosh(g * x) ** 2)
    datum = SimpleNamespace(u0=prof.u0, eps=eps, nu=nu)
    T = 0.3
    (snap,) = kdv_evolve(datum, T, Schedule(dt_coarse=1e-4, dt_fine=1e-4), N=512, L=8.0)
    exact = a / np.cosh(g * (snap.x - s * T)) ** 2
    assert np.max(np.abs(snap.values - exact)) < 1e-6


def test_kdv_step_cap():
    # a step far beyond the advective limit is capped instead of blowing up
    d = InitialDatum(Sech2Profile(), nu=1.2, eps=0.1)
    (snap,) = kdv_evolve(d, 0.1, Schedule(dt_coarse=5e-2, dt_fine=5e-2), N=2 ** 10)
    assert np.all(np.isfinite(snap.values))


def test_reference_ladder():
    assert [reference_resolution(10 ** -a) for a in (1, 1.25, 1.5, 1.75, 2)] == [2 ** n for n in range(12, 17)]
    s = reference_schedule(0.01)
    assert s.dt_fine == pytest.approx(s.dt_coarse / 10) and s.switch_time == 0.4


def test_snapshot_csv(tmp_path):
    f = _field(np.sin, N=16)
    write_snapshot_csv(tmp_path / "s.csv", f)
    data = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], f.x) and np.array_equal(data[:, 1], f.values)
