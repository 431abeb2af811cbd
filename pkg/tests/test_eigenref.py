import math

import numpy as np
import pytest
import sympy as sp

from edspec import eigenref as er
from edspec import galerkin as g
from edspec.weight import WeightSpec


@pytest.fixture(scope="module")
def sol1():
    return er.solve_ode(1.0, 20.0, 1e-12)


def test_series_coefficients_against_taylor_solve():
    # brute-force Taylor matching of (Psi w u')' + lam w u = 0 with the exact Psi
    x, lam, c2, c4 = sp.symbols("x lam c2 c4")
    psi = (sp.erf(x) - 2 / sp.sqrt(sp.pi) * x * sp.exp(-x ** 2)) / (2 * x ** 3)
    psi_ser = sp.series(psi, x, 0, 6).removeO()
    w = x ** 2 * sp.exp(-x ** 2)
    u = 1 + c2 * x ** 2 + c4 * x ** 4
    expr = sp.series(sp.diff(psi_ser * w * sp.diff(u, x), x) + lam * w * u, x, 0, 6).removeO()
    expr = sp.expand(expr)
    sol = sp.solve([expr.coeff(x, 2), expr.coeff(x, 4)], [c2, c4], dict=True)[0]
    for lv in (0.3, 1.0, 2.5):
        a, b = er.series_coefficients(lv)
        assert a == pytest.approx(float(sol[c2].subs(lam, lv)), rel=1e-14)
        assert b == pytest.approx(float(sol[c4].subs(lam, lv)), rel=1e-13)
    # the leading coefficient is -lam sqrt(pi)/4
    assert er.series_coefficients(1.0)[0] == pytest.approx(-math.sqrt(math.pi) / 4, rel=1e-15)


def test_lambda_zero_is_constant():
    s = er.solve_ode(0.0, 15.0, 1e-12)
    assert np.max(np.abs(s.u - 1.0) * np.exp(-0.5 * s.x ** 2)) <= 1e-12
    assert s.u[0] == 1.0 and s.du[0] == 0.0


def test_boundary_values(sol1):
    assert sol1.u[0] == 1.0 and sol1.du[0] == 0.0
    assert sol1.x[0] == 0.0 and sol1.x[-1] == 20.0


def test_tolerance_self_consistency():
    xs = np.linspace(0.0, 15.0, 3001)
    tol = 1e-10
    a = er.solve_ode(1.0, 15.0, tol, xs=xs)
    b = er.solve_ode(1.0, 15.0, tol / 10, xs=xs)
    assert np.max(np.abs(a.u_scaled - b.u_scaled)) <= 10 * tol


def test_series_start_consistency():
    xs = np.linspace(0.1, 15.0, 3001)
    a = er.solve_ode(1.0, 15.0, 1e-12, x0=1e-3, xs=xs)
    b = er.solve_ode(1.0, 15.0, 1e-12, x0=1e-2, xs=xs)
    assert np.max(np.abs(a.u_scaled - b.u_scaled)) <= 1e-10


def test_argument_checks():
    with pytest.raises(ValueError):
        er.solve_ode(-1.0)
    with pytest.raises(ValueError):
        er.solve_ode(1.0, 31.0)
    with pytest.raises(ValueError):
        er.solve_ode(1.0, tol=1e-14)


def test_envelope_values():
    p, q = er.envelope(1.0, 10.0)
    assert p == pytest.approx(10 ** -0.25 * (1 + 1 / 80 + 5 / 12800 + 15 / 1024000), rel=1e-15)
    x = 1e6
    p, q = er.envelope(1.0, x)
    assert p * x ** 0.25 == pytest.approx(1.0, rel=1e-6)
    assert q / (math.sqrt(2 * x ** 5) * 0.4) == pytest.approx(1.0, rel=1e-6)


def test_synthetic_fit_recovers_parameters():
    lam, A, th = 1.3, 0.37, -2.2

    def model(z):
        p, q = er.envelope(lam, np.maximum(z, 1.0))
        y = A * p * np.cos(q + th)
        return np.vstack([y, y])
    xs = np.linspace(0.0, 16.0, 2001)
    syn = er.EigenSolution(lam, xs, model(xs)[0] * np.exp(0.5 * xs ** 2), np.zeros_like(xs),
                           1e-12, dense=model)
    A0, th0 = er.fit_envelope(syn, window=(8.0, 14.0))
    assert abs(A0 - A) < 1e-10 and abs(th0 - th) < 1e-10


def test_fit_window_checks(sol1):
    with pytest.raises(ValueError):
        er.fit_envelope(sol1, window=(4.0, 10.0))
    with pytest.raises(ValueError):
        er.fit_envelope(sol1, window=(10.0, 25.0))
    with pytest.raises(er.EnvelopeFitError):
        # lambda mismatch wrecks the fit
        er.fit_envelope(sol1, lam=1.2, window=(8.0, 14.0))


def test_fit_window_shift_stability(sol1):
    a, _ = er.fit_envelope(sol1, window=(8.0, 14.0))
    b, _ = er.fit_envelope(sol1, window=(10.0, 16.0))
    assert abs(a - b) <= 1e-6
    assert a > 0


def test_envelope_peaks(sol1):
    A0, th0 = er.fit_envelope(sol1, window=(8.0, 14.0))
    xs = np.linspace(8.0, 20.0, 400001)
    y = np.abs(sol1.scaled(xs))
    i = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    assert i.size > 50
    p, _ = er.envelope(1.0, xs[i])
    assert np.max(np.abs(y[i] / (A0 * p) - 1)) <= 1e-3
    # amplitude bound past the window start
    assert np.all(y <= 1.05 * A0 * er.envelope(1.0, xs)[0])


def test_residual_of_identical_functions(sol1):
    rep = er.residual_diagnostic(sol1.scaled, sol1, x_range=(0.0, 15.0))
    assert rep.scale == pytest.approx(1.0, abs=1e-12)
    assert rep.max_abs() <= sol1.tol
    assert all(abs(r) <= sol1.tol for _, r in rep.extrema())


@pytest.mark.slow
def test_gibbs_overshoot_grows_with_n():
    peaks = []
    for n in (100, 200, 425):
        op = g.build_operator(WeightSpec(2), n)
        lam, fn = g.eigenfunction_of_PL(op, 1.0)
        sol = er.solve_ode(lam, 15.0, 1e-12)
        u_p = lambda xs: fn(xs, "exphalf")  # noqa: E731
        rep = er.residual_diagnostic(u_p, sol)
        peaks.append(abs(er.gibbs_overshoot(u_p, sol, rep.scale)[1]))
    assert peaks[0] < peaks[1] < peaks[2]
    assert peaks[0] > rep.max_abs(0.125, 6.0)
