import numpy as np
import pytest

from polysing.core import MatrixPolynomial, frobenius_real_inner, stack_norm
from polysing.fixtures import p1_delta
from polysing.flow import FlowOptions, _gradient, _Sampled, inner_minimize
from polysing.outer import (
    ConvergenceError,
    SolverConfig,
    newton_update,
    sample_points_for,
    solve_distance,
    verify_singularity,
)
from polysing.structures import FullComplex, RealEntries

from conftest import random_stack, structure_zoo


def test_newton_update_examples():
    assert newton_update(1.0, 0.5, 2.0, 0.0) == 1.25
    assert newton_update(0.3, 1e-6, 4.0, 1e-6) == 0.3
    assert newton_update(0.3, 1e-9, 0.0, 1e-6) == 0.3
    with pytest.raises(ConvergenceError):
        newton_update(0.3, 1.0, 0.0, 1e-6)


@pytest.mark.parametrize("kw", [dict(tol1=0), dict(tol2=-1), dict(k_max=-1), dict(eps0=-1),
                                dict(eps_low=2, eps_up=1), dict(rho=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_default_tolerance_scales_with_degree():
    assert SolverConfig().resolved_tol1(3) == 3e-6
    assert SolverConfig(tol1=1e-5).resolved_tol1(3) == 1e-5


def test_sample_points_are_rotated_roots():
    P = p1_delta(0.5)
    pts = sample_points_for(P, SolverConfig())
    m = 5
    np.testing.assert_allclose((pts.points / pts.rho) ** m, 1j, atol=1e-14)
    pts = sample_points_for(P, SolverConfig(point_offset=0.0, n_points=7, rho=2.0))
    np.testing.assert_allclose((pts.points / 2.0) ** 7, 1, atol=1e-13)


def test_singular_input_short_circuits():
    rep = solve_distance(p1_delta(0))
    assert rep.eps_star == 0.0 and rep.outer_trace == [] and rep.certified
    assert rep.verification < 1e-14


@pytest.mark.parametrize("coeffs", [[1, 1], [1, 0, 1], [2, -1, 0.5], [1j, 1], [0.3, 0, 0, 2]])
def test_scalar_distance_is_full_cancellation(coeffs):
    P = MatrixPolynomial(np.array(coeffs, dtype=complex).reshape(-1, 1, 1))
    rep = solve_distance(P)
    assert abs(rep.eps_star - P.norm()) <= 1e-4


def test_table_row_report_consistency():
    rows = []
    P = p1_delta(0.9)
    rep = solve_distance(P, FullComplex(), SolverConfig(tol1=7e-7), trace=rows.append)
    assert rows == rep.outer_trace
    assert [r.k for r in rows] == list(range(1, len(rows) + 1))
    assert {r.branch for r in rows} <= {"newton", "bisection"}
    assert rep.converged and rep.certified
    assert rep.verification <= 10 * 7e-7
    assert rep.eps_low <= rep.eps_tol1 + 1e-15
    assert abs(stack_norm(rep.delta_star) - 1) < 1e-13
    assert np.allclose(rep.perturbation(), rep.eps_star * rep.delta_star)
    assert rep.iterations == len(rows)
    # g decreases along Newton iterates as eps grows
    newton = sorted((r.eps, r.g) for r in rows if r.branch == "newton")
    assert all(b[1] <= a[1] for a, b in zip(newton, newton[1:]))


def test_refinement_lands_on_singular_boundary():
    P = p1_delta(0.1)
    rep = solve_distance(P, cfg=SolverConfig(tol1=7e-7))
    assert rep.g_star <= 0.5 * 7e-7 ** 2
    assert rep.eps_star >= rep.eps_tol1
    none = solve_distance(P, cfg=SolverConfig(tol1=7e-7, refine_steps=0))
    assert none.eps_star == pytest.approx(none.eps_tol1) or none.certified is False


def test_verification_examples():
    P = p1_delta(0.9)
    assert verify_singularity(p1_delta(0), np.zeros((3, 2, 2)), 0.0) < 1e-14
    r0 = verify_singularity(P, np.zeros((3, 2, 2)), 0.0)
    pts = sample_points_for(P, SolverConfig())
    s = _Sampled(P.coeffs, np.zeros((3, 2, 2)), 0.0, pts.points)
    assert r0 >= np.min(s.sigma) > 0
    with pytest.raises(ValueError):
        verify_singularity(P, np.zeros((3, 2, 2)), 0.0, n_check=2)


def test_verification_is_seeded():
    P = p1_delta(0.5)
    D = random_stack(np.random.default_rng(1), 2, 2)
    assert verify_singularity(P, D, 0.1, seed=3) == verify_singularity(P, D, 0.1, seed=3)


def test_warm_start_from_eps0():
    rep = solve_distance(p1_delta(0.5), cfg=SolverConfig(eps0=0.2))
    assert abs(rep.eps_star - 0.28033) < 2e-3


def test_real_structure_gives_real_perturbation():
    P = p1_delta(0.5)
    rep = solve_distance(P, RealEntries())
    assert not np.any(rep.delta_star.imag)


def test_kmax_zero_reports_unconverged():
    rep = solve_distance(p1_delta(0.5), cfg=SolverConfig(k_max=0, refine_steps=0))
    assert not rep.converged and rep.outer_trace == []


def test_outer_derivative_finite_differences():
    # dg/deps = -|Pi_S(M)| at a stationary point, on 20 random structured instances
    rng = np.random.default_rng(77)
    opts = FlowOptions(h0=1.0, max_steps=20000, stationarity_tol=1e-12)
    done = 0
    while done < 20:
        d, n = int(rng.integers(1, 3)), int(rng.integers(1, 4))
        S = structure_zoo(d, n, rng)[done % 7]
        C = S.project(random_stack(rng, d, n))[::-1].copy()
        C[-1] += np.eye(n)
        P = MatrixPolynomial(C)
        pts = sample_points_for(P, SolverConfig())
        base = _Sampled(P.coeffs, np.zeros((d + 1, n, n)), 0.0, pts.points)
        g0 = S.project(_gradient(base.sigma, base.U, base.V, pts.points, d))
        if stack_norm(g0) == 0:
            continue
        delta = -g0 / stack_norm(g0)
        eps = 0.2 * P.norm() / (d + 1)
        r = inner_minimize(P, eps, delta, S, pts, opts)
        while r.g_value < 1e-3 * base.value:
            eps /= 2
            r = inner_minimize(P, eps, delta, S, pts, opts)
        if r.min_gap < 1e-3:
            continue
        h = 1e-5 * max(eps, 1.0)
        gp = inner_minimize(P, eps + h, r.delta, S, pts, opts).g_value
        gm = inner_minimize(P, eps - h, r.delta, S, pts, opts).g_value
        fd = (gp - gm) / (2 * h)
        assert abs(fd + r.grad_norm) <= 1e-5 * r.grad_norm, (type(S).__name__, fd, r.grad_norm)
        # envelope argument: the partial derivative at fixed Delta agrees
        s = _Sampled(P.coeffs, r.delta, eps, pts.points)
        M = S.project(_gradient(s.sigma, s.U, s.V, pts.points, d))
        assert abs(frobenius_real_inner(M, r.delta) + r.grad_norm) <= 1e-5 * r.grad_norm
        done += 1
