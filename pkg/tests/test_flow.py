import numpy as np
import pytest

from polysing.core import (
    MatrixPolynomial,
    SingularTriplet,
    frobenius_real_inner,
    generate_sample_points,
    stack_norm,
)
from polysing.fixtures import p1_delta
from polysing.flow import (
    FlowOptions,
    _gradient,
    _Sampled,
    flow_step,
    functional_G,
    gradient_stack,
    inner_minimize,
    normalized_step,
)
from polysing.outer import SolverConfig, sample_points_for, solve_distance
from polysing.structures import FixedIndices, FullComplex, contains

from conftest import polynomial_in, random_stack, structure_zoo


def _unit_in(S, d, n, rng):
    z = S.project(random_stack(rng, d, n))
    return z / stack_norm(z)


def _grad(P, delta, eps, S, pts):
    s = _Sampled(P.coeffs, delta, eps, pts.points)
    return S.project(_gradient(s.sigma, s.U, s.V, pts.points, P.degree)), s


def test_value_singular_p1():
    pts = generate_sample_points(2, 2)
    val, trip = functional_G(p1_delta(0), np.zeros((3, 2, 2)), 0.0, pts)
    assert val < 1e-28 and len(trip) == 5


def test_value_regular_p1_delta():
    val, _ = functional_G(p1_delta(0.9), np.zeros((3, 2, 2)), 0.0, generate_sample_points(2, 2))
    assert val > 0


def test_value_scalar_linear():
    P = MatrixPolynomial([[[1.0]], [[1.0]]])
    val, trip = functional_G(P, np.zeros((2, 1, 1)), 0.0, [-1.0, 1.0])
    assert trip[0].sigma == 0.0 and trip[1].sigma == 2.0
    assert val == 2.0


def test_gradient_stack_examples():
    t = SingularTriplet(2.0, np.array([1.0, 0]), np.array([1.0, 0]))
    g = gradient_stack([t], [1.0], 0)
    np.testing.assert_array_equal(g.stack, [[[2, 0], [0, 0]]])
    z = SingularTriplet(0.0, np.array([0, 1.0]), np.array([1.0, 0]))
    assert not np.any(gradient_stack([z, z], [1.0, -1.0], 2).stack)


def test_gradient_stack_matches_definition(rng):
    P = MatrixPolynomial(random_stack(rng, 2, 3))
    pts = generate_sample_points(2, 3, rho=1.3, offset=0.2)
    D = random_stack(rng, 2, 3)
    _, trip = functional_G(P, D, 0.4, pts)
    M = gradient_stack(trip, pts, 2).stack
    for b, k in enumerate([2, 1, 0]):
        ref = sum(np.conj(mu) ** k * t.sigma * np.outer(t.u, t.v.conj())
                  for mu, t in zip(pts.points, trip))
        np.testing.assert_allclose(M[b], ref, atol=1e-13)


def test_gradient_phase_invariant(rng):
    P = MatrixPolynomial(random_stack(rng, 2, 2))
    pts = generate_sample_points(2, 2)
    _, trip = functional_G(P, np.zeros((3, 2, 2)), 0.0, pts)
    rot = [SingularTriplet(t.sigma, np.exp(0.3j * i) * t.u, np.exp(0.3j * i) * t.v)
           for i, t in enumerate(trip)]
    np.testing.assert_allclose(gradient_stack(rot, pts, 2).stack,
                               gradient_stack(trip, pts, 2).stack, atol=1e-14)


def test_directional_derivative_finite_differences():
    # d/dt G(Delta + t Z) = eps Re<Pi_S(M), Z> for Z in S, over random structured instances
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 20:
        d, n = int(rng.integers(1, 3)), int(rng.integers(1, 5))
        S = structure_zoo(d, n, rng)[checked % 7]
        P = MatrixPolynomial(random_stack(rng, d, n))
        pts = sample_points_for(P, SolverConfig())
        eps = float(rng.uniform(0.1, 1.0))
        delta = _unit_in(S, d, n, rng)
        Z = S.project(random_stack(rng, d, n))
        Z = Z - frobenius_real_inner(Z, delta) * delta
        grad, s = _grad(P, delta, eps, S, pts)
        if np.min(s.gap) < 1e-3 or np.min(s.sigma) < 1e-6:
            continue
        h = 1e-6
        gp, _ = functional_G(P, delta + h * Z, eps, pts)
        gm, _ = functional_G(P, delta - h * Z, eps, pts)
        fd = (gp - gm) / (2 * h)
        exact = eps * frobenius_real_inner(grad, Z)
        assert abs(fd - exact) <= 1e-5 * max(abs(exact), 1e-3 * stack_norm(grad) * stack_norm(Z) * eps)
        checked += 1


def test_projected_gradient_identity():
    # Re<Pi_S(M), A + eps Delta> = sum_j sigma_j**2 for A, Delta in S
    rng = np.random.default_rng(99)
    count = 0
    for trial in range(40):
        d, n = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        for S in structure_zoo(d, n, rng):
            P = polynomial_in(S, d, n, rng)
            if P is None:
                continue
            pts = sample_points_for(P, SolverConfig())
            delta = _unit_in(S, d, n, rng)
            eps = float(rng.uniform(0, 2))
            grad, s = _grad(P, delta, eps, S, pts)
            lhs = frobenius_real_inner(grad, P.stack() + eps * delta)
            rhs = float(np.sum(s.sigma ** 2))
            assert abs(lhs - rhs) <= 1e-8 * (rhs + 1)
            count += 1
    assert count >= 100


def test_stationary_direction_is_kept(rng):
    P = MatrixPolynomial(random_stack(rng, 2, 2))
    pts = generate_sample_points(2, 2)
    grad, _ = _grad(P, np.zeros((3, 2, 2)), 0.0, FullComplex(), pts)
    delta = -grad / stack_norm(grad)
    new, stationary = flow_step(delta, grad, FullComplex(), 0.1)
    assert stationary
    np.testing.assert_array_equal(new, delta)


def test_step_decreases_to_first_order(rng):
    P = MatrixPolynomial(random_stack(rng, 2, 3))
    pts = sample_points_for(P, SolverConfig())
    S = FullComplex()
    delta = _unit_in(S, 2, 3, rng)
    eps = 0.5
    grad, s = _grad(P, delta, eps, S, pts)
    h = 1e-4
    new, direction, _ = normalized_step(delta, grad, h)
    g_new, _ = functional_G(P, new, eps, pts)
    predicted = -eps * h * stack_norm(direction) ** 2
    assert g_new - s.value == pytest.approx(predicted, rel=1e-2)
    assert stack_norm(new) == pytest.approx(1.0, abs=1e-14)


def test_fixed_block_untouched(rng):
    S = FixedIndices(frozenset({2}))
    delta = _unit_in(S, 2, 2, rng)
    M = random_stack(rng, 2, 2)
    new, _ = flow_step(delta, M, S, 0.3)
    assert not np.any(new[0] - delta[0])


def test_inner_iterates_monotone_unit_structured(rng):
    for S in structure_zoo(2, 3, rng):
        P = MatrixPolynomial(random_stack(rng, 2, 3))
        pts = sample_points_for(P, SolverConfig())
        rows = []
        res = inner_minimize(P, 0.8, _unit_in(S, 2, 3, rng), S, pts,
                             FlowOptions(max_steps=60), trace=rows.append)
        gs = [r["g"] for r in rows]
        assert all(b < a for a, b in zip(gs, gs[1:]))
        for r in rows:
            assert abs(stack_norm(r["delta"]) - 1) <= 1e-13
            assert contains(S, r["delta"], 1e-10)
        assert res.steps == len(rows) - 1
        assert res.g_value == gs[-1]


def test_inner_converges_to_negative_multiple(rng):
    P = MatrixPolynomial(random_stack(rng, 1, 2))
    pts = sample_points_for(P, SolverConfig())
    grad, _ = _grad(P, np.zeros((2, 2, 2)), 0.0, FullComplex(), pts)
    res = inner_minimize(P, 0.0, -grad / stack_norm(grad), FullComplex(), pts)
    assert res.stationary and res.steps == 0
    assert res.stationarity_residual <= 1e-8 * max(1, res.grad_norm)


def test_inner_on_singular_input():
    P = p1_delta(0)
    res = inner_minimize(P, 0.0, np.eye(2)[None].repeat(3, 0) / np.sqrt(6), None,
                         generate_sample_points(2, 2))
    assert res.g_value < 1e-28 and res.grad_norm < 1e-14 and res.stationary


def test_inner_value_at_reported_distance():
    P = p1_delta(0.5)
    rep = solve_distance(P)
    pts = sample_points_for(P, SolverConfig())
    res = inner_minimize(P, 0.28033, rep.delta_star, FullComplex(), pts)
    assert res.g_value <= 2e-6


def test_max_steps_reported_not_raised(rng):
    P = MatrixPolynomial(random_stack(rng, 2, 3))
    pts = sample_points_for(P, SolverConfig())
    res = inner_minimize(P, 1.0, _unit_in(FullComplex(), 2, 3, rng), None, pts,
                         FlowOptions(max_steps=2))
    assert res.steps == 2 and not res.stationary


@pytest.mark.parametrize("kw", [dict(h0=0), dict(armijo_slope=1.0), dict(backtrack_factor=1.5),
                                dict(grow_factor=0.9), dict(stationarity_tol=-1)])
def test_flow_options_validation(kw):
    with pytest.raises(ValueError):
        FlowOptions(**kw)
