"""Inner iteration: constrained gradient flow on the unit sphere of a structure space.

For fixed ``eps`` the functional

    G(Delta) = 1/2 * sum_j sigma_min(P(mu_j) + eps * Delta(mu_j))**2

is driven to a stationary point over unit-norm ``Delta`` in ``S`` by
normalized Euler steps along ``-Pi_S(M) + eta * Delta`` with an Armijo
line search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    DimensionError,
    MatrixPolynomial,
    SamplePointSet,
    SingularTriplet,
    as_stack,
    evaluate_at_points,
    frobenius_real_inner,
    smallest_singular_triplets,
    stack_norm,
)
from .structures import FullComplex, StructureSpace

__all__ = [
    "FlowOptions",
    "GradientStack",
    "InnerResult",
    "functional_G",
    "gradient_stack",
    "flow_step",
    "normalized_step",
    "inner_minimize",
]


@dataclass(frozen=True)
class FlowOptions:
    """Step control for the normalized Euler / Armijo inner iteration."""

    h0: float = 0.1
    armijo_slope: float = 0.1
    backtrack_factor: float = 0.5
    grow_factor: float = 1.2
    max_steps: int = 500
    stationarity_tol: float = 1e-8

    def __post_init__(self):
        if self.h0 <= 0 or self.max_steps < 0 or self.stationarity_tol <= 0:
            raise ValueError("h0 and stationarity_tol must be positive")
        if not 0 < self.armijo_slope < 1:
            raise ValueError("armijo_slope must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.grow_factor < 1:
            raise ValueError("grow_factor must be >= 1")


@dataclass(frozen=True, eq=False)
class GradientStack:
    """Free gradient ``M = [M_d; ...; M_0]`` and the sigmas it was built from."""

    stack: np.ndarray
    sigmas: np.ndarray


@dataclass(frozen=True, eq=False)
class InnerResult:
    delta: np.ndarray
    g_value: float
    grad_norm: float
    steps: int
    stationarity_residual: float
    stationary: bool
    sigmas: np.ndarray
    min_gap: float


class _Sampled:
    """Triplets of ``P + eps*Delta`` at all sample points."""

    __slots__ = ("value", "sigma", "U", "V", "gap")

    def __init__(self, coeffs, delta, eps, points):
        D = evaluate_at_points(coeffs + eps * delta[::-1], points)
        self.sigma, self.U, self.V, self.gap = smallest_singular_triplets(D)
        self.value = 0.5 * float(np.sum(self.sigma ** 2))

    def triplets(self):
        return [SingularTriplet(float(s), u, v, float(g))
                for s, u, v, g in zip(self.sigma, self.U, self.V, self.gap)]


def _points(pts):
    return pts.points if isinstance(pts, SamplePointSet) else np.asarray(pts, dtype=complex)


def functional_G(P: MatrixPolynomial, delta, eps, pts):
    """``G_eps(Delta)`` and the smallest triplets in point order."""
    delta = as_stack(delta, P.degree, P.size)
    s = _Sampled(P.coeffs, delta, eps, _points(pts))
    return s.value, s.triplets()


def _gradient(sigma, U, V, points, d):
    # block b of the descending stack carries power k = d - b
    k = np.arange(d, -1, -1)
    w = np.conj(points)[None, :] ** k[:, None] * sigma[None, :]
    return np.einsum("kj,ja,jb->kab", w, U, np.conj(V))


def gradient_stack(triplets, pts, d) -> GradientStack:
    """``M_k = sum_j conj(mu_j)**k sigma_j u_j v_j^H``, stacked ``[M_d; ...; M_0]``."""
    points = _points(pts)
    if len(triplets) != points.size:
        raise DimensionError(
            f"{len(triplets)} triplets for {points.size} sample points")
    sigma = np.array([t.sigma for t in triplets], dtype=float)
    U = np.array([t.u for t in triplets])
    V = np.array([t.v for t in triplets])
    return GradientStack(_gradient(sigma, U, V, points, d), sigma)


def normalized_step(delta, grad, h):
    """One normalized Euler step along ``-grad + eta*delta``.

    ``grad`` must already be projected onto the structure space.  Returns
    ``(new_delta, direction, stationary)``; when the direction vanishes
    ``delta`` comes back unchanged with ``stationary=True``.
    """
    eta = frobenius_real_inner(delta, grad)
    direction = -grad + eta * delta
    dn = stack_norm(direction)
    if dn == 0.0 or dn <= 1e-15 * stack_norm(grad):
        return delta, direction, True
    new = delta + h * direction
    return new / stack_norm(new), direction, False


def flow_step(delta, M, S: StructureSpace, h):
    """Normalized Euler step of ``Delta' = -Pi_S(M) + eta*Delta``.

    Returns ``(new_delta, stationary)``.
    """
    grad = M.stack if isinstance(M, GradientStack) else np.asarray(M)
    new, _, stationary = normalized_step(delta, S.project(grad), h)
    return new, stationary


def inner_minimize(P: MatrixPolynomial, eps, delta_init, S: Optional[StructureSpace],
                   pts, opts: FlowOptions = FlowOptions(),
                   trace: Optional[Callable[[dict], None]] = None) -> InnerResult:
    """Drive ``G_eps`` to a stationary point from ``delta_init``.

    Steps are accepted when ``G(new) <= G - armijo_slope * h * eps * |dir|**2``;
    rejected steps shrink ``h`` by ``backtrack_factor``, accepted ones grow it
    by ``grow_factor`` (never above ``h0``).  Stops when
    ``|Pi_S(M) + |Pi_S(M)| * Delta| <= stationarity_tol * max(1, |Pi_S(M)|)``
    or after ``max_steps`` accepted steps; the latter is reported through
    ``stationary=False`` and never raises.  ``trace`` receives one dict per
    iterate (keys ``step``, ``h``, ``g``, ``grad_norm``,
    ``stationarity_residual``, ``min_gap``, ``delta``).
    """
    S = S or FullComplex()
    d = P.degree
    points = _points(pts)
    delta = as_stack(delta_init, d, P.size)
    cur = _Sampled(P.coeffs, delta, eps, points)
    h = opts.h0
    steps = 0
    while True:
        grad = S.project(_gradient(cur.sigma, cur.U, cur.V, points, d))
        gn = stack_norm(grad)
        residual = stack_norm(grad + gn * delta)
        stationary = (residual <= opts.stationarity_tol * max(1.0, gn)
                      or cur.value == 0.0 or gn == 0.0)
        if trace is not None:
            trace({"step": steps, "h": h, "g": cur.value, "grad_norm": gn,
                   "stationarity_residual": residual,
                   "min_gap": float(np.min(cur.gap)), "delta": delta})
        if stationary or steps >= opts.max_steps:
            break
        eta = frobenius_real_inner(delta, grad)
        direction = -grad + eta * delta
        dn2 = frobenius_real_inner(direction, direction)
        if dn2 == 0.0:
            stationary = True
            break
        accepted = None
        while h * np.sqrt(dn2) > 1e-15:
            trial = delta + h * direction
            trial /= stack_norm(trial)
            new = _Sampled(P.coeffs, trial, eps, points)
            # strict decrease as well: near stationarity the Armijo margin drops below one ulp
            if (new.value < cur.value
                    and new.value <= cur.value - opts.armijo_slope * h * eps * dn2):
                accepted = (trial, new)
                break
            h *= opts.backtrack_factor
        if accepted is None:
            # no representable step gives sufficient decrease
            break
        delta, cur = accepted
        steps += 1
        h = min(h * opts.grow_factor, opts.h0)
    return InnerResult(delta=delta, g_value=cur.value, grad_norm=gn, steps=steps,
                       stationarity_residual=residual, stationary=bool(stationary),
                       sigmas=cur.sigma.copy(), min_gap=float(np.min(cur.gap)))
