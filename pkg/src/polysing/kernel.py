"""Distance to the nearest polynomial whose coefficients share a kernel vector.

Coefficients have a common right kernel exactly when the tall block
column ``[A_d; ...; A_0]`` is rank deficient, so the unstructured distance
is its smallest singular value.  With structure the functional

    F(Delta) = 1/2 * sigma_min(A + eps * Delta)**2

is minimized over unit ``Delta`` in ``S`` by a gradient flow and the
perturbation size is found by the same Newton-bisection loop as the
singularity distance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import (
    MatrixPolynomial,
    SingularTriplet,
    as_stack,
    frobenius_real_inner,
    smallest_singular_triplet,
    stack_norm,
)
from .flow import FlowOptions
from .outer import SolverConfig, TraceRow, _initial_direction, _run_outer, _State
from .structures import FullComplex, StructureSpace

__all__ = [
    "KernelSide",
    "KernelResult",
    "KernelInnerResult",
    "unstructured_kernel_distance",
    "functional_F",
    "kernel_gradient",
    "kernel_flow_step",
    "kernel_inner_minimize",
    "kernel_residual",
    "solve_kernel_distance",
]


class KernelSide(str, enum.Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(eq=False)
class KernelResult:
    """Outcome of a kernel-distance computation.

    ``kernel_vector`` ``x`` satisfies ``(A_i + eps_star*Delta_i) x ~ 0``
    (right side) or ``x^H (A_i + eps_star*Delta_i) ~ 0`` (left side).
    """

    eps_star: float
    delta_star: np.ndarray
    kernel_vector: np.ndarray
    trace: List[TraceRow]
    converged: bool
    certified: bool = False
    residual: float = 0.0
    g_star: float = 0.0
    eps_tol1: float = 0.0
    eps_low: float = 0.0
    eps_up: float = 0.0
    refinement: List[TraceRow] = field(default_factory=list)
    side: KernelSide = KernelSide.RIGHT
    tol1: float = 0.0
    tol2: float = 0.0
    mode: str = "kernel"

    @property
    def outer_trace(self):
        return self.trace

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def verification(self):
        return self.residual


@dataclass(frozen=True, eq=False)
class KernelInnerResult:
    delta: np.ndarray
    f_value: float
    sigma: float
    grad_norm: float
    steps: int
    stationarity_residual: float
    stationary: bool
    v: np.ndarray


def _tall(z):
    z = np.asarray(z)
    return z.reshape(-1, z.shape[-1])


def unstructured_kernel_distance(A):
    """``(sigma_min(A), x)`` for the tall stack ``A``; ``x`` is the right singular vector."""
    A = as_stack(A)
    t = smallest_singular_triplet(_tall(A))
    return t.sigma, t.v


def functional_F(A, delta, eps):
    """``1/2 sigma_min(A + eps*Delta)**2`` and the triplet (``u`` has length ``(d+1)n``)."""
    A = as_stack(A)
    delta = as_stack(delta, A.shape[0] - 1, A.shape[1])
    t = smallest_singular_triplet(_tall(A + eps * delta))
    return 0.5 * t.sigma ** 2, t


def kernel_gradient(triplet: SingularTriplet, d: int) -> np.ndarray:
    """``u v^H`` reshaped to a descending stack."""
    n = triplet.v.size
    return triplet.u.reshape(d + 1, n)[:, :, None] * np.conj(triplet.v)[None, None, :]


def kernel_flow_step(delta, triplet: SingularTriplet, S: StructureSpace, h):
    """Normalized Euler step of ``Delta' = -Pi_S(u v^H) + zeta*Delta``.

    Returns ``(new_delta, stationary)``.
    """
    delta = as_stack(delta)
    grad = S.project(kernel_gradient(triplet, delta.shape[0] - 1))
    zeta = frobenius_real_inner(grad, delta)
    direction = -grad + zeta * delta
    dn = stack_norm(direction)
    if dn == 0.0 or dn <= 1e-15 * stack_norm(grad):
        return delta, True
    new = delta + h * direction
    return new / stack_norm(new), False


def kernel_inner_minimize(A, eps, delta_init, S: Optional[StructureSpace],
                          opts: FlowOptions = FlowOptions(),
                          trace: Optional[Callable[[dict], None]] = None) -> KernelInnerResult:
    """Armijo-controlled flow for ``F_eps``; same step rules as the singularity flow.

    Along the flow ``dF/dt = -eps * sigma * |dir|**2``, which is the
    predicted decrease used in the acceptance test.
    """
    S = S or FullComplex()
    A = as_stack(A)
    d = A.shape[0] - 1
    delta = as_stack(delta_init, d, A.shape[1])
    f, t = functional_F(A, delta, eps)
    h = opts.h0
    steps = 0
    while True:
        grad = S.project(kernel_gradient(t, d))
        gn = stack_norm(grad)
        residual = stack_norm(grad + gn * delta)
        stationary = residual <= opts.stationarity_tol * max(1.0, gn) or f == 0.0 or gn == 0.0
        if trace is not None:
            trace({"step": steps, "h": h, "f": f, "sigma": t.sigma, "grad_norm": gn,
                   "stationarity_residual": residual, "delta": delta})
        if stationary or steps >= opts.max_steps:
            break
        zeta = frobenius_real_inner(delta, grad)
        direction = -grad + zeta * delta
        dn2 = frobenius_real_inner(direction, direction)
        if dn2 == 0.0:
            stationary = True
            break
        accepted = None
        while h * np.sqrt(dn2) > 1e-15:
            trial = delta + h * direction
            trial /= stack_norm(trial)
            f_new, t_new = functional_F(A, trial, eps)
            if f_new < f and f_new <= f - opts.armijo_slope * h * eps * t.sigma * dn2:
                accepted = (trial, f_new, t_new)
                break
            h *= opts.backtrack_factor
        if accepted is None:
            break
        delta, f, t = accepted
        steps += 1
        h = min(h * opts.grow_factor, opts.h0)
    return KernelInnerResult(delta=delta, f_value=f, sigma=t.sigma, grad_norm=gn,
                             steps=steps, stationarity_residual=residual,
                             stationary=bool(stationary), v=t.v)


def kernel_residual(P: MatrixPolynomial, delta, eps, x, side=KernelSide.RIGHT) -> float:
    """``max_i |(A_i + eps*Delta_i) x|`` (right) or ``max_i |x^H (A_i + eps*Delta_i)|`` (left)."""
    B = P.stack() + eps * as_stack(delta, P.degree, P.size)
    side = KernelSide(side)
    if side is KernelSide.LEFT:
        B = np.conj(np.swapaxes(B, 1, 2))
    return float(max(np.linalg.norm(b @ x) for b in B))


class _Adjoint(StructureSpace):
    # {Z^H : Z in S}, blockwise; used to solve left-kernel problems on the right
    def __init__(self, S):
        self.S = S

    def project(self, z):
        zh = np.conj(np.swapaxes(as_stack(z), 1, 2))
        return np.conj(np.swapaxes(self.S.project(zh), 1, 2))

    def is_real(self):
        return self.S.is_real()

    def describe(self):
        return self.S.describe()


def solve_kernel_distance(P: MatrixPolynomial, S: Optional[StructureSpace] = None,
                          side=KernelSide.RIGHT, cfg: Optional[SolverConfig] = None,
                          trace: Optional[Callable[[TraceRow], None]] = None) -> KernelResult:
    """Structured distance to a common right (or left) kernel of the coefficients.

    The left problem is solved as the right problem for the coefficient-wise
    conjugate transposes; ``delta_star`` is mapped back before returning.
    """
    S = S or FullComplex()
    cfg = cfg or SolverConfig()
    side = KernelSide(side)
    d, n = P.degree, P.size
    tol1 = cfg.resolved_tol1(d)
    A = P.stack()
    S_work = S
    if side is KernelSide.LEFT:
        A = np.conj(np.swapaxes(A, 1, 2))
        S_work = _Adjoint(S)
    eps_up = P.norm() if cfg.eps_up is None else cfg.eps_up
    zero = np.zeros_like(A)

    f0, t0 = functional_F(A, zero, 0.0)
    grad0 = S_work.project(kernel_gradient(t0, d))
    delta0 = _initial_direction(grad0, S_work, cfg.seed)

    def evaluate(eps, delta):
        r = kernel_inner_minimize(A, eps, delta, S_work, cfg.flow)
        return _State(eps, r.delta, r.f_value, r.sigma * r.grad_norm, r.steps,
                      r.stationary, r.v)

    def finish(st, rows, ref_rows, converged, certified, eps_tol1, lo, up):
        delta = st.delta
        if side is KernelSide.LEFT:
            delta = np.conj(np.swapaxes(delta, 1, 2))
        x = st.v
        return KernelResult(
            eps_star=float(st.eps), delta_star=delta, kernel_vector=x, trace=rows,
            converged=converged, certified=certified,
            residual=kernel_residual(P, delta, st.eps, x, side), g_star=float(st.g),
            eps_tol1=float(eps_tol1), eps_low=float(lo), eps_up=float(up),
            refinement=ref_rows, side=side, tol1=tol1, tol2=cfg.tol2)

    start = _State(0.0, delta0, f0, t0.sigma * stack_norm(grad0), v=t0.v)
    if f0 <= tol1:
        return finish(start, [], [], True, f0 <= tol1 ** 2 / 2, 0.0, 0.0, 0.0)
    if cfg.eps0 > 0:
        start = evaluate(cfg.eps0, delta0)
    final, rows, ref_rows, lo, up, converged, certified, last = _run_outer(
        evaluate, start, eps_up, tol1, cfg, trace, cert_g=tol1 ** 2 / 2)
    return finish(final, rows, ref_rows, converged, certified, last.eps, lo, up)
