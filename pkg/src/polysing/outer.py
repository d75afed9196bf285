"""Outer iteration: Newton-bisection on the perturbation size ``eps``.

``g(eps)`` is the inner functional at the stationary direction found for
``eps``; ``-g'(eps)`` equals the norm of the projected gradient there.
Newton steps target ``g = tol1`` from the left, iterates with
``g <= tol1`` shrink the bracket from the right.  Once the bracket is
closed, a short refinement with the double-root Newton step
``eps + 2 g / |g'|`` pushes ``eps`` onto the singular boundary, so the
reported ``eps_star`` comes with a perturbation that is singular to
working precision.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import (
    MatrixPolynomial,
    PolysingError,
    SamplePointSet,
    as_stack,
    default_rho,
    evaluate_at_points,
    generate_sample_points,
    smallest_singular_triplets,
    stack_norm,
)
from .flow import FlowOptions, _gradient, _Sampled, inner_minimize
from .structures import FullComplex, StructureSpace

__all__ = [
    "ConvergenceError",
    "SolverConfig",
    "TraceRow",
    "SolveReport",
    "newton_update",
    "sample_points_for",
    "solve_distance",
    "verify_singularity",
]

log = logging.getLogger(__name__)


class ConvergenceError(PolysingError, ArithmeticError):
    """Raised when the Newton step is undefined (vanishing derivative)."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the outer iteration.

    ``tol1=None`` means ``d * 1e-6`` and ``eps_up=None`` means the norm of
    the coefficient stack.  ``point_offset=None`` rotates the roots-of-unity
    points by ``pi / (2m)`` so that they are not closed under conjugation
    (with conjugation-symmetric points a real polynomial keeps the
    unstructured flow on real perturbations).  ``refine_steps`` bounds the
    final push onto the singular boundary; 0 disables it.
    """

    tol1: Optional[float] = None
    tol2: float = 1e-7
    k_max: int = 20
    eps0: float = 0.0
    eps_low: float = 0.0
    eps_up: Optional[float] = None
    flow: FlowOptions = field(default_factory=FlowOptions)
    scheme: str = "roots"
    rho: Optional[float] = None
    n_points: Optional[int] = None
    point_offset: Optional[float] = None
    refine_steps: int = 12
    n_check: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.tol1 is not None and self.tol1 <= 0:
            raise ValueError("tol1 must be positive")
        if self.tol2 <= 0:
            raise ValueError("tol2 must be positive")
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")
        if self.eps_low < 0 or (self.eps_up is not None and self.eps_up < self.eps_low):
            raise ValueError("need 0 <= eps_low <= eps_up")
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive")

    def resolved_tol1(self, d):
        return d * 1e-6 if self.tol1 is None else self.tol1


@dataclass(frozen=True)
class TraceRow:
    k: int
    eps: float
    g: float
    grad_norm: float
    branch: str
    inner_steps: int


@dataclass(eq=False)
class SolveReport:
    """Outcome of a distance computation.

    ``eps_star`` is the reported distance and ``delta_star`` the unit-norm
    perturbation direction; ``eps_tol1`` is the last outer iterate (the
    ``g = tol1`` crossing).  ``verification`` is the largest smallest
    singular value of ``P + eps_star * delta_star`` over fresh points.
    """

    eps_star: float
    delta_star: np.ndarray
    outer_trace: List[TraceRow]
    verification: float
    converged: bool
    certified: bool = False
    g_star: float = 0.0
    eps_tol1: float = 0.0
    eps_low: float = 0.0
    eps_up: float = 0.0
    refinement: List[TraceRow] = field(default_factory=list)
    tol1: float = 0.0
    tol2: float = 0.0
    mode: str = "singularity"
    points: Optional[np.ndarray] = None
    notes: List[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.outer_trace)

    def perturbation(self) -> np.ndarray:
        """``eps_star * delta_star`` as a descending stack."""
        return self.eps_star * self.delta_star


def newton_update(eps_k, g_k, grad_norm_k, tol1):
    """Newton step on ``g - tol1`` using ``g' = -grad_norm``."""
    if grad_norm_k <= 0:
        if g_k > tol1:
            raise ConvergenceError(
                f"vanishing gradient at eps={eps_k:.6g} with g={g_k:.3g} > tol1")
        return eps_k
    return eps_k + (g_k - tol1) / grad_norm_k


def sample_points_for(P: MatrixPolynomial, cfg: SolverConfig) -> SamplePointSet:
    rho = cfg.rho if cfg.rho is not None else default_rho(P)
    m = cfg.n_points if cfg.n_points is not None else P.degree * P.size + 1
    offset = cfg.point_offset
    if offset is None:
        offset = math.pi / (2 * m) if cfg.scheme.startswith("roots") else 0.0
    return generate_sample_points(P.degree, P.size, rho, cfg.scheme, m=m,
                                  offset=offset)


# -- generic Newton-bisection engine -----------------------------------------

@dataclass
class _State:
    eps: float
    delta: np.ndarray
    g: float
    slope: float
    steps: int = 0
    stationary: bool = True
    v: Optional[np.ndarray] = None  # kernel vector, kernel solver only


def _newton_bisection(evaluate, start: _State, lo, up, tol1, tol2, k_max,
                      sink=None):
    """Run the outer loop; returns (last state, rows, lo, up, up_state, converged)."""
    rows = []
    cur = start
    up_state = None
    converged = False
    k = 0
    while True:
        if cur.g > tol1:
            lo = max(lo, cur.eps)
        else:
            up = min(up, cur.eps)
            up_state = cur
        if up - lo <= tol2:
            converged = True
            break
        if k >= k_max:
            break
        if cur.g > tol1:
            branch = "newton"
            try:
                nxt = newton_update(cur.eps, cur.g, cur.slope, tol1)
            except ConvergenceError as exc:
                log.warning("%s; bisecting", exc)
                nxt, branch = (lo + up) / 2, "bisection"
            if branch == "newton" and abs(nxt - cur.eps) <= tol2 and k > 0:
                # converged onto g = tol1 from the left
                converged = True
                break
        else:
            nxt, branch = (lo + up) / 2, "bisection"
        if not lo <= nxt <= up:
            nxt, branch = (lo + up) / 2, "bisection"
        k += 1
        cur = evaluate(nxt, cur.delta)
        row = TraceRow(k, cur.eps, cur.g, cur.slope, branch, cur.steps)
        rows.append(row)
        if not cur.stationary:
            log.info("inner iteration not stationary at eps=%.6g", cur.eps)
        if sink is not None:
            sink(row)
    return cur, rows, lo, up, up_state, converged


def _refine(evaluate, cur: _State, cap, cert_g, steps):
    """Double-root Newton steps ``eps + 2g/|g'|`` until ``g <= cert_g``."""
    rows = []
    best = cur
    for i in range(steps):
        if cur.g <= cert_g:
            return cur, rows, True
        if cur.slope <= 0:
            break
        nxt = min(cur.eps + 2.0 * cur.g / cur.slope, cap)
        if nxt <= cur.eps:
            break
        cur = evaluate(nxt, cur.delta)
        rows.append(TraceRow(i + 1, cur.eps, cur.g, cur.slope, "refine", cur.steps))
        if cur.g >= best.g:
            # inner iterations too inexact for the model; stop walking
            break
        best = cur
    return best, rows, best.g <= cert_g


def _run_outer(evaluate, start, eps_up, tol1, cfg, sink, cert_g):
    last, rows, lo, up, up_state, converged = _newton_bisection(
        evaluate, start, cfg.eps_low, eps_up, tol1, cfg.tol2, cfg.k_max, sink)
    final, ref_rows, certified = _refine(evaluate, last, eps_up, cert_g,
                                         cfg.refine_steps)
    if not certified and up_state is not None and up_state.g <= cert_g:
        final, certified = up_state, True
    if not certified:
        # best available: the smallest eps classified singular, else the last iterate
        final = up_state if up_state is not None else last
    return final, rows, ref_rows, lo, up, converged, certified, last


# -- singularity distance -----------------------------------------------------

def verify_singularity(P: MatrixPolynomial, delta, eps, n_check=None, seed=0,
                       rho=None) -> float:
    """Largest ``sigma_min`` of ``P + eps*Delta`` over fresh random points.

    Half of the points lie on the circle of radius ``rho``, half on radius
    ``2*rho``; angles come from ``numpy.random.default_rng(seed)``.
    """
    mmin = P.degree * P.size + 1
    n_check = 2 * mmin if n_check is None else int(n_check)
    if n_check < mmin:
        raise ValueError(f"n_check must be at least d*n+1 = {mmin}")
    rho = default_rho(P) if rho is None else rho
    delta = as_stack(delta, P.degree, P.size)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, n_check)
    radius = np.where(np.arange(n_check) < (n_check + 1) // 2, rho, 2 * rho)
    pts = radius * np.exp(1j * theta)
    D = evaluate_at_points(P.coeffs + eps * delta[::-1], pts)
    sigma = smallest_singular_triplets(D)[0]
    return float(np.max(sigma))


def _initial_direction(grad, S, seed=0):
    gn = stack_norm(grad)
    if gn > 0:
        return -grad / gn
    # projected gradient vanishes: fall back to a fixed pseudo-random direction in S
    rng = np.random.default_rng(seed)
    z = S.project(rng.standard_normal(grad.shape) + 1j * rng.standard_normal(grad.shape))
    return z / stack_norm(z)


def solve_distance(P: MatrixPolynomial, S: Optional[StructureSpace] = None,
                   cfg: Optional[SolverConfig] = None,
                   trace: Optional[Callable[[TraceRow], None]] = None) -> SolveReport:
    """Distance from ``P`` to the nearest singular polynomial with perturbation in ``S``."""
    S = S or FullComplex()
    cfg = cfg or SolverConfig()
    d, n = P.degree, P.size
    tol1 = cfg.resolved_tol1(d)
    pts = sample_points_for(P, cfg)
    pts.check_for(d, n)
    points = pts.points
    eps_up = P.norm() if cfg.eps_up is None else cfg.eps_up
    zero = np.zeros((d + 1, n, n), dtype=complex)

    base = _Sampled(P.coeffs, zero, 0.0, points)
    grad0 = S.project(_gradient(base.sigma, base.U, base.V, points, d))
    delta0 = _initial_direction(grad0, S, cfg.seed)

    def report(eps, delta, g, rows, refine_rows, converged, certified, eps_tol1,
               lo, up, notes=()):
        return SolveReport(
            eps_star=float(eps), delta_star=delta, outer_trace=rows,
            verification=verify_singularity(P, delta, eps, cfg.n_check, cfg.seed, pts.rho),
            converged=converged, certified=certified, g_star=float(g),
            eps_tol1=float(eps_tol1), eps_low=float(lo), eps_up=float(up),
            refinement=refine_rows, tol1=tol1, tol2=cfg.tol2, points=points,
            notes=list(notes))

    # already singular to tolerance at eps = 0
    if base.value <= tol1:
        return report(0.0, delta0, base.value, [], [], True, base.value <= tol1 ** 2 / 2,
                      0.0, 0.0, 0.0, ["input is singular within tol1"])

    def evaluate(eps, delta):
        r = inner_minimize(P, eps, delta, S, pts, cfg.flow)
        return _State(eps, r.delta, r.g_value, r.grad_norm, r.steps, r.stationary)

    if cfg.eps0 > 0:
        start = evaluate(cfg.eps0, delta0)
    else:
        start = _State(0.0, delta0, base.value, stack_norm(grad0))
    final, rows, ref_rows, lo, up, converged, certified, last = _run_outer(
        evaluate, start, eps_up, tol1, cfg, trace, cert_g=tol1 ** 2 / 2)
    return report(final.eps, final.delta, final.g, rows, ref_rows, converged,
                  certified, last.eps, lo, up)
