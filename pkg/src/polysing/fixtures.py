"""Embedded reference problems with their expected distances.

Each fixture carries the polynomial, the structure, the solver settings it
is meant to be run with, the expected value and the tolerance used by the
``reproduce`` harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .core import MatrixPolynomial
from .flow import FlowOptions
from .outer import SolverConfig
from .structures import (
    FixedIndices,
    FullComplex,
    Palindromic,
    RealEntries,
    StructureSpace,
    dissipative_hamiltonian_space,
)

__all__ = ["Fixture", "FIXTURES", "get_fixture", "p1_delta"]


@dataclass(frozen=True, eq=False)
class Fixture:
    """A reference problem.

    ``allow_smaller`` accepts a certified result below ``expected``: the
    reference values come from a local method and are upper bounds.
    """

    name: str
    polynomial: MatrixPolynomial
    structure: StructureSpace
    expected: float
    tol: float
    mode: str = "singularity"
    config: SolverConfig = field(default_factory=SolverConfig)
    allow_smaller: bool = False
    description: str = ""

    def check(self, eps_star, certified=True) -> bool:
        if abs(eps_star - self.expected) <= self.tol:
            return True
        return self.allow_smaller and certified and eps_star < self.expected


def p1_delta(delta: float) -> MatrixPolynomial:
    """``lam^2 E11 + lam [[0, 1], [1 - delta, 0]] + E22``; singular for ``delta = 0``."""
    A2 = np.array([[1.0, 0.0], [0.0, 0.0]])
    A1 = np.array([[0.0, 1.0], [1.0 - delta, 0.0]])
    A0 = np.array([[0.0, 0.0], [0.0, 1.0]])
    name = "p1" if delta == 0 else f"p1_delta_{delta:g}"
    return MatrixPolynomial([A0, A1, A2], name=name)


_ANTI = np.array([[0.0, 0, 0], [0, 0, 1], [0, 1, 0]])

_LEAD = [np.array([[0.0, 0.4, 0.89], [0.15, -0.02, 0.0], [0.92, 0.11, 0.06]]),
         np.eye(3), _ANTI]
_MIXED = [_ANTI,
         np.array([[-1.79, 0.10, -0.60], [0.84, -0.54, 0.49], [-0.89, 0.30, 0.74]]),
         np.eye(3)]
_PALIN = [np.array([[0.0, 1, 0], [0, -1, -2], [-1, -1, 0]]),
         np.array([[-1.0, 0, -0.5], [0, 0, -0.5], [-0.5, -0.5, 2]]),
         np.array([[0.0, 0, -1], [1, -1, -1], [0, -2, 0]])]

_DH5_A2 = np.array([[0.15, 0.02, -0.04, 0.02, -0.04],
                     [0.02, 0.22, 0, -0.01, -0.03],
                     [-0.04, 0, 0.11, -0.07, -0.04],
                     [0.02, -0.01, -0.07, 0.01, 0.10],
                     [-0.04, -0.03, -0.04, 0.10, 0.39]])
_DH5_A1 = np.array([[0, -0.27, -0.03, -0.01, 0.21],
                     [0.27, 0, -0.15, 0.03, 0.11],
                     [0.03, 0.15, 0, 0.07, -0.07],
                     [0.01, -0.03, -0.07, 0, 0.05],
                     [-0.21, -0.11, 0.07, -0.05, 0]])
_DH5_A0 = np.array([[0.49, -0.13, 0.05, -0.15, 0.11],
                     [-0.13, 0.23, -0.05, -0.10, -0.19],
                     [0.05, -0.05, 0.48, -0.06, 0.02],
                     [-0.15, -0.10, -0.06, 0.55, 0.16],
                     [0.11, -0.19, 0.02, 0.16, 0.48]])

_GYRO_G = np.array([[0.0, -2, 4], [2, 0, -2], [-4, 2, 0]])
_GYRO_K = np.array([[13.0, 2, 1], [2, 7, 2], [1, 2, 4]])

# the default 500 inner steps stop well short of stationarity on these
_LONG_FLOW = SolverConfig(flow=FlowOptions(max_steps=2000))
_NEAR_SINGULAR = SolverConfig(tol1=7e-7, tol2=1e-7)


def _build() -> Dict[str, Fixture]:
    fx = [
        Fixture("p1", p1_delta(0.0), FullComplex(), 0.0, 1e-6,
                config=_NEAR_SINGULAR, description="singular input"),
    ]
    for delta, ref in [(0.9, 5.4614e-1), (0.5, 2.8033e-1), (0.1, 5.0802e-2),
                       (0.01, 4.5653e-3)]:
        P = p1_delta(delta)
        fx.append(Fixture(P.name, P, FullComplex(), ref, 2e-3, config=_NEAR_SINGULAR,
                          description=f"near-singular quadratic, delta={delta:g}"))
    fx += [
        Fixture("lead_fixed", MatrixPolynomial(_LEAD, name="lead_fixed"),
                FixedIndices(frozenset({2})), 1.2415, 1e-2, config=_LONG_FLOW,
                description="leading coefficient not perturbed"),
        Fixture("lead_free", MatrixPolynomial(_LEAD, name="lead_free"), FullComplex(),
                1.1054, 1e-2, config=_LONG_FLOW, description="all coefficients perturbed"),
        Fixture("mixed_complex", MatrixPolynomial(_MIXED, name="mixed_complex"),
                FullComplex(), 1.2775967141, 1e-2, config=_LONG_FLOW, allow_smaller=True,
                description="complex perturbations of a real polynomial"),
        Fixture("mixed_real", MatrixPolynomial(_MIXED, name="mixed_real"), RealEntries(),
                1.2927804886, 1e-2, config=_LONG_FLOW, allow_smaller=True,
                description="real perturbations"),
        Fixture("palindromic3", MatrixPolynomial(_PALIN, name="palindromic3"),
                Palindromic(), 1.0523, 1e-2, config=_LONG_FLOW,
                description="palindromic structure"),
        Fixture("dh5", MatrixPolynomial([_DH5_A0, _DH5_A1, _DH5_A2], name="dh5"),
                dissipative_hamiltonian_space(), 0.3541658817, 5e-3, mode="kernel",
                description="common kernel, symmetric/skew/symmetric perturbations"),
        Fixture("gyroscopic3",
                MatrixPolynomial([_GYRO_K, _GYRO_G, np.eye(3)], name="gyroscopic3"),
                dissipative_hamiltonian_space(), 14.4976, 1e-1, mode="kernel",
                description="gyroscopic system, common kernel"),
    ]
    return {f.name: f for f in fx}


FIXTURES: Dict[str, Fixture] = _build()


def get_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}") from None
