import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polysing.core import MatrixPolynomial
from polysing.structures import (
    FixedIndices,
    FullComplex,
    Palindromic,
    PerCoefficient,
    RealEntries,
    SkewSymmetric,
    SparsityPattern,
    Symmetric,
    dissipative_hamiltonian_space,
)

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_stack(rng, d, n, real=False):
    z = rng.standard_normal((d + 1, n, n))
    if not real:
        z = z + 1j * rng.standard_normal((d + 1, n, n))
    return z.astype(complex)


def structure_zoo(d, n, rng):
    """A spread of structure spaces valid for degree d, size n."""
    mask = rng.random((n, n)) < 0.6
    mask[0, 0] = True
    out = [
        FullComplex(),
        RealEntries(),
        Palindromic(),
        FixedIndices(frozenset({d})),
        FixedIndices(frozenset({0}), RealEntries()),
        PerCoefficient(tuple([Symmetric(), SkewSymmetric(real=True)] * d)[: d + 1]
                       if d >= 1 else (Symmetric(),)),
        PerCoefficient(tuple(SparsityPattern(mask, real=(i % 2 == 1)) for i in range(d + 1))),
    ]
    if d == 2:
        out.append(dissipative_hamiltonian_space())
    return out


def polynomial_in(S, d, n, rng):
    """Random polynomial whose stack lies in S, or None if S forces A_d = 0."""
    z = S.project(random_stack(rng, d, n))
    if not np.any(np.abs(z[0]) > 1e-8):
        return None
    return MatrixPolynomial(z[::-1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
