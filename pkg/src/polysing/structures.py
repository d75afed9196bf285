"""Linear perturbation subspaces and their orthogonal projections.

All projections are orthogonal with respect to the real inner product
``Re trace(X^H Y)`` on descending stacks ``[Z_d, ..., Z_0]``.

Per-coefficient structures are listed in *ascending* coefficient order
(``structures[i]`` constrains ``Delta_i``), like the coefficients of a
:class:`~polysing.core.MatrixPolynomial`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DimensionError, as_stack, stack_norm

__all__ = [
    "StructureSpace",
    "FullComplex",
    "RealEntries",
    "PerCoefficient",
    "FixedIndices",
    "Palindromic",
    "CoefficientStructure",
    "FullBlock",
    "RealBlock",
    "SparsityPattern",
    "Symmetric",
    "SkewSymmetric",
    "project",
    "contains",
    "dissipative_hamiltonian_space",
    "gyroscopic_space",
]


# -- single-coefficient structures -------------------------------------------

class CoefficientStructure:
    """Linear subspace of ``C^{n x n}`` with an orthogonal projection."""

    real = False

    def project(self, z):
        raise NotImplementedError

    def check(self, n):
        pass

    def describe(self):
        raise NotImplementedError


@dataclass(frozen=True)
class FullBlock(CoefficientStructure):
    def project(self, z):
        return z

    def describe(self):
        return "full"


@dataclass(frozen=True)
class RealBlock(CoefficientStructure):
    real = True

    def project(self, z):
        return z.real.astype(complex)

    def describe(self):
        return "real"


@dataclass(frozen=True, eq=False)
class SparsityPattern(CoefficientStructure):
    """Entries outside ``mask`` are zero; optionally real entries only."""

    mask: np.ndarray
    real: bool = False

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"sparsity mask must be square, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    def check(self, n):
        if self.mask.shape != (n, n):
            raise DimensionError(
                f"sparsity mask has shape {self.mask.shape}, expected {(n, n)}")

    def project(self, z):
        out = np.where(self.mask, z, 0)
        return out.real.astype(complex) if self.real else out

    def describe(self):
        return {"sparsity": self.mask.astype(int).tolist(), "real": self.real}


@dataclass(frozen=True)
class Symmetric(CoefficientStructure):
    """``Z = Z^T`` (transpose, not conjugate transpose)."""

    real: bool = False

    def project(self, z):
        if self.real:
            z = z.real
        return ((z + z.T) / 2).astype(complex)

    def describe(self):
        return "symmetric-real" if self.real else "symmetric"


@dataclass(frozen=True)
class SkewSymmetric(CoefficientStructure):
    """``Z = -Z^T``."""

    real: bool = False

    def project(self, z):
        if self.real:
            z = z.real
        return ((z - z.T) / 2).astype(complex)

    def describe(self):
        return "skew-real" if self.real else "skew"


# -- whole-stack structures ---------------------------------------------------

class StructureSpace:
    """A real-linear subspace of descending stacks ``(d+1, n, n)``."""

    def project(self, z):
        raise NotImplementedError

    def is_real(self) -> bool:
        """True if every member of the space has real entries."""
        return False

    def describe(self):
        raise NotImplementedError

    def __call__(self, z):
        return self.project(z)


@dataclass(frozen=True)
class FullComplex(StructureSpace):
    """No constraint."""

    def project(self, z):
        return as_stack(z)

    def describe(self):
        return "full"


@dataclass(frozen=True)
class RealEntries(StructureSpace):
    """Real perturbations of every coefficient."""

    def project(self, z):
        return as_stack(z).real.astype(complex)

    def is_real(self):
        return True

    def describe(self):
        return "real"


@dataclass(frozen=True)
class PerCoefficient(StructureSpace):
    """``Delta_i`` constrained to its own subspace ``structures[i]``."""

    structures: tuple

    def __post_init__(self):
        s = tuple(self.structures)
        if not all(isinstance(x, CoefficientStructure) for x in s):
            raise TypeError("PerCoefficient expects CoefficientStructure entries")
        object.__setattr__(self, "structures", s)

    @property
    def degree(self):
        return len(self.structures) - 1

    def project(self, z):
        z = as_stack(z, d=self.degree)
        n = z.shape[1]
        out = np.empty_like(z)
        d = self.degree
        for i, s in enumerate(self.structures):
            s.check(n)
            out[d - i] = s.project(z[d - i])
        return out

    def is_real(self):
        return all(s.real for s in self.structures)

    def describe(self):
        return {"per_coefficient": [s.describe() for s in self.structures]}


@dataclass(frozen=True)
class FixedIndices(StructureSpace):
    """Coefficients ``A_i``, ``i in indices``, are not perturbed."""

    indices: frozenset
    inner: StructureSpace = FullComplex()

    def __post_init__(self):
        idx = frozenset(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise ValueError("fixed coefficient indices must be nonnegative")
        if isinstance(self.inner, (FixedIndices, Palindromic)):
            raise ValueError(
                f"FixedIndices cannot wrap {type(self.inner).__name__}")
        object.__setattr__(self, "indices", idx)

    def project(self, z):
        z = as_stack(z)
        d = z.shape[0] - 1
        if max(self.indices, default=-1) > d:
            raise DimensionError(
                f"fixed index {max(self.indices)} exceeds degree {d}")
        if len(self.indices) == d + 1:
            raise ValueError("at least one coefficient must be free")
        out = self.inner.project(z).copy()
        for i in self.indices:
            out[d - i] = 0
        return out

    def is_real(self):
        return self.inner.is_real()

    def describe(self):
        return {"fixed": sorted(self.indices), "inner": self.inner.describe()}


@dataclass(frozen=True)
class Palindromic(StructureSpace):
    """``Delta_{d-i} = Delta_i^H`` for every ``i``."""

    def project(self, z):
        z = as_stack(z)
        zh = np.conj(np.swapaxes(z, 1, 2))
        return (z + zh[::-1]) / 2

    def describe(self):
        return "palindromic"


def project(S: StructureSpace, z) -> np.ndarray:
    """Orthogonal projection of the stack ``z`` onto ``S``."""
    return S.project(z)


def contains(S: StructureSpace, z, tol=1e-12) -> bool:
    z = as_stack(z)
    r = stack_norm(z - S.project(z))
    return r <= tol * max(1.0, stack_norm(z))


def dissipative_hamiltonian_space(n: int | None = None) -> PerCoefficient:
    """Real quadratic structure: ``Delta_0``, ``Delta_2`` symmetric, ``Delta_1`` skew.

    ``n`` is accepted for symmetry with other constructors; the space works
    for any block size.
    """
    if n is not None and n < 1:
        raise ValueError("n must be at least 1")
    return PerCoefficient((Symmetric(real=True), SkewSymmetric(real=True),
                           Symmetric(real=True)))


# mass/stiffness symmetric, gyroscopic term skew: the same linear space
gyroscopic_space = dissipative_hamiltonian_space


_BLOCK_NAMES = {
    "full": FullBlock,
    "complex": FullBlock,
    "real": RealBlock,
    "symmetric": Symmetric,
    "sym": Symmetric,
    "skew": SkewSymmetric,
    "skew-symmetric": SkewSymmetric,
}


def block_from_descriptor(desc) -> CoefficientStructure:
    if isinstance(desc, str):
        key = desc.lower()
        real = False
        if key.endswith("-real"):
            key, real = key[:-5], True
        if key not in _BLOCK_NAMES:
            raise ValueError(f"unknown coefficient structure {desc!r}")
        cls = _BLOCK_NAMES[key]
        if cls in (Symmetric, SkewSymmetric):
            return cls(real=real)
        if real:
            return RealBlock()
        return cls()
    if isinstance(desc, dict) and "sparsity" in desc:
        return SparsityPattern(np.array(desc["sparsity"], dtype=bool),
                               real=bool(desc.get("real", False)))
    raise ValueError(f"unknown coefficient structure {desc!r}")


def structure_from_descriptor(desc, degree: int | None = None) -> StructureSpace:
    """Inverse of ``StructureSpace.describe``.

    Strings: ``full``, ``real``, ``palindromic``, ``dissipative-hamiltonian``
    (alias ``gyroscopic``).
    """
    if desc is None:
        return FullComplex()
    if isinstance(desc, str):
        key = desc.lower()
        if key in ("full", "complex", "none"):
            return FullComplex()
        if key == "real":
            return RealEntries()
        if key == "palindromic":
            return Palindromic()
        if key in ("dissipative-hamiltonian", "dh", "gyroscopic", "sym-skew-sym"):
            if degree is not None and degree != 2:
                raise ValueError(f"{desc!r} structure needs degree 2, got {degree}")
            return dissipative_hamiltonian_space()
        raise ValueError(f"unknown structure {desc!r}")
    if isinstance(desc, dict):
        if "fixed" in desc:
            inner = structure_from_descriptor(desc.get("inner", "full"), degree)
            return FixedIndices(frozenset(desc["fixed"]), inner)
        if "per_coefficient" in desc:
            blocks = tuple(block_from_descriptor(b) for b in desc["per_coefficient"])
            if degree is not None and len(blocks) != degree + 1:
                raise DimensionError(
                    f"per_coefficient lists {len(blocks)} entries, expected {degree + 1}")
            return PerCoefficient(blocks)
    raise ValueError(f"unknown structure descriptor {desc!r}")


def per_coefficient(blocks: Sequence[CoefficientStructure]) -> PerCoefficient:
    return PerCoefficient(tuple(blocks))
