"""Matrix polynomials, stacked coefficient blocks and the singular-triplet kernel.

Stacks are plain complex arrays of shape ``(d+1, n, n)`` holding the blocks
in *descending* order ``[A_d, A_{d-1}, ..., A_0]``; ``stack.reshape(-1, n)``
is the tall ``(d+1)n x n`` block column.  Polynomials keep their
coefficients ascending ``[A_0, ..., A_d]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PolysingError",
    "DimensionError",
    "BackendError",
    "MatrixPolynomial",
    "SamplePointSet",
    "SingularTriplet",
    "as_stack",
    "stack",
    "evaluate",
    "evaluate_perturbed",
    "evaluate_at_points",
    "frobenius_real_inner",
    "stack_norm",
    "default_rho",
    "generate_sample_points",
    "smallest_singular_triplet",
    "smallest_singular_triplets",
]


class PolysingError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(PolysingError, ValueError):
    """Raised when array shapes do not match."""


class BackendError(PolysingError, RuntimeError):
    """Raised when the dense SVD backend fails.

    Carries the Frobenius norm and shape of the offending matrix.
    """

    def __init__(self, msg, norm, shape):
        super().__init__(f"{msg} (norm={norm:.6g}, shape={shape})")
        self.norm = norm
        self.shape = shape


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """Square matrix polynomial ``P(lam) = sum_i lam**i * A_i``.

    Parameters
    ----------
    coeffs : array_like, shape (d+1, n, n)
        Coefficients in ascending order ``[A_0, ..., A_d]``.
    """

    coeffs: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise DimensionError(
                f"coefficients must have shape (d+1, n, n), got {c.shape}")
        if c.shape[0] < 2:
            raise DimensionError("degree must be at least 1")
        if c.shape[1] < 1:
            raise DimensionError("matrix size must be at least 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if not np.any(c[-1]):
            raise ValueError("leading coefficient A_d is identically zero")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_stack(cls, blocks, name=""):
        """Build from a descending stack ``[A_d, ..., A_0]``."""
        return cls(np.asarray(blocks)[::-1], name=name)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def size(self) -> int:
        return self.coeffs.shape[1]

    # short aliases matching the usual notation
    d = degree
    n = size

    def stack(self) -> np.ndarray:
        return stack(self)

    def norm(self) -> float:
        return stack_norm(self.coeffs)

    def is_real(self) -> bool:
        return not np.any(self.coeffs.imag)

    def conjugate_transpose(self) -> "MatrixPolynomial":
        """Coefficient-wise ``A_i^H``."""
        return MatrixPolynomial(np.conj(np.swapaxes(self.coeffs, 1, 2)),
                                name=self.name)

    def perturbed(self, delta, eps) -> "MatrixPolynomial":
        """Return ``P + eps * Delta`` with ``delta`` a descending stack."""
        delta = as_stack(delta, self.degree, self.size)
        return MatrixPolynomial(self.coeffs + eps * delta[::-1],
                                name=self.name)


def as_stack(blocks, d=None, n=None) -> np.ndarray:
    """Validate and return ``blocks`` as a complex ``(d+1, n, n)`` array."""
    z = np.asarray(blocks, dtype=complex)
    if z.ndim == 2 and n is not None and z.shape[1] == n and z.shape[0] % n == 0:
        z = z.reshape(-1, n, n)
    if z.ndim != 3 or z.shape[1] != z.shape[2]:
        raise DimensionError(f"expected a (d+1, n, n) stack, got shape {z.shape}")
    if d is not None and z.shape[0] != d + 1:
        raise DimensionError(f"expected {d + 1} blocks, got {z.shape[0]}")
    if n is not None and z.shape[1] != n:
        raise DimensionError(f"expected {n}x{n} blocks, got {z.shape[1:]}")
    return z


def stack(P: MatrixPolynomial) -> np.ndarray:
    """Descending block stack ``[A_d, ..., A_0]`` of ``P`` (a fresh array)."""
    return np.array(P.coeffs[::-1])


def stack_norm(z) -> float:
    """Frobenius norm of a stack; squares summed block by block in order."""
    z = np.asarray(z)
    return float(np.sqrt(sum(float(np.vdot(b, b).real) for b in z)))


def frobenius_real_inner(x, y) -> float:
    """``Re trace(X^H Y)`` summed over all blocks."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.vdot(x, y).real)


def _horner(coeffs, mu):
    # coeffs ascending; mu scalar or array of shape (m,)
    mu = np.asarray(mu, dtype=complex)
    out = np.broadcast_to(coeffs[-1], mu.shape + coeffs.shape[1:]).astype(complex)
    w = mu[..., None, None]
    for a in coeffs[-2::-1]:
        out = out * w + a
    return out


def evaluate(P: MatrixPolynomial, mu) -> np.ndarray:
    """``P(mu)`` by Horner's rule."""
    return _horner(P.coeffs, complex(mu))


def evaluate_perturbed(P: MatrixPolynomial, delta, eps, mu) -> np.ndarray:
    """``sum_i mu**i (A_i + eps * Delta_i)``; ``delta`` is a descending stack."""
    delta = as_stack(delta, P.degree, P.size)
    return _horner(P.coeffs + eps * delta[::-1], complex(mu))


def evaluate_at_points(coeffs, points) -> np.ndarray:
    """Evaluate ascending ``coeffs`` at every point; returns shape (m, n, n)."""
    return _horner(np.asarray(coeffs, dtype=complex),
                   np.asarray(points, dtype=complex))


@dataclass(frozen=True, eq=False)
class SamplePointSet:
    """Distinct complex points at which singularity is tested."""

    points: np.ndarray
    rho: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex).ravel()
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        diff = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(diff, np.inf)
        if pts.size > 1 and diff.min() == 0:
            raise ValueError("sample points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def check_for(self, d, n):
        if len(self) < d * n + 1:
            raise ValueError(
                f"need at least d*n+1 = {d * n + 1} sample points, have {len(self)}")


def default_rho(P: MatrixPolynomial) -> float:
    return max(1.0, P.norm() / (P.degree + 1))


def generate_sample_points(d, n, rho=1.0, scheme="roots", m=None, offset=0.0):
    """Sample points for a degree-``d``, size-``n`` polynomial.

    ``scheme="roots"`` gives ``rho * exp(i (2 pi j / m + offset))`` for
    ``j = 1..m``; ``scheme="chebyshev"`` gives the real points
    ``rho * cos((2j - 1) pi / (2m))``.  ``m`` defaults to ``d*n + 1``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    mmin = d * n + 1
    m = mmin if m is None else int(m)
    if m < mmin:
        raise ValueError(f"m={m} is below d*n+1={mmin}")
    j = np.arange(1, m + 1)
    if scheme in ("roots", "roots-of-unity"):
        pts = rho * np.exp(1j * (2 * np.pi * j / m + offset))
    elif scheme == "chebyshev":
        pts = rho * np.cos((2 * j - 1) * np.pi / (2 * m)) + 0j
    else:
        raise ValueError(f"unknown sample point scheme {scheme!r}")
    return SamplePointSet(pts, float(rho))


@dataclass(frozen=True, eq=False)
class SingularTriplet:
    """Smallest singular value with unit left/right singular vectors.

    ``gap`` is the distance to the next singular value (``inf`` for 1x1),
    reported so that near-multiple smallest singular values can be spotted.
    """

    sigma: float
    u: np.ndarray
    v: np.ndarray
    gap: float = np.inf


def _fix_phase(u, v):
    # make the largest-modulus entry of each v real and nonnegative
    k = np.argmax(np.abs(v), axis=-1)
    pivot = np.take_along_axis(v, k[..., None], axis=-1)
    mod = np.abs(pivot)
    phase = np.where(mod > 0, np.conj(pivot) / np.where(mod > 0, mod, 1), 1)
    u, v = u * phase, v * phase
    np.put_along_axis(v, k[..., None], mod.astype(v.dtype), axis=-1)  # exactly real
    return u, v


def _svd(D):
    try:
        return np.linalg.svd(D, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        norm = float(np.linalg.norm(D))
        raise BackendError(f"SVD did not converge: {exc}", norm, D.shape) from exc


def smallest_singular_triplets(D):
    """Batched smallest triplets of ``D`` with shape (m, p, q), ``p >= q``.

    Returns ``(sigma, U, V, gap)`` with ``U[j]``, ``V[j]`` the left and
    right singular vectors of ``D[j]``.
    """
    D = np.asarray(D, dtype=complex)
    if not np.all(np.isfinite(D)):
        raise BackendError("non-finite matrix entries", float("nan"), D.shape)
    U, s, Vh = _svd(D)
    sigma = s[..., -1]
    u = U[..., :, -1]
    v = np.conj(Vh[..., -1, :])
    u, v = _fix_phase(u, v)
    if s.shape[-1] > 1:
        gap = s[..., -2] - s[..., -1]
    else:
        gap = np.full(sigma.shape, np.inf)
    return sigma, u, v, gap


def smallest_singular_triplet(D) -> SingularTriplet:
    """Smallest singular value of ``D`` and its singular vectors.

    The phase is fixed so that the largest-modulus entry of ``v`` is real
    and nonnegative.
    """
    D = np.asarray(D, dtype=complex)
    if D.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {D.shape}")
    if D.shape[0] < D.shape[1]:
        raise DimensionError("expected at least as many rows as columns")
    sigma, u, v, gap = smallest_singular_triplets(D[None])
    return SingularTriplet(float(sigma[0]), u[0], v[0], float(gap[0]))
