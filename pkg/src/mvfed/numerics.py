"""Shared numerical kernels: seeded RNG, SPD solves, orthonormal inits.

Every piece of randomness in the package flows through :func:`make_rng`,
which maps an unsigned integer seed plus a tuple of small integer labels
to an independent PCG64 stream.  Using fixed labels per role lets two
different drivers (e.g. a centralized trainer and a set of federated
parties) derive bitwise-identical initial states from one seed.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidShape, NotSPD

__all__ = [
    "KEY_TRANSFORM",
    "KEY_PSEUDO",
    "KEY_CONSENSUS",
    "KEY_ENCODER",
    "KEY_SHUFFLE",
    "KEY_DATA",
    "make_rng",
    "gaussian_init",
    "orthonormal_init",
    "row_l2_norms",
    "solve_spd",
]

# Stream labels (first element of the spawn key).  Keep these stable:
# reproducibility of every trainer in the package depends on them.
KEY_TRANSFORM = 0  # per-view transform matrices W_k
KEY_PSEUDO = 1  # per-view pseudo-label matrices
KEY_CONSENSUS = 2  # shared consensus matrix
KEY_ENCODER = 3  # sequence-encoder parameter vectors
KEY_SHUFFLE = 4  # minibatch shuffles
KEY_DATA = 5  # synthetic data generation


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a deterministic PCG64 generator for (seed, key).

    Distinct keys yield statistically independent streams; identical
    (seed, key) pairs always yield the same stream.
    """
    if seed < 0:
        raise InvalidShape(f"seed must be non-negative, got {seed}")
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key))
    )


def gaussian_init(rows: int, cols: int, seed: int, *key: int, scale: float = 1.0) -> np.ndarray:
    """Seeded standard-normal matrix scaled by `scale`."""
    if rows < 0 or cols < 0:
        raise InvalidShape(f"invalid shape ({rows}, {cols})")
    rng = make_rng(seed, *key)
    return scale * rng.standard_normal((rows, cols))


def orthonormal_init(n: int, c: int, seed: int, *key: int) -> np.ndarray:
    """Seeded n-by-c matrix Q with Q^T Q = I_c.

    Built as the QR factor of a seeded Gaussian matrix.  Column signs are
    fixed so the triangular factor has a non-negative diagonal, which
    removes the sign ambiguity of QR and keeps the output stable for a
    given seed.
    """
    if c < 1 or n < c:
        raise InvalidShape(f"need 1 <= c <= n, got n={n}, c={c}")
    rng = make_rng(seed, *key)
    g = rng.standard_normal((n, c))
    q, r = np.linalg.qr(g, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return np.ascontiguousarray(q * signs)


def row_l2_norms(m: np.ndarray) -> np.ndarray:
    """Euclidean norm of each row of a 2-D array."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got ndim={m.ndim}")
    return np.sqrt(np.einsum("ij,ij->i", m, m))


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive definite A via Cholesky.

    Parameters
    ----------
    a : (n, n) symmetric positive definite matrix.
    b : (n, m) right-hand side.

    Returns
    -------
    X : (n, m) solution with max-norm residual ``<= 1e-8 * (1 + max|B|)``.
        A single iterative-refinement pass (reusing the factorization)
        runs when the raw solve leaves a residual above 1e-10 relative,
        which keeps the bound comfortable for ill-conditioned inputs.

    Raises
    ------
    DimensionMismatch : shapes are incompatible.
    NotSPD : A is not symmetric within 1e-12 relative, or the
        factorization hits a non-positive pivot.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"A must be square, got shape {a.shape}")
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"B must be 2-D with {a.shape[0]} rows, got shape {b.shape}"
        )
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if a.size and float(np.max(np.abs(a - a.T))) > 1e-12 * scale:
        raise NotSPD("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPD(str(exc)) from exc
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    residual = b - a @ x
    b_scale = 1.0 + (float(np.max(np.abs(b))) if b.size else 0.0)
    if b.size and float(np.max(np.abs(residual))) > 1e-10 * b_scale:
        x = x + scipy.linalg.cho_solve(factor, residual, check_finite=False)
    return np.ascontiguousarray(x)
