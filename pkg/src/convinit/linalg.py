"""Dense linear algebra and normalization primitives.

All public operations take and return 2-D float64 ``numpy`` arrays, validate
their inputs, and are pure functions: no shared mutable state, safe to call
from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64, derive_seed

# Start-vector seed for the spectral power iteration. Fixed so estimates are
# reproducible without threading a seed through every caller.
_SPECTRUM_SEED = 0x5EED0F5EC7A11


class ShapeError(ValueError):
    """Raised when operand dimensions are incompatible."""


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    return a


def ensure_finite(x: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.isfinite(x).all():
        raise ValueError(f"{name} contains non-finite entries")
    return x


@dataclass(frozen=True)
class SingularSpectrumEstimate:
    """Largest-singular-value estimate plus the squared Frobenius mass.

    ``sigma_max`` comes from a Rayleigh quotient, so ``sigma_max**2`` never
    exceeds ``frobenius_sq`` (up to roundoff).
    """

    sigma_max: float
    frobenius_sq: float
    iterations_used: int


def matmul(a, b) -> np.ndarray:
    """Exact double-precision matrix product."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree, {a.shape[0]}x{a.shape[1]} "
            f"times {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction.

    Output rows are strictly positive and sum to 1; the max subtraction keeps
    the exponentials bounded so the operation is total on finite input.
    """
    x = ensure_finite(as_matrix(logits, "logits"), "logits")
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def layer_norm_rows(x, epsilon: float = 1e-5) -> np.ndarray:
    """Normalize each row to mean 0, variance 1 (population variance).

    No learned affine: gain 1, bias 0. ``epsilon`` sits inside the square
    root as a variance floor.
    """
    a = ensure_finite(as_matrix(x), "input")
    if a.shape[1] < 2:
        raise ShapeError("layer norm needs at least 2 columns per row")
    mean = a.mean(axis=1, keepdims=True)
    var = a.var(axis=1, keepdims=True)
    return (a - mean) / np.sqrt(var + epsilon)


def singular_spectrum(x, max_iter: int = 1000, tol: float = 1e-10) -> SingularSpectrumEstimate:
    """Estimate the top singular value by power iteration on the Gram matrix.

    Iterates v <- normalize(x^T x v) with a deterministic seed-derived start
    vector and stops when the Rayleigh quotient settles to within ``tol``
    (relative for quotients above 1).
    """
    a = ensure_finite(as_matrix(x), "input")
    if not np.any(a):
        raise ValueError("singular spectrum undefined for the zero matrix")
    gram = a.T @ a
    d = gram.shape[0]
    rng = SplitMix64(derive_seed(_SPECTRUM_SEED, a.shape[0], a.shape[1]))

    v = rng.normal_array(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    used = 0
    for it in range(1, max_iter + 1):
        w = gram @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # start vector fell in the nullspace; redraw and keep going
            v = rng.normal_array(d)
            v /= np.linalg.norm(v)
            continue
        lam_new = float(v @ w)
        v = w / norm_w
        used = it
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new

    sigma_max = np.sqrt(max(lam, 0.0))
    return SingularSpectrumEstimate(
        sigma_max=float(sigma_max),
        frobenius_sq=float((a * a).sum()),
        iterations_used=used,
    )


def stable_rank(x, max_iter: int = 1000, tol: float = 1e-10) -> float:
    """Squared Frobenius norm over the squared top singular value.

    A smooth lower bound on algebraic rank; always at least 1 and at most
    min(rows, cols) up to the power-iteration tolerance.
    """
    a = as_matrix(x)
    if not np.any(a):
        raise ValueError("stable rank undefined for the zero matrix")
    est = singular_spectrum(a, max_iter=max_iter, tol=tol)
    return est.frobenius_sq / (est.sigma_max * est.sigma_max)
