"""Coefficient fields (sigma, b), their level function, and the built-in catalog.

A field packages the diffusion map sigma: R^d -> R^(d x m) and the drift map
b: R^d -> R^d together with the metadata the estimators need: a Lipschitz
bound, a tolerance for membership in the common zero set of (sigma, b), and
optional vectorized evaluators used by the batch engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError

# Base relative tolerance for declaring the level function "zero".
ZERO_TOL_BASE = 1e-12


@dataclass(frozen=True)
class CoefficientField:
    """Immutable coefficient pair with evaluation helpers.

    ``sigma(x)`` must return a (d, m) matrix and ``b(x)`` a d-vector for any
    finite d-vector ``x``.  ``lipschitz_k`` is a declared bound for the
    Lipschitz constants of both maps, or None when no honest global bound
    exists (the estimators then fall back to an empirical estimate).
    ``zero_tol`` is the absolute tolerance on the level function below which
    a state counts as being in the zero set; None means "resolve from the
    scenario start point" (see :func:`resolved_zero_tol`).

    ``abs_level_inverse`` is only set for 1-d fields whose level function is
    a symmetric increasing function of |x|; it maps a level value back to the
    corresponding |x| and enables the Brownian-bridge crossing correction.
    """

    d: int
    m: int
    sigma: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    lipschitz_k: float | None = None
    zero_tol: float | None = None
    name: str = "custom"
    sigma_batch: Callable[[np.ndarray], np.ndarray] | None = None
    b_batch: Callable[[np.ndarray], np.ndarray] | None = None
    abs_level_inverse: Callable[[float], float] | None = None
    catalog_ref: tuple[str, dict] | None = None

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise InvalidInputError("state and noise dimensions must be >= 1")
        if self.lipschitz_k is not None and self.lipschitz_k < 0:
            raise InvalidInputError("lipschitz_k must be nonnegative")
        if self.zero_tol is not None and self.zero_tol < 0:
            raise InvalidInputError("zero_tol must be nonnegative")


def frobenius_norm(mat) -> float:
    """Square root of the sum of squared matrix entries."""
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix has non-finite entries")
    return float(np.sqrt(np.sum(arr * arr)))


def _check_state(field: CoefficientField, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (field.d,):
        raise InvalidInputError(
            f"state has shape {arr.shape}, field expects ({field.d},)")
    return arr


def level(field: CoefficientField, x) -> float:
    """Squared coefficient magnitude ||sigma(x)||_F^2 + ||b(x)||^2."""
    arr = _check_state(field, x)
    sig = np.asarray(field.sigma(arr), dtype=float)
    if sig.shape != (field.d, field.m):
        raise InvalidInputError(
            f"sigma returned shape {sig.shape}, expected ({field.d}, {field.m})")
    drift = np.asarray(field.b(arr), dtype=float)
    if drift.shape != (field.d,):
        raise InvalidInputError(
            f"b returned shape {drift.shape}, expected ({field.d},)")
    return float(np.sum(sig * sig) + np.sum(drift * drift))


def sigma_batch(field: CoefficientField, states: np.ndarray) -> np.ndarray:
    """Evaluate sigma on an (n, d) block of states, returning (n, d, m)."""
    if field.sigma_batch is not None:
        return field.sigma_batch(states)
    return np.stack([np.asarray(field.sigma(x), dtype=float) for x in states])


def b_batch(field: CoefficientField, states: np.ndarray) -> np.ndarray:
    """Evaluate b on an (n, d) block of states, returning (n, d)."""
    if field.b_batch is not None:
        return field.b_batch(states)
    return np.stack([np.asarray(field.b(x), dtype=float) for x in states])


def level_batch(field: CoefficientField, states: np.ndarray) -> np.ndarray:
    """Level function on an (n, d) block of states."""
    sig = sigma_batch(field, states)
    drift = b_batch(field, states)
    return (np.einsum("ijk,ijk->i", sig, sig, optimize=False)
            + np.einsum("ij,ij->i", drift, drift, optimize=False))


def resolved_zero_tol(field: CoefficientField, start_level: float) -> float:
    """Absolute zero-set tolerance for a run starting at the given level.

    An explicit ``field.zero_tol`` wins; otherwise the tolerance scales with
    the starting level so that large-level scenarios do not spuriously absorb.
    """
    if field.zero_tol is not None:
        return field.zero_tol
    return ZERO_TOL_BASE * max(1.0, start_level)


def in_zero_set(field: CoefficientField, x, zero_tol: float | None = None) -> bool:
    """Whether the level at x is within tolerance of zero."""
    lev = level(field, x)
    tol = zero_tol if zero_tol is not None else resolved_zero_tol(field, lev)
    return lev <= tol


def estimate_lipschitz(field: CoefficientField, region, samples: int,
                       rng_seed: int, safety: float = 1.25) -> float:
    """Empirical Lipschitz bound from sampled difference quotients.

    Samples random pairs in the box ``region = (lo, hi)`` plus tightly spaced
    pairs (which probe local steepness), takes the largest difference
    quotient of sigma (Frobenius) and b (Euclidean), and inflates it by
    ``safety``.  Fields are treated as black boxes; no derivatives are used.
    """
    lo = np.asarray(region[0], dtype=float).reshape(field.d)
    hi = np.asarray(region[1], dtype=float).reshape(field.d)
    if not np.all(hi > lo):
        raise InvalidInputError("region must have positive volume in every dimension")
    if samples < 2:
        raise InvalidInputError("need at least 2 samples")
    rng = np.random.default_rng(rng_seed)
    span = hi - lo
    xs = lo + span * rng.uniform(size=(samples, field.d))
    ys = lo + span * rng.uniform(size=(samples, field.d))
    near = np.clip(xs + 1e-4 * span * rng.standard_normal(size=xs.shape), lo, hi)

    worst = 0.0
    for left, right in ((xs, ys), (xs, near)):
        dx = np.linalg.norm(left - right, axis=1)
        keep = dx > 0
        if not np.any(keep):
            continue
        ds = sigma_batch(field, left[keep]) - sigma_batch(field, right[keep])
        db = b_batch(field, left[keep]) - b_batch(field, right[keep])
        sig_quot = np.sqrt(np.einsum("ijk,ijk->i", ds, ds)) / dx[keep]
        b_quot = np.linalg.norm(db, axis=1) / dx[keep]
        worst = max(worst, float(np.max(sig_quot)), float(np.max(b_quot)))
    return safety * worst


# ---------------------------------------------------------------------------
# Built-in catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldCatalogEntry:
    name: str
    field: CoefficientField
    analytic_notes: str


def _linear_1d() -> CoefficientField:
    return CoefficientField(
        d=1, m=1,
        sigma=lambda x: x.reshape(1, 1),
        b=lambda x: np.zeros(1),
        lipschitz_k=1.0,
        name="linear-1d",
        sigma_batch=lambda X: X[:, :, None],
        b_batch=lambda X: np.zeros_like(X),
        abs_level_inverse=lambda ell: float(np.sqrt(ell)),
        catalog_ref=("linear-1d", {}),
    )


def _power_law_1d(alpha: float = 0.5,
                  lipschitz_k: float | None = None) -> CoefficientField:
    if alpha <= 0:
        raise InvalidInputError("alpha must be positive")
    if lipschitz_k is None and alpha == 1.0:
        lipschitz_k = 1.0
    return CoefficientField(
        d=1, m=1,
        sigma=lambda x: np.abs(x).reshape(1, 1) ** alpha,
        b=lambda x: np.zeros(1),
        lipschitz_k=lipschitz_k,
        name=f"power-law-1d(alpha={alpha})",
        sigma_batch=lambda X: (np.abs(X) ** alpha)[:, :, None],
        b_batch=lambda X: np.zeros_like(X),
        abs_level_inverse=lambda ell: float(ell ** (1.0 / (2.0 * alpha))),
        catalog_ref=("power-law-1d", {"alpha": alpha, "lipschitz_k": lipschitz_k}),
    )


def _diag_linear(d: int = 2) -> CoefficientField:
    d = int(d)
    if d < 1:
        raise InvalidInputError("d must be >= 1")
    idx = np.arange(d)

    def sig_one(x):
        return np.diag(x)

    def sig_many(X):
        out = np.zeros((X.shape[0], d, d))
        out[:, idx, idx] = X
        return out

    return CoefficientField(
        d=d, m=d,
        sigma=sig_one,
        b=lambda x: -x,
        lipschitz_k=1.0,
        name=f"diag-linear(d={d})",
        sigma_batch=sig_many,
        b_batch=lambda X: -X,
        catalog_ref=("diag-linear", {"d": d}),
    )


def _constant(sigma0=1.0, b0=0.0) -> CoefficientField:
    sig0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    d, m = sig0.shape
    bb0 = np.asarray(b0, dtype=float).reshape(-1)
    if bb0.size == 1 and d > 1:
        bb0 = np.full(d, float(bb0[0]))
    if bb0.shape != (d,):
        raise InvalidInputError(f"b0 has shape {bb0.shape}, expected ({d},)")
    return CoefficientField(
        d=d, m=m,
        sigma=lambda x: sig0,
        b=lambda x: bb0,
        lipschitz_k=0.0,
        name="constant",
        sigma_batch=lambda X: np.broadcast_to(sig0, (X.shape[0], d, m)),
        b_batch=lambda X: np.broadcast_to(bb0, (X.shape[0], d)),
        catalog_ref=("constant", {"sigma0": sig0.tolist(), "b0": bb0.tolist()}),
    )


def _decay_1d(rate: float = 1.0) -> CoefficientField:
    if rate <= 0:
        raise InvalidInputError("rate must be positive")
    return CoefficientField(
        d=1, m=1,
        sigma=lambda x: np.zeros((1, 1)),
        b=lambda x: -rate * x,
        lipschitz_k=rate,
        name=f"decay-1d(rate={rate})",
        sigma_batch=lambda X: np.zeros((X.shape[0], 1, 1)),
        b_batch=lambda X: -rate * X,
        catalog_ref=("decay-1d", {"rate": rate}),
    )


_BUILDERS: dict[str, Callable[..., CoefficientField]] = {
    "linear-1d": _linear_1d,
    "power-law-1d": _power_law_1d,
    "diag-linear": _diag_linear,
    "constant": _constant,
    "decay-1d": _decay_1d,
}

_NOTES = {
    "linear-1d": ("dX = X dB with zero drift; exact solution "
                  "x*exp(B_t - t/2); Lipschitz constant 1; level(x) = x^2; "
                  "zero set {0}."),
    "power-law-1d": ("sigma(y) = |y|^alpha (0 at y = 0), zero drift; "
                     "level |y|^(2 alpha); zero set {0}. Not Lipschitz near 0 "
                     "for alpha < 1 and unbounded slope at infinity for "
                     "alpha > 1: a counterexample family. The origin is "
                     "reachable iff alpha < 1 by the 1-d integral test."),
    "diag-linear": ("sigma(x) = diag(x), b(x) = -x; componentwise "
                    "dX_i = -X_i dt + X_i dB_i; Lipschitz constant 1; "
                    "level 2*|x|^2; zero set {0}."),
    "constant": ("sigma and b constant; level constant; zero set empty "
                 "unless both vanish; Lipschitz constant 0."),
    "decay-1d": ("Deterministic exponential decay: sigma = 0, b(x) = "
                 "-rate*x; level rate^2*x^2 halves every ln(2)/(2*rate); "
                 "Lipschitz constant rate; zero set {0}."),
}


def make_field(name: str, **params) -> CoefficientField:
    """Build a catalog field by name with numeric parameters."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown field {name!r}; catalog: {sorted(_BUILDERS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for field {name!r}: {exc}") from None


def catalog() -> list[FieldCatalogEntry]:
    """Default-parameter instance of every built-in field, with notes."""
    return [FieldCatalogEntry(name, make_field(name), _NOTES[name])
            for name in sorted(_BUILDERS)]
