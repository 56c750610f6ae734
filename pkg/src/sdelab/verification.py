"""Monte Carlo estimators and closed-form constants for the quantitative checks.

Every checker estimates the left-hand side of one inequality by Monte Carlo
and compares a confidence bound against the analytic right-hand side, so
sampling noise cannot produce spurious failures: upper bounds are violated
only when the CI-lower of the estimate exceeds the bound, lower bounds only
when the CI-upper falls short.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import integrate, stats

from . import coefficients as cf
from .coefficients import CoefficientField
from .engine import (Barrier, DEFAULT_CHUNK, StepPolicy, entropy_tuple,
                     iter_chunks, map_path_chunks, path_entropy,
                     register_kernel, sweep_paths)
from .errors import InvalidInputError

# Fitted strong-convergence exponent the engine is expected to reproduce.
STRONG_ORDER_WINDOW = (0.35, 0.65)


# ---------------------------------------------------------------------------
# Closed-form constants
# ---------------------------------------------------------------------------

def escape_rate_constant(noise_dim: int, lipschitz_bound: float) -> float:
    """Constant C with P[band exit by time t] <= C sqrt(t) for t <= 1.

    C = 4 sqrt(6) K sqrt(m+1); it depends only on the noise dimension and the
    Lipschitz bound, not on the band level or depth.
    """
    if noise_dim < 1:
        raise InvalidInputError("noise_dim must be >= 1")
    if lipschitz_bound < 0:
        raise InvalidInputError("lipschitz_bound must be nonnegative")
    return 4.0 * math.sqrt(6.0) * lipschitz_bound * math.sqrt(noise_dim + 1.0)


def escape_rate_product(band_level: float, band_index: int, t: float,
                        noise_dim: int, lipschitz_bound: float) -> float:
    """Band-specific escape bound before simplification.

    (2^(k+1)/A) * 2 (3A/2^k)^(1/2) * K * sqrt((m+1) (A/2^(k-1)) t); dividing
    by sqrt(t) must reproduce :func:`escape_rate_constant` for every
    (A, k, t).  Kept unsimplified on purpose as the independent route.
    """
    a, k = band_level, band_index
    return ((2.0 ** (k + 1) / a)
            * 2.0 * math.sqrt(3.0 * a / 2.0 ** k)
            * lipschitz_bound
            * math.sqrt((noise_dim + 1.0) * (a / 2.0 ** (k - 1)) * t))


def persistence_window(c: float) -> float:
    """Largest capped time window t0 in (0, 1) with C sqrt(t0) <= 1/2.

    Returns min(1/(4 C^2), 1/2), nudged down by ulps if needed so the
    defining inequality holds exactly in floating point.
    """
    if c < 0:
        raise InvalidInputError("constant must be nonnegative")
    if c == 0:
        return 0.5
    t0 = min(1.0 / (4.0 * c * c), 0.5)
    while c * math.sqrt(t0) > 0.5:
        t0 = math.nextafter(t0, 0.0)
    return t0


def default_escape_time_grid(c: float) -> list[float]:
    """Geometric grid t0 * 2^j clipped to the informative range (C sqrt(t) < 1)."""
    t0 = persistence_window(c)
    cap = 1.0 if c == 0 else min(1.0, 1.0 / (c * c))
    return [t0 * 2.0 ** j for j in range(-3, 2) if t0 * 2.0 ** j < cap]


# ---------------------------------------------------------------------------
# Estimates with confidence intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    ci_low: float
    ci_high: float
    n: int
    method: str
    censored_n: int = 0

    def __post_init__(self):
        for name in ("point", "ci_low", "ci_high"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("n", "censored_n"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if not (self.ci_low <= self.point + 1e-12
                and self.point <= self.ci_high + 1e-12):
            raise InvalidInputError("confidence interval does not bracket point")

    def to_dict(self) -> dict:
        return {"point": self.point, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "n": self.n,
                "censored_n": self.censored_n, "method": self.method}


def estimate_with_ci(successes: int, n: int, method: str = "wilson",
                     confidence: float = 0.95,
                     censored_n: int = 0) -> EstimateWithCI:
    """Binomial proportion estimate with a two-sided confidence interval.

    Wilson by default; Clopper-Pearson on request; the normal approximation
    is refused unless n * p * (1-p) >= 10.
    """
    if n < 1 or successes < 0 or successes > n:
        raise InvalidInputError(f"invalid counts: {successes}/{n}")
    p_hat = successes / n
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    if method == "wilson":
        denom = 1.0 + z * z / n
        center = (p_hat + z * z / (2.0 * n)) / denom
        half = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / n
                                       + z * z / (4.0 * n * n))
        low, high = center - half, center + half
    elif method == "clopper-pearson":
        alpha = 1.0 - confidence
        low = 0.0 if successes == 0 else float(
            stats.beta.ppf(alpha / 2.0, successes, n - successes + 1))
        high = 1.0 if successes == n else float(
            stats.beta.ppf(1.0 - alpha / 2.0, successes + 1, n - successes))
    elif method == "normal":
        if n * p_hat * (1.0 - p_hat) < 10.0:
            raise InvalidInputError(
                "normal approximation needs n p (1-p) >= 10; use wilson")
        half = z * math.sqrt(p_hat * (1.0 - p_hat) / n)
        low, high = p_hat - half, p_hat + half
    else:
        raise InvalidInputError(f"unknown CI method {method!r}")
    low = min(max(low, 0.0), p_hat)
    high = max(min(high, 1.0), p_hat)
    return EstimateWithCI(p_hat, low, high, n, method, censored_n)


def _mean_with_ci(total: float, total_sq: float, n: int, censored_n: int,
                  confidence: float) -> EstimateWithCI:
    """Normal-theory CI for a sample mean from accumulated moments."""
    if n < 2:
        raise InvalidInputError("need at least 2 samples for a mean CI")
    mean = total / n
    var = max(total_sq - n * mean * mean, 0.0) / (n - 1)
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    half = z * math.sqrt(var / n)
    return EstimateWithCI(mean, mean - half, mean + half, n, "normal",
                          censored_n)


@dataclass
class BoundCheckReport:
    """One estimated quantity against one analytic bound.

    ``direction`` is 'upper' when the estimate must stay below the bound
    (checked via CI-lower) and 'lower' when it must stay above (via
    CI-upper).  ``satisfied`` and ``slack`` are always recomputed.
    """

    bound_name: str
    lhs_estimate: EstimateWithCI
    rhs_value: float
    direction: str = "upper"
    parameters: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.rhs_value = float(self.rhs_value)

    @property
    def satisfied(self) -> bool:
        if self.direction == "upper":
            return bool(self.lhs_estimate.ci_low <= self.rhs_value)
        return bool(self.lhs_estimate.ci_high >= self.rhs_value)

    @property
    def slack(self) -> float:
        return float(self.rhs_value - self.lhs_estimate.point)

    def to_json_dict(self) -> dict:
        return {"bound_name": self.bound_name,
                "parameters": self.parameters,
                "lhs": self.lhs_estimate.to_dict(),
                "rhs": self.rhs_value,
                "direction": self.direction,
                "satisfied": self.satisfied,
                "slack": self.slack}


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _resolve_bridge(field: CoefficientField, flag) -> bool:
    if flag == "auto":
        return field.d == 1 and field.abs_level_inverse is not None
    return bool(flag)

def _require_k(field: CoefficientField, override) -> float:
    k = override if override is not None else field.lipschitz_k
    if k is None:
        raise InvalidInputError(
            "no Lipschitz bound available: declare one on the field, pass "
            "lipschitz_k explicitly, or estimate one with estimate_lipschitz")
    return float(k)


def _check_band_start(field: CoefficientField, x, band_level: float,
                      band_index: int) -> float:
    if band_level <= 0:
        raise InvalidInputError("band_level must be positive")
    if band_index < 1:
        raise InvalidInputError("band_index must be >= 1")
    target = band_level / 2.0 ** band_index
    lev = cf.level(field, x)
    if abs(lev - target) > 0.05 * target:
        raise InvalidInputError(
            f"start level {lev:g} is not {target:g} within 5% tolerance")
    return lev


def _policy_dict(policy: StepPolicy) -> dict:
    return {"kind": policy.kind, "h_max": policy.h_max, "h_min": policy.h_min,
            "level_fraction": policy.level_fraction}


# ---------------------------------------------------------------------------
# Parallel kernels
# ---------------------------------------------------------------------------

def _band_barriers(band_level: float, band_index: int):
    return (Barrier(band_level / 2.0 ** (band_index + 1), "down"),
            Barrier(band_level / 2.0 ** (band_index - 1), "up"))


def _kernel_escape_times(field, indices, p):
    res = sweep_paths(field, p["start"], p["horizon"], p["policy"],
                      [path_entropy(p["master"], i) for i in indices],
                      indices=indices,
                      barriers=_band_barriers(p["A"], p["k"]),
                      stop_mode="first", bridge=p["bridge"])
    return res.first_time


def _kernel_band_functionals(field, indices, p):
    res = sweep_paths(field, p["start"], 1.0, p["policy"],
                      [path_entropy(p["master"], i) for i in indices],
                      indices=indices,
                      barriers=_band_barriers(p["A"], p["k"]),
                      stop_mode="first", capture_time=p["t"],
                      bridge=p["bridge"])
    x = np.asarray(p["start"], dtype=float)
    exited = res.first_barrier >= 0
    before_t = exited & (res.first_time <= p["t"])
    after_t = exited & ~before_t
    states = np.where(before_t[:, None], res.first_state, res.capture_state)
    lev_x = cf.level(field, x)
    n = len(indices)
    v = np.zeros(n)
    w = np.zeros(n)
    if np.any(exited):
        diff = states[exited] - x
        v[exited] = np.einsum("ij,ij->i", diff, diff)
        w[exited] = np.abs(lev_x - cf.level_batch(field, states[exited]))
    if np.any(after_t) and not res.captured[after_t].all():
        raise RuntimeError("band exit after capture time without captured state")
    return (float(np.sum(v)), float(np.sum(v * v)),
            float(np.sum(w)), float(np.sum(w * w)),
            int(np.sum(~exited)), n)


def _kernel_persistence(field, indices, p):
    res = sweep_paths(field, p["start"], p["t0"], p["policy"],
                      [path_entropy(p["master"], i) for i in indices],
                      indices=indices,
                      barriers=(Barrier(p["barrier"], "down"),),
                      stop_mode="first", bridge=p["bridge"])
    survived = res.first_barrier < 0
    return int(np.sum(survived)), len(indices)


def _kernel_hitting_min(field, indices, p):
    eps_grid = np.asarray(p["eps_grid"])
    res = sweep_paths(field, p["start"], p["horizon"], p["policy"],
                      [path_entropy(p["master"], i) for i in indices],
                      indices=indices,
                      min_level_retire=float(eps_grid.min()),
                      on_blowup="retire")
    counts = np.array([(res.min_levels <= e).sum() for e in eps_grid],
                      dtype=np.int64)
    return counts, int(np.sum(res.blown_up)), len(indices)


def _kernel_strong_error(field, indices, p):
    res = sweep_paths(field, p["start"], p["horizon"],
                      StepPolicy.fixed(p["h"]),
                      [path_entropy(p["master"], i) for i in indices],
                      indices=indices, track_noise_sum=True)
    x0 = p["start"][0]
    exact = x0 * np.exp(-0.5 * p["horizon"] + res.noise_sum[:, 0])
    err = np.abs(res.end_states[:, 0] - exact)
    return float(np.sum(err)), len(indices)


register_kernel("escape_times", _kernel_escape_times)
register_kernel("band_functionals", _kernel_band_functionals)
register_kernel("persistence", _kernel_persistence)
register_kernel("hitting_min", _kernel_hitting_min)
register_kernel("strong_error", _kernel_strong_error)


# ---------------------------------------------------------------------------
# Bound checkers
# ---------------------------------------------------------------------------

def _band_moments(field, x, band_level, band_index, t, n_paths, policy, seed,
                  bridge, workers):
    if not (0.0 < t <= 1.0):
        raise InvalidInputError("t must lie in (0, 1]")
    if n_paths < 2:
        raise InvalidInputError("need at least 2 paths")
    _check_band_start(field, x, band_level, band_index)
    params = {"start": np.asarray(x, dtype=float), "A": band_level,
              "k": band_index, "t": t, "policy": policy, "master": seed,
              "bridge": _resolve_bridge(field, bridge)}
    partials = map_path_chunks("band_functionals", field,
                               iter_chunks(n_paths), params, workers)
    sv = sv2 = sw = sw2 = 0.0
    cens = n = 0
    for pv, pv2, pw, pw2, pc, pn in partials:
        sv += pv
        sv2 += pv2
        sw += pw
        sw2 += pw2
        cens += pc
        n += pn
    return sv, sv2, sw, sw2, cens, n, params["bridge"]


def check_displacement_bound(field: CoefficientField, x, band_level: float,
                             band_index: int, t: float, n_paths: int,
                             policy: StepPolicy, seed, *,
                             bridge="auto", workers: int = 1,
                             confidence: float = 0.95) -> BoundCheckReport:
    """Second moment of the stopped displacement against (m+1) (A/2^(k-1)) t.

    Estimates E[|x - X(t ^ S)|^2 ; S <= 1] where S is the band exit time;
    paths still inside the band at time 1 contribute zero and are counted as
    censored.
    """
    sv, sv2, _, _, cens, n, used_bridge = _band_moments(
        field, x, band_level, band_index, t, n_paths, policy, seed, bridge,
        workers)
    lhs = _mean_with_ci(sv, sv2, n, cens, confidence)
    rhs = (field.m + 1.0) * (band_level / 2.0 ** (band_index - 1)) * t
    params = {"A": band_level, "k": band_index, "t": t, "m": field.m,
              "d": field.d, "field": field.name, "n_paths": n,
              "seed": list(entropy_tuple(seed)),
              "policy": _policy_dict(policy), "bridge": used_bridge}
    return BoundCheckReport("displacement", lhs, rhs, "upper", params)


def check_level_change_bound(field: CoefficientField, x, band_level: float,
                             band_index: int, t: float, n_paths: int,
                             policy: StepPolicy, seed, *,
                             lipschitz_k: float | None = None,
                             bridge="auto", workers: int = 1,
                             confidence: float = 0.95) -> BoundCheckReport:
    """Mean absolute level change against the Lipschitz chain bound.

    Estimates E[|level(x) - level(X(t ^ S))| ; S <= 1] and compares it with
    2 (3 A/2^k)^(1/2) K sqrt(displacement estimate), taking the CI-upper of
    the displacement so both sides are noise-aware.  Fields violating the
    declared Lipschitz bound can and should fail this check.
    """
    k_bound = _require_k(field, lipschitz_k)
    sv, sv2, sw, sw2, cens, n, used_bridge = _band_moments(
        field, x, band_level, band_index, t, n_paths, policy, seed, bridge,
        workers)
    lhs = _mean_with_ci(sw, sw2, n, cens, confidence)
    disp = _mean_with_ci(sv, sv2, n, cens, confidence)
    rhs = (2.0 * math.sqrt(3.0 * band_level / 2.0 ** band_index)
           * k_bound * math.sqrt(max(disp.ci_high, 0.0)))
    params = {"A": band_level, "k": band_index, "t": t, "m": field.m,
              "K": k_bound, "field": field.name, "n_paths": n,
              "policy": _policy_dict(policy), "bridge": used_bridge,
              "displacement": disp.to_dict()}
    return BoundCheckReport("level-change", lhs, rhs, "upper", params)


def check_escape_probability_bound(field: CoefficientField, x,
                                   band_level: float, band_index: int,
                                   t_grid, n_paths: int, policy: StepPolicy,
                                   seed, *, lipschitz_k: float | None = None,
                                   bridge="auto", workers: int = 1,
                                   confidence: float = 0.95
                                   ) -> list[BoundCheckReport]:
    """P[band exit by t] against C sqrt(t) for each t in the grid.

    Times with C sqrt(t) >= 1 are vacuous (any probability satisfies them)
    and are flagged as non-informative in the report parameters.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise InvalidInputError("t_grid must be nonempty")
    if any(not (0.0 < t <= 1.0) for t in t_grid):
        raise InvalidInputError("every t must lie in (0, 1]")
    _check_band_start(field, x, band_level, band_index)
    k_bound = _require_k(field, lipschitz_k)
    c = escape_rate_constant(field.m, k_bound)
    params = {"start": np.asarray(x, dtype=float), "A": band_level,
              "k": band_index, "horizon": max(t_grid), "policy": policy,
              "master": seed, "bridge": _resolve_bridge(field, bridge)}
    partials = map_path_chunks("escape_times", field, iter_chunks(n_paths),
                               params, workers)
    reports = []
    for t in t_grid:
        successes = 0
        censored = 0
        n = 0
        for first_time in partials:
            ok = ~np.isnan(first_time)
            successes += int(np.sum(first_time[ok] <= t))
            censored += int(np.sum(~ok))
            n += first_time.size
        est = estimate_with_ci(successes, n, "wilson", confidence,
                               censored_n=censored)
        rhs = c * math.sqrt(t)
        rep_params = {"A": band_level, "k": band_index, "t": t,
                      "m": field.m, "K": k_bound, "C": c,
                      "informative": rhs < 1.0, "field": field.name,
                      "n_paths": n, "policy": _policy_dict(policy),
                      "bridge": params["bridge"]}
        reports.append(BoundCheckReport("escape-probability", est, rhs,
                                        "upper", rep_params))
    return reports


def fitted_escape_exponent(reports: list[BoundCheckReport]) -> float | None:
    """Slope of log estimate vs log t over reports with nondegenerate estimates.

    Diagnostic only: the bound gives a sqrt(t) upper envelope, so a fitted
    slope far below 1/2 would be suspicious.  Returns None with fewer than
    two usable points.
    """
    ts, ps = [], []
    for rep in reports:
        p = rep.lhs_estimate.point
        if 0.0 < p < 1.0:
            ts.append(rep.parameters["t"])
            ps.append(p)
    if len(ts) < 2:
        return None
    slope = np.polyfit(np.log(ts), np.log(ps), 1)[0]
    return float(slope)


def check_halving_persistence(field: CoefficientField, starts,
                              band_level: float, band_index: int,
                              n_paths: int, policy: StepPolicy, seed, *,
                              t0: float | None = None,
                              lipschitz_k: float | None = None,
                              bridge="auto", workers: int = 1,
                              confidence: float = 0.95) -> BoundCheckReport:
    """P[level does not halve within t0] against the 1/2 lower bound.

    Start points must have level >= band_level / 2**band_index; paths are
    assigned to starts round-robin.  The barrier is the next halved level
    band_level / 2**(band_index+1).
    """
    if band_level <= 0 or band_index < 1:
        raise InvalidInputError("need band_level > 0 and band_index >= 1")
    floor_level = band_level / 2.0 ** band_index
    barrier = band_level / 2.0 ** (band_index + 1)
    starts = [np.asarray(s, dtype=float) for s in starts]
    valid = [s for s in starts if cf.level(field, s) >= floor_level * (1 - 1e-12)]
    dropped = len(starts) - len(valid)
    if not valid:
        raise InvalidInputError("no start points with level >= A/2^k")
    if t0 is None:
        t0 = persistence_window(
            escape_rate_constant(field.m, _require_k(field, lipschitz_k)))
    if not (0.0 < t0 < 1.0):
        raise InvalidInputError("t0 must lie in (0, 1)")
    use_bridge = _resolve_bridge(field, bridge)
    survived = 0
    n = 0
    for s_idx, start in enumerate(valid):
        idx = np.arange(s_idx, n_paths, len(valid))
        if idx.size == 0:
            continue
        chunks = [idx[lo:lo + DEFAULT_CHUNK]
                  for lo in range(0, idx.size, DEFAULT_CHUNK)]
        params = {"start": start, "t0": t0, "barrier": barrier,
                  "policy": policy, "master": seed, "bridge": use_bridge}
        for part_survived, part_n in map_path_chunks(
                "persistence", field, chunks, params, workers):
            survived += part_survived
            n += part_n
    est = estimate_with_ci(survived, n, "wilson", confidence,
                           censored_n=survived)
    params = {"A": band_level, "k": band_index, "t0": t0, "m": field.m,
              "field": field.name, "n_paths": n, "n_starts": len(valid),
              "dropped_starts": dropped, "policy": _policy_dict(policy),
              "bridge": use_bridge}
    return BoundCheckReport("halving-persistence", est, 0.5, "lower", params)


# ---------------------------------------------------------------------------
# Zero-set hitting and the 1-d accessibility integral
# ---------------------------------------------------------------------------

def estimate_zero_hitting(field: CoefficientField, start, horizon: float,
                          eps_grid, n_paths: int, policy: StepPolicy, seed, *,
                          workers: int = 1, confidence: float = 0.95,
                          method: str = "wilson") -> list[EstimateWithCI]:
    """P[grid-minimum of the level drops to eps within the horizon], per eps.

    eps_grid must be strictly decreasing and positive; the estimates are then
    nonincreasing by construction.  Paths whose state leaves the trusted
    numeric range are retired with their minimum so far (the instability of
    explicit stepping for superlinear coefficients cannot push the recorded
    minimum down).
    """
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid or any(e <= 0 for e in eps_grid):
        raise InvalidInputError("eps_grid must be positive")
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise InvalidInputError("eps_grid must be strictly decreasing")
    start = np.asarray(start, dtype=float)
    lev0 = cf.level(field, start)
    if lev0 <= cf.resolved_zero_tol(field, lev0):
        raise InvalidInputError("start point lies in the zero set")
    params = {"start": start, "horizon": horizon, "policy": policy,
              "master": seed, "eps_grid": eps_grid}
    partials = map_path_chunks("hitting_min", field, iter_chunks(n_paths),
                               params, workers)
    counts = np.zeros(len(eps_grid), dtype=np.int64)
    blown = 0
    n = 0
    for pc, pb, pn in partials:
        counts += pc
        blown += pb
        n += pn
    return [estimate_with_ci(int(c), n, method, confidence,
                             censored_n=int(n - c))
            for c in counts]


@dataclass(frozen=True)
class IntegralVerdict:
    """Outcome of the improper-integral accessibility test."""

    kind: str                  # "finite" | "divergent"
    value: float | None = None
    error: float | None = None
    windows: int = 0

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"


def accessibility_integral_1d(sigma_1d, a: float, *,
                              trend_windows: int = 12,
                              max_windows: int = 400,
                              rel_tol: float = 1e-9) -> IntegralVerdict:
    """Classify the integral of y / sigma(y)^2 over (0, a] near the origin.

    Integrates over dyadic windows [a/2^(j+1), a/2^j] by adaptive quadrature.
    If the window sums keep geometric decay, the tail is summed from the
    decay ratio and the integral is declared finite; if the last
    ``trend_windows`` windows show no geometric decay, the partial sums grow
    without it and the integral is declared divergent.  The origin is then
    reachable for the driftless 1-d equation exactly in the finite case.
    """
    if a <= 0:
        raise InvalidInputError("a must be positive")
    if trend_windows < 2:
        raise InvalidInputError("trend_windows must be >= 2")

    def integrand(y):
        s = sigma_1d(y)
        return y / (s * s)

    winsums: list[float] = []
    quad_err = 0.0
    total = 0.0
    decay_threshold = 1.0 - 1e-3
    for j in range(max_windows):
        hi = a / 2.0 ** j
        lo = a / 2.0 ** (j + 1)
        for y in (lo, 0.5 * (lo + hi), hi):
            s = sigma_1d(y)
            if s == 0:
                raise InvalidInputError(f"sigma vanishes at y={y:g} inside (0, a]")
            if not np.isfinite(s):
                raise InvalidInputError(f"sigma non-finite at y={y:g}")
        val, err = integrate.quad(integrand, lo, hi, limit=200)
        winsums.append(val)
        quad_err += err
        total += val
        if len(winsums) <= trend_windows:
            continue
        recent = winsums[-trend_windows:]
        prev = winsums[-trend_windows - 1:-1]
        ratios = [r / q if q != 0 else np.inf for r, q in zip(recent, prev)]
        if all(q == 0 for q in recent):
            return IntegralVerdict("finite", total, quad_err, j + 1)
        if all(r >= decay_threshold for r in ratios):
            return IntegralVerdict("divergent", None, None, j + 1)
        rbar = max(ratios)
        if rbar < decay_threshold:
            tail = winsums[-1] * rbar / (1.0 - rbar)
            if tail <= rel_tol * max(abs(total), 1e-300) + 1e-300:
                return IntegralVerdict("finite", total + tail,
                                       quad_err + 0.25 * tail, j + 1)
    # undecided after max_windows: fall back to the trend of the last windows
    if winsums[-2] == 0 or winsums[-3] == 0:
        return IntegralVerdict("finite", total, quad_err, max_windows)
    rbar = max(winsums[-1] / winsums[-2], winsums[-2] / winsums[-3])
    if rbar >= decay_threshold:
        return IntegralVerdict("divergent", None, None, max_windows)
    tail = winsums[-1] * rbar / (1.0 - rbar)
    return IntegralVerdict("finite", total + tail, quad_err + tail,
                           max_windows)


# ---------------------------------------------------------------------------
# Engine validation
# ---------------------------------------------------------------------------

def strong_order_study(n_paths: int = 2000, h_exponents=range(4, 11),
                       horizon: float = 1.0, start_x: float = 1.0,
                       master_seed=0, workers: int = 1) -> dict:
    """Strong error of the stepper against the exact linear-field solution.

    For each h = 2^-e the Euler paths and the closed form
    x exp(B_T - T/2) are built from the same increments; the fitted slope of
    log error vs log h should land in STRONG_ORDER_WINDOW.
    """
    field = cf.make_field("linear-1d")
    start = np.array([start_x])
    hs, errs = [], []
    for e in h_exponents:
        h = 2.0 ** (-e)
        params = {"start": start, "horizon": horizon, "h": h,
                  "master": (*entropy_tuple(master_seed), e)}
        total = 0.0
        n = 0
        for ps, pn in map_path_chunks("strong_error", field,
                                      iter_chunks(n_paths), params, workers):
            total += ps
            n += pn
        hs.append(h)
        errs.append(total / n)
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    low, high = STRONG_ORDER_WINDOW
    return {"h_grid": hs, "strong_errors": errs, "slope": slope,
            "n_paths": n_paths, "slope_window": [low, high],
            "satisfied": bool(low <= slope <= high)}
