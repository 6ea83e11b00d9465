"""Monte Carlo experiment harness: distortion decay sweeps, consistency
width sweeps, concentration checks, deterministic counterexamples, and the
exact binomial/Stirling combinatorics.

Every trial consumes a seed derived from (master_seed, m-index, trial), so
results are bit-identical regardless of worker count.
"""

from __future__ import annotations

import io
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ensembles import (
    SQRT_2_OVER_PI,
    Ensemble,
    InvalidArgument,
    binomial_mad,
    binomial_mad_de_moivre,
    mu_sg_exact_binomial,
    sample_iid,
    sample_matrix,
)
from .distances import soft_count_array
from .geometry import (
    FiniteSet,
    LowRankBall,
    SetSpec,
    SparseBall,
    anti_sparsity_level,
    diameter,
    sample_point,
)
from .quantizer import QuantizedMap, QuantizerConfig, apply_many, make_map

MAD_GAP_CONST = 1.0 / 7.0


class SetFilterError(RuntimeError):
    """The anti-sparsity filter rejected every sampled pair."""


class InsufficientData(RuntimeError):
    """Too few usable points for a fit."""


@dataclass(frozen=True)
class TrialPlan:
    set_spec: SetSpec
    ensemble: Ensemble
    delta: float
    m_grid: Sequence[int]
    pairs_per_m: int
    trials_per_m: int
    k0: float
    master_seed: int
    n_override: Optional[int] = None  # ambient dim if the set does not fix it

    def __post_init__(self):
        grid = list(self.m_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidArgument("m_grid must be strictly increasing")
        if self.pairs_per_m < 1 or self.trials_per_m < 1:
            raise InvalidArgument("pairs_per_m and trials_per_m must be >= 1")
        if not (self.delta > 0):
            raise InvalidArgument("delta must be positive")
        if self.k0 < 0:
            raise InvalidArgument("k0 must be nonnegative (0 disables the filter)")


@dataclass(frozen=True)
class TrialRow:
    experiment: str
    m: int
    trial: int
    statistic: float
    censored: bool
    seed: int


@dataclass
class PerMStats:
    m: int
    worst: float
    q90: float
    q99: float
    n_values: int
    n_censored: int


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[TrialRow]
    per_m: list[PerMStats]
    slope: Optional[float]
    slope_stderr: Optional[float]
    verdict: Optional[bool]
    master_seed: int
    censored_total: int = 0
    detail: dict = field(default_factory=dict)


def task_seed(master_seed: int, m_index: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(m_index, trial))


def as_seedseq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def seed_fingerprint(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def _run_tasks(task_args, fn, jobs: int):
    """Run fn over task_args; output order fixed by input order, not workers."""
    if jobs <= 1:
        return [fn(*args) for args in task_args]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda args: fn(*args), task_args))


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """OLS slope and stderr of log(statistic) against log(m)."""
    pts = [(m, s) for m, s in points if s > 0]
    if len(pts) < 3:
        raise InsufficientData(f"need >= 3 positive points, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    resid = y - (ym + slope * (x - xm))
    sigma2 = float(np.sum(resid**2) / max(n - 2, 1))
    return slope, math.sqrt(sigma2 / sxx)


def _sample_filtered_pair(spec: SetSpec, k0: float, rng, max_tries: int = 200):
    for _ in range(max_tries):
        x = sample_point(spec, rng)
        y = sample_point(spec, rng)
        d = x - y
        if not np.any(d):
            continue
        if k0 <= 0 or anti_sparsity_level(d) >= k0:
            return x, y
    raise SetFilterError(f"no pair passed the k0={k0} anti-sparsity filter")


def _quantile(vals: np.ndarray, q: float) -> float:
    return float(np.quantile(vals, q)) if len(vals) else math.nan


def _aggregate(experiment: str, plan: TrialPlan, stats_by_m, rows, slope_band,
               extra_detail=None) -> ExperimentResult:
    per_m = []
    fit_points = []
    censored_total = 0
    for m_index, m in enumerate(plan.m_grid):
        vals, n_censored = stats_by_m[m_index]
        vals = np.asarray(vals, dtype=np.float64)
        censored_total += n_censored
        worst = float(np.max(vals)) if len(vals) else math.nan
        per_m.append(PerMStats(m=m, worst=worst, q90=_quantile(vals, 0.9),
                               q99=_quantile(vals, 0.99), n_values=len(vals),
                               n_censored=n_censored))
        if len(vals) and worst > 0:
            fit_points.append((m, worst))
    slope = stderr = None
    verdict = None
    try:
        slope, stderr = fit_loglog_slope(fit_points)
        if slope_band is not None:
            verdict = slope_band[0] <= slope <= slope_band[1]
    except InsufficientData:
        if slope_band is not None:
            verdict = False
    detail = dict(extra_detail or {})
    return ExperimentResult(experiment=experiment, rows=rows, per_m=per_m, slope=slope,
                            slope_stderr=stderr, verdict=verdict,
                            master_seed=plan.master_seed, censored_total=censored_total,
                            detail=detail)


def quasi_isometry_sweep(plan: TrialPlan, slope_band: Optional[tuple[float, float]] = None,
                         jobs: int = 1) -> ExperimentResult:
    """Distortion decay of D against sqrt(2/pi) * distance over the m grid.

    Per (m, map trial): sample filtered pairs, record
    e(x, y) / (||x - y|| + delta) and take the max; the ensemble's
    kappa / sqrt(k0) allowance is subtracted from the per-m statistic.
    """
    n = plan.n_override or _ambient(plan.set_spec)
    allowance = plan.ensemble.kappa_sg / math.sqrt(max(plan.k0, 1.0))

    def one(m_index: int, m: int, trial: int):
        ss = task_seed(plan.master_seed, m_index, trial)
        map_seed, pair_seed = ss.spawn(2)
        qmap = make_map(plan.ensemble, m, n, plan.delta, map_seed)
        rng = np.random.default_rng(pair_seed)
        xs = np.empty((n, 2 * plan.pairs_per_m))
        dists = np.empty(plan.pairs_per_m)
        for j in range(plan.pairs_per_m):
            x, y = _sample_filtered_pair(plan.set_spec, plan.k0, rng)
            xs[:, 2 * j] = x
            xs[:, 2 * j + 1] = y
            dists[j] = np.linalg.norm(x - y)
        codes = apply_many(qmap, xs)
        l1 = np.abs(codes[:, 0::2] - codes[:, 1::2]).sum(axis=0)
        d_vals = plan.delta * l1 / m
        errs = np.abs(d_vals - SQRT_2_OVER_PI * dists)
        ratios = errs / (dists + plan.delta)
        return ratios, seed_fingerprint(ss)

    tasks = [(mi, m, t) for mi, m in enumerate(plan.m_grid) for t in range(plan.trials_per_m)]
    results = _run_tasks(tasks, one, jobs)

    rows = []
    stats_by_m = []
    idx = 0
    for m in plan.m_grid:
        all_ratios = []
        for trial in range(plan.trials_per_m):
            ratios, fp = results[idx]
            idx += 1
            stat = float(np.max(ratios)) - allowance
            rows.append(TrialRow("quasi-isometry", m, trial, stat, stat <= 0, fp))
            all_ratios.append(np.max(ratios))
        vals = np.asarray(all_ratios) - allowance
        keep = vals[vals > 0]
        stats_by_m.append((keep, int(np.sum(vals <= 0))))
    return _aggregate("quasi-isometry", plan, stats_by_m, rows, slope_band,
                      {"allowance": allowance})


def _ambient(spec: SetSpec) -> int:
    from .geometry import ambient_dim

    return ambient_dim(spec)


def _direction_for(spec: SetSpec, x: np.ndarray, k0: float, rng, max_tries: int = 100):
    """Unit direction u with x + r*u staying in the set for small r > 0 and
    u passing the anti-sparsity filter. Returns None when the kind has no
    continuum directions (finite sets)."""
    if isinstance(spec, FiniteSet):
        return None
    for _ in range(max_tries):
        if isinstance(spec, SparseBall):
            c = x if spec.basis is None else spec.basis.T @ x
            support = np.flatnonzero(np.abs(c) > 1e-12)
            if len(support) == 0:
                support = rng.choice(spec.n, size=spec.k, replace=False)
            coeffs = rng.standard_normal(len(support))
            u = np.zeros(spec.n)
            u[support] = coeffs
            if spec.basis is not None:
                u = spec.basis @ u
        elif isinstance(spec, LowRankBall):
            mat = x.reshape(spec.n1, spec.n2)
            uu, _, _ = np.linalg.svd(mat, full_matrices=False)
            u = (uu[:, : spec.r] @ rng.standard_normal((spec.r, spec.n2))).ravel()
        else:
            u = rng.standard_normal(spec.n)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            continue
        u = u / norm
        if k0 <= 0 or anti_sparsity_level(u) >= k0:
            return u
    raise SetFilterError(f"no direction passed the k0={k0} anti-sparsity filter")


def _radial_cap(x: np.ndarray, u: np.ndarray, radius: float) -> float:
    """Largest r >= 0 with ||x + r u|| <= radius (u unit)."""
    xu = float(np.dot(x, u))
    disc = xu * xu + radius * radius - float(np.dot(x, x))
    if disc <= 0:
        return 0.0
    return -xu + math.sqrt(disc)


def _largest_consistent_radius(qmap: QuantizedMap, zx: np.ndarray, zu: np.ndarray,
                               codes_x: np.ndarray, r_max: float, resolution: float):
    """Largest radius with identical codes, via log-spaced scan plus bisection.

    Returns (radius, censored). Code agreement is not monotone in r, so the
    scan locates the largest consistent scanned radius and bisection refines
    toward the next inconsistent one.
    """
    if r_max <= resolution:
        return resolution, True
    radii = np.geomspace(resolution, r_max, 64)
    z = zx[:, None] + radii[None, :] * zu[:, None]
    codes = _quantize_cols(qmap.quantizer, z)
    consistent = np.all(codes == codes_x[:, None], axis=0)
    if not np.any(consistent):
        return resolution, True
    j = int(np.max(np.flatnonzero(consistent)))
    lo = float(radii[j])
    if j == len(radii) - 1:
        return lo, False
    hi = float(radii[j + 1])
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        cm = _quantize_cols(qmap.quantizer, (zx + mid * zu)[:, None])[:, 0]
        if np.array_equal(cm, codes_x):
            lo = mid
        else:
            hi = mid
    return lo, False


def _quantize_cols(cfg: QuantizerConfig, z: np.ndarray) -> np.ndarray:
    from .quantizer import quantize_array

    return quantize_array(cfg, z)


def _max_filtered_distance(points: np.ndarray, k0: float, block: int = 256) -> float:
    """Largest pairwise distance whose difference passes the k0 filter."""
    best = 0.0
    for start in range(0, len(points), block):
        rows = points[start:start + block]
        diff = rows[:, None, :] - points[None, :, :]
        norms = np.linalg.norm(diff, axis=2)
        if k0 > 1.0:
            sup = np.max(np.abs(diff), axis=2)
            level = np.where(sup > 0, (norms / np.where(sup > 0, sup, 1.0)) ** 2, 0.0)
            norms = np.where(level >= k0, norms, 0.0)
        best = max(best, float(norms.max()))
    return best


def consistency_width_sweep(plan: TrialPlan, slope_band: Optional[tuple[float, float]] = None,
                            jobs: int = 1, resolution_factor: float = 2.0**-20) -> ExperimentResult:
    """Largest distance between vectors with identical codes, per m.

    Continuum sets: anchors plus admissible directions, coarse scan and
    bisection; finite sets: the largest distance among sampled consistent
    pairs. A statistic at the bisection resolution is recorded as censored.
    """
    d = diameter(plan.set_spec)
    if d > 1.0 + 1e-9:
        raise InvalidArgument("consistency sweep requires the set inside the unit ball")
    n = plan.n_override or _ambient(plan.set_spec)
    resolution = resolution_factor * d
    finite = isinstance(plan.set_spec, FiniteSet)

    def one(m_index: int, m: int, trial: int):
        ss = task_seed(plan.master_seed, m_index, trial)
        map_seed, sample_seed = ss.spawn(2)
        qmap = make_map(plan.ensemble, m, n, plan.delta, map_seed)
        rng = np.random.default_rng(sample_seed)
        best = 0.0
        censored = True
        if finite:
            # exact width: group all points by code vector, take the largest
            # filtered intra-group distance
            pts = plan.set_spec.points
            codes = apply_many(qmap, pts.T)
            _, inverse = np.unique(codes.T, axis=0, return_inverse=True)
            for gid in range(int(inverse.max()) + 1):
                members = pts[inverse == gid]
                if len(members) < 2:
                    continue
                w = _max_filtered_distance(members, plan.k0)
                if w > 0.0:
                    censored = False
                    best = max(best, w)
        else:
            p = plan.pairs_per_m
            anchors = np.empty((n, p))
            dirs = np.empty((n, p))
            caps = np.empty(p)
            for j in range(p):
                x = sample_point(plan.set_spec, rng)
                u = _direction_for(plan.set_spec, x, plan.k0, rng)
                anchors[:, j] = x
                dirs[:, j] = u
                caps[j] = _radial_cap(x, u, d)
            zx_all = qmap.project_many(anchors)
            zu_all = qmap.matrix.entries @ dirs
            codes_all = _quantize_cols(qmap.quantizer, zx_all)
            for j in range(p):
                if caps[j] <= resolution:
                    continue
                r, cens = _largest_consistent_radius(qmap, zx_all[:, j], zu_all[:, j],
                                                     codes_all[:, j], caps[j], resolution)
                if not cens:
                    censored = False
                    best = max(best, r)
        stat = best if not censored else resolution
        return stat, censored, seed_fingerprint(ss)

    tasks = [(mi, m, t) for mi, m in enumerate(plan.m_grid) for t in range(plan.trials_per_m)]
    results = _run_tasks(tasks, one, jobs)

    rows = []
    stats_by_m = []
    idx = 0
    for m in plan.m_grid:
        vals = []
        n_censored = 0
        for trial in range(plan.trials_per_m):
            stat, censored, fp = results[idx]
            idx += 1
            rows.append(TrialRow("consistency-width", m, trial, stat, censored, fp))
            if censored:
                n_censored += 1
            else:
                vals.append(stat)
        stats_by_m.append((vals, n_censored))
    return _aggregate("consistency-width", plan, stats_by_m, rows, slope_band,
                      {"resolution": resolution})


# --- lemma-level Monte Carlo checks ---


@dataclass(frozen=True)
class Lemma4Report:
    pass_rate: float
    trials: int
    failures: int
    m: int
    m_recommended: int
    fitted_c: Optional[float]
    pattern: tuple  # per-trial pass flags


def _sample_local_set(spec: SetSpec, eta: float, rng, max_tries: int = 50) -> np.ndarray:
    """A point of (K - K) inter eta B.

    Continuum kinds: a sampled difference radially shrunk to a uniform norm
    cap in [0, eta] (shrink only, so the point stays a difference); the draw
    is homogeneous in eta while the cap binds. Finite sets: rejection.
    """
    a = sample_point(spec, rng)
    b = sample_point(spec, rng)
    v = a - b
    cap = eta * rng.random()
    if isinstance(spec, FiniteSet):
        for _ in range(max_tries):
            if np.linalg.norm(v) <= eta:
                return v
            a = sample_point(spec, rng)
            b = sample_point(spec, rng)
            v = a - b
        raise SetFilterError(f"no finite-set difference fits in the eta={eta} ball")
    norm = np.linalg.norm(v)
    if norm > cap and norm > 0:
        v = v * (cap / norm)
    return v


def lemma4_diameter_check(spec: SetSpec, eta: float, ensemble: Ensemble, m: int,
                          trials: int, seed, margin: float = 1.0) -> Lemma4Report:
    """Projection stability of the local set (K - K) inter eta B.

    Per trial: fresh matrix, a sampled local-set point v, check
    ||Phi v|| <= sqrt(m) * eta. Points sitting exactly on the eta sphere fail
    about half the time by the CLT; the guarantee has slack only over the
    interior, so margin < 1 restricts sampling to (K - K) inter margin*eta B
    (still a subset of the local set) when a clean exponential pass rate is
    wanted.
    """
    if not (eta > 0):
        raise InvalidArgument("eta must be positive")
    if not (0 < margin <= 1):
        raise InvalidArgument("margin must lie in (0, 1]")
    n = _ambient(spec)
    root = as_seedseq(seed)
    alpha = ensemble.alpha
    # width of the local set is at most min(sqrt(n), 2 w(K)/eta) * eta; the
    # dimension bound keeps the recommendation cheap and conservative
    m_rec = int(math.ceil(alpha**4 * n))
    pattern = []
    for sub in root.spawn(trials):
        rng = np.random.default_rng(sub)
        v = _sample_local_set(spec, margin * eta, rng)
        mat = sample_iid(ensemble, (m, n), rng)
        pattern.append(bool(np.linalg.norm(mat @ v) <= math.sqrt(m) * eta * (1 + 1e-12)))
    failures = pattern.count(False)
    rate = failures / trials
    fitted_c = None
    if failures > 0:
        fitted_c = -math.log(rate) * alpha**4 / m
    return Lemma4Report(pass_rate=1.0 - rate, trials=trials, failures=failures,
                        m=m, m_recommended=m_rec, fitted_c=fitted_c,
                        pattern=tuple(pattern))


@dataclass(frozen=True)
class Lemma5Report:
    p_hat: float
    p_stderr: float
    empirical: float
    empirical_stderr: float
    chernoff_bound: float
    bound_vacuous: bool
    bound_holds: bool
    p_lower_bound: Optional[float]
    p_lower_holds: Optional[bool]
    p_lower_skipped_reason: Optional[str]


def lemma5_chernoff_check(u, v, k0: float, t: float, ensemble: Ensemble, delta: float,
                          m: int, r: int, trials: int, seed, eps0: Optional[float] = None,
                          p_samples: int = 100_000) -> Lemma5Report:
    """Tail bound P[D^t <= (delta/M) r] <= exp(-(Mp-r)^2 / (2Mp)) by Monte Carlo.

    p is the per-coordinate nonzero probability of the soft count; when
    sqrt(k0) >= 16 kappa the closed-form lower bound on p is also checked.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if t < 0:
        raise InvalidArgument("t must be nonnegative")
    w = u - v
    if not np.any(w):
        raise InvalidArgument("u and v must differ")
    if k0 > 0 and anti_sparsity_level(w) < k0:
        raise InvalidArgument("u - v fails the anti-sparsity precondition")
    dist = float(np.linalg.norm(w))
    if eps0 is None:
        eps0 = dist
    if eps0 < dist - 1e-12:
        raise InvalidArgument("eps0 must upper bound ||u - v||")
    root = as_seedseq(seed)
    s_p, s_trials = root.spawn(2)

    # per-coordinate nonzero probability
    rng = np.random.default_rng(s_p)
    phi = sample_iid(ensemble, (p_samples, u.size), rng)
    xi = rng.random(p_samples) * delta
    counts = soft_count_array(phi @ u + xi, phi @ v + xi, t, delta)
    nz = counts != 0
    p_hat = float(np.mean(nz))
    p_se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / p_samples)

    # full-map left probability
    rng = np.random.default_rng(s_trials)
    hits = 0
    for _ in range(trials):
        phi = sample_iid(ensemble, (m, u.size), rng)
        xi = rng.random(m) * delta
        c = soft_count_array(phi @ u + xi, phi @ v + xi, t, delta)
        if int(np.sum(c)) <= r:
            hits += 1
    emp = hits / trials
    emp_se = math.sqrt(max(emp * (1 - emp), 1e-12) / trials)

    mp = m * p_hat
    vacuous = r >= mp
    bound = 1.0 if vacuous else float(math.exp(-((mp - r) ** 2) / (2.0 * mp)))
    holds = emp <= bound + 3.0 * emp_se

    lb = lb_holds = reason = None
    if math.sqrt(max(k0, 0.0)) >= 16.0 * ensemble.kappa_sg:
        if p_hat == 0.0:
            reason = "p_hat is zero; lower bound not certifiable"
        else:
            lb = dist / (16.0 * (delta + eps0)) - 2.0 * t / (delta + eps0)
            lb_holds = p_hat + 3.0 * p_se >= lb
    else:
        reason = "sqrt(k0) < 16 kappa"
    return Lemma5Report(p_hat=p_hat, p_stderr=p_se, empirical=emp, empirical_stderr=emp_se,
                        chernoff_bound=bound, bound_vacuous=vacuous, bound_holds=holds,
                        p_lower_bound=lb, p_lower_holds=lb_holds, p_lower_skipped_reason=reason)


# --- deterministic counterexamples and exact combinatorics ---


@dataclass(frozen=True)
class NoDitherReport:
    pass_rate: float
    trials: int
    width: float  # ||u - v|| = s / sqrt(k0), irreducible for this map


def no_dither_counterexample(k0: int, s: float, m: int, trials: int, seed) -> NoDitherReport:
    """Undithered rounding map collapsing two distinct sparse vectors.

    u is all-ones on k0 coordinates and v = (1 + s/k0) u; Bernoulli rows give
    integer projections, the relative shift stays below one half, so the
    rounded codes agree deterministically.
    """
    if k0 < 1:
        raise InvalidArgument("k0 must be >= 1")
    if not (0.0 < s < 0.5):
        raise InvalidArgument("s must lie in (0, 1/2)")
    u = np.ones(k0)
    v = (1.0 + s / k0) * u
    cfg = QuantizerConfig(delta=1.0, variant="round")
    root = as_seedseq(seed)
    passes = 0
    from .ensembles import make_ensemble

    bern = make_ensemble("rademacher")
    for sub in root.spawn(trials):
        mat = sample_matrix(bern, m, k0, sub)
        qmap = QuantizedMap(matrix=mat, dither=None, quantizer=cfg)
        codes = apply_many(qmap, np.column_stack([u, v]))
        if np.array_equal(codes[:, 0], codes[:, 1]):
            passes += 1
    return NoDitherReport(pass_rate=passes / trials, trials=trials,
                          width=s / math.sqrt(k0))


@dataclass(frozen=True)
class BinomialMadReport:
    n: int
    mad: float
    sigma: float
    gap: float     # sqrt(2/pi) sigma - mad
    bound: float   # (1/7) sigma / n
    gap_ok: bool
    distortion_lhs: float  # |E D - sqrt(2/pi)||w|| | for w = ones(n), delta = 1
    distortion_rhs: float  # (1/7) ||w|| / n
    distortion_ok: bool


def bernoulli_floor_distortion(k0_even: int) -> BinomialMadReport:
    """Exact binomial-MAD gap and its distortion consequence for flat vectors.

    The deviation of the binomial MAD from sqrt(2/pi) times its standard
    deviation is at least sigma/(7n) for even n, which forces a residual
    relative distortion of at least ||w||/(7 n) on w = ones(n).
    """
    if k0_even < 2 or k0_even % 2 != 0:
        raise InvalidArgument("k0 must be even and >= 2")
    n = k0_even
    mad = binomial_mad(n)
    sigma = math.sqrt(n) / 2.0
    gap = SQRT_2_OVER_PI * sigma - float(mad)
    bound = MAD_GAP_CONST * sigma / n
    w_norm = math.sqrt(n)
    lhs = abs(mu_sg_exact_binomial(n) - SQRT_2_OVER_PI * w_norm)
    rhs = MAD_GAP_CONST * w_norm / n
    return BinomialMadReport(n=n, mad=float(mad), sigma=sigma, gap=gap, bound=bound,
                             gap_ok=gap >= bound, distortion_lhs=lhs, distortion_rhs=rhs,
                             distortion_ok=lhs >= rhs)


def de_moivre_agreement(n_even: int) -> float:
    """|enumerated MAD - De Moivre MAD| for even n (exact rationals)."""
    return abs(float(binomial_mad(n_even) - binomial_mad_de_moivre(n_even)))


def stirling_gosper_check(n_max: int) -> np.ndarray:
    """Per-n booleans for the factorial sandwich

      n^n e^-n sqrt(2 pi (n + 1/6)) <= n! <= n^n e^-n sqrt(2 pi (n + 1/5))

    checked in log space. The lower margin shrinks like 1/n^2, far below
    double precision at n ~ 1e4, so the running log-factorial and the bounds
    are evaluated in high-precision arithmetic.
    """
    if n_max < 1:
        raise InvalidArgument("n_max must be >= 1")
    import mpmath as mp

    ok = np.zeros(n_max, dtype=bool)
    with mp.workdps(40):
        log_fact = mp.mpf(0)
        two_pi = 2 * mp.pi
        for n in range(1, n_max + 1):
            log_fact += mp.log(n)
            base = n * mp.log(n) - n
            lower = base + mp.log(two_pi * (n + mp.mpf(1) / 6)) / 2
            upper = base + mp.log(two_pi * (n + mp.mpf(1) / 5)) / 2
            ok[n - 1] = bool(lower <= log_fact <= upper)
    return ok


@dataclass(frozen=True)
class FloorContrastReport:
    all_exact: bool
    trials: int
    m: int
    implied_floor: float  # 1 - sqrt(2/pi)
    gaussian_mean: Optional[float] = None
    gaussian_stderr: Optional[float] = None


def section2_bernoulli_floor(m: int, trials: int, seed, contrast: bool = False) -> FloorContrastReport:
    """D(e1, 0) = 1 exactly for Bernoulli rows at delta = 1, dithered floor.

    Optionally also reports the Gaussian contrast where D concentrates near
    sqrt(2/pi) instead.
    """
    if m < 1:
        raise InvalidArgument("m must be >= 1")
    from .ensembles import make_ensemble

    bern = make_ensemble("rademacher")
    root = as_seedseq(seed)
    n = 2
    x = np.zeros(n)
    x[0] = 1.0
    y = np.zeros(n)
    all_exact = True
    subs = root.spawn(trials + (trials if contrast else 0))
    for sub in subs[:trials]:
        qmap = make_map(bern, m, n, 1.0, sub)
        codes = apply_many(qmap, np.column_stack([x, y]))
        total = int(np.sum(np.abs(codes[:, 0] - codes[:, 1])))
        if total != m:
            all_exact = False
    g_mean = g_se = None
    if contrast:
        gauss = make_ensemble("gaussian")
        vals = []
        for sub in subs[trials:]:
            qmap = make_map(gauss, m, n, 1.0, sub)
            codes = apply_many(qmap, np.column_stack([x, y]))
            vals.append(float(np.sum(np.abs(codes[:, 0] - codes[:, 1]))) / m)
        vals = np.asarray(vals)
        g_mean = float(vals.mean())
        g_se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    return FloorContrastReport(all_exact=all_exact, trials=trials, m=m,
                               implied_floor=1.0 - SQRT_2_OVER_PI,
                               gaussian_mean=g_mean, gaussian_stderr=g_se)


@dataclass(frozen=True)
class LinearBaselineReport:
    eps_hat: float
    pairs: int
    quantized_relation_holds: bool


def linear_baseline(ensemble: Ensemble, spec: SetSpec, m: int, pairs: int, delta: float,
                    seed) -> LinearBaselineReport:
    """Measured linear distortion plus the algebraic quantized consequence.

    eps_hat is the worst relative deviation of ||Phi(x-y)||/sqrt(M) from
    ||x-y||; with the rounding quantizer the l2 code distance then satisfies
    (1-eps)||x-y|| - delta <= ||Q(Phi x)-Q(Phi y)||/sqrt(M) <= (1+eps)||x-y|| + delta.
    """
    n = _ambient(spec)
    root = as_seedseq(seed)
    mat_seed, pair_seed = root.spawn(2)
    mat = sample_matrix(ensemble, m, n, mat_seed)
    cfg = QuantizerConfig(delta=delta, variant="round")
    qmap = QuantizedMap(matrix=mat, dither=None, quantizer=cfg)
    rng = np.random.default_rng(pair_seed)
    eps_hat = 0.0
    recs = []
    for _ in range(pairs):
        x = sample_point(spec, rng)
        y = sample_point(spec, rng)
        d = float(np.linalg.norm(x - y))
        if d == 0.0:
            continue
        proj = float(np.linalg.norm(mat.entries @ (x - y))) / math.sqrt(m)
        eps_hat = max(eps_hat, abs(proj / d - 1.0))
        recs.append((x, y, d))
    holds = True
    for x, y, d in recs:
        codes = apply_many(qmap, np.column_stack([x, y]))
        qdist = delta * float(np.linalg.norm((codes[:, 0] - codes[:, 1]).astype(np.float64))) / math.sqrt(m)
        if not ((1 - eps_hat) * d - delta - 1e-12 <= qdist <= (1 + eps_hat) * d + delta + 1e-12):
            holds = False
    return LinearBaselineReport(eps_hat=eps_hat, pairs=len(recs), quantized_relation_holds=holds)


# --- CSV emission (RFC 4180, header row mandatory) ---

ROW_HEADER = ("experiment", "m", "trial", "statistic", "censored", "seed")
SUMMARY_HEADER = ("experiment", "slope", "stderr", "verdict")


def rows_to_csv(rows: Sequence[TrialRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(ROW_HEADER)
    for r in rows:
        w.writerow([r.experiment, r.m, r.trial, repr(r.statistic), int(r.censored), r.seed])
    return buf.getvalue()


def summary_to_csv(entries) -> str:
    """entries: iterable of (experiment, slope|None, stderr|None, verdict)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(SUMMARY_HEADER)
    for name, slope, stderr, verdict in entries:
        w.writerow([name,
                    "" if slope is None else repr(slope),
                    "" if stderr is None else repr(stderr),
                    {True: "pass", False: "fail", None: "info"}[verdict]])
    return buf.getvalue()


def gnuplot_data(result: ExperimentResult) -> str:
    """Two columns: log10(m), log10(per-m worst statistic)."""
    lines = []
    for s in result.per_m:
        if s.n_values and s.worst > 0:
            lines.append(f"{math.log10(s.m):.12g} {math.log10(s.worst):.12g}")
    return "\n".join(lines) + "\n"
