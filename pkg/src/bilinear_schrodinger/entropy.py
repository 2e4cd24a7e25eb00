"""Covering-number comparison between a reachable cloud and an H^k ball slice."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .coupling import CouplingMatrix
from .errors import ValidationError
from .propagator import propagate_many
from .spectral import StateCoeffs, sobolev_weights


def _pl_abs_integral(v: np.ndarray, h: float) -> np.ndarray:
    """Exact int |f| for piecewise-linear f with nodal values v[..., j] and uniform spacing h."""
    a, b = v[..., :-1], v[..., 1:]
    same = a * b >= 0
    absum = np.abs(a) + np.abs(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        cross = np.where(absum > 0, (a * a + b * b) / np.where(absum > 0, absum, 1), 0.0)
    return h * np.sum(np.where(same, 0.5 * absum, 0.5 * cross), axis=-1)


@dataclass(eq=False)
class ControlBallSample:
    """Piecewise-linear controls on [0, m] (uniform knots) with W^{1,1} norm <= m, and times in [0, m]."""

    m: float
    knot_values: np.ndarray
    times: np.ndarray
    seed: int

    @property
    def count(self) -> int:
        return self.knot_values.shape[0]

    @property
    def knots(self) -> int:
        return self.knot_values.shape[1]

    @property
    def knot_times(self) -> np.ndarray:
        return np.linspace(0.0, self.m, self.knots)

    @property
    def spacing(self) -> float:
        return self.m / (self.knots - 1)

    def l1_norms(self) -> np.ndarray:
        return _pl_abs_integral(self.knot_values, self.spacing)

    def w11_norms(self) -> np.ndarray:
        return self.l1_norms() + np.sum(np.abs(np.diff(self.knot_values, axis=1)), axis=1)

    def l1_distance(self, i: int, j: int) -> float:
        return float(_pl_abs_integral(self.knot_values[i] - self.knot_values[j], self.spacing))

    def l1_distances(self) -> np.ndarray:
        diff = self.knot_values[:, None, :] - self.knot_values[None, :, :]
        return _pl_abs_integral(diff, self.spacing)

    def control(self, i: int):
        kt, kv = self.knot_times, self.knot_values[i]
        return lambda t: np.interp(t, kt, kv)


def sample_control_ball(m: float, count: int, knots: int, seed: int) -> ControlBallSample:
    """Gaussian knot values rescaled to a uniformly drawn fraction of the radius m."""
    if count < 2 or knots < 2:
        raise ValidationError("need count >= 2 and knots >= 2")
    if m <= 0:
        raise ValidationError("radius m must be positive")
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((count, knots))
    frac = rng.uniform(0.0, 1.0, count)
    times = rng.uniform(0.0, m, count)
    h = m / (knots - 1)
    norms = _pl_abs_integral(vals, h) + np.sum(np.abs(np.diff(vals, axis=1)), axis=1)
    vals = vals * (frac * m / norms)[:, None]
    return ControlBallSample(float(m), vals, times, int(seed))


def reachable_cloud(z0: StateCoeffs, S: ControlBallSample, C: CouplingMatrix, dt: float = 1e-3) -> np.ndarray:
    """Endpoints U_{t_i}(z0, u_i), one row per sample; every run uses ceil(m/dt) midpoint steps."""
    if abs(z0.l2_norm() - 1) > 1e-10:
        raise ValidationError("z0 must lie on the unit sphere")
    if dt <= 0:
        raise ValidationError("dt must be positive")
    n_steps = max(1, int(np.ceil(S.m / dt - 1e-9)))
    frac = (np.arange(n_steps) + 0.5) / n_steps
    tmid = S.times[:, None] * frac[None, :]
    kt = S.knot_times
    # piecewise-linear interpolation, vectorized across runs
    idx = np.clip(np.searchsorted(kt, tmid, side="right") - 1, 0, S.knots - 2)
    w = (tmid - kt[idx]) / S.spacing
    rows = np.arange(S.count)[:, None]
    ctrl = (1 - w) * S.knot_values[rows, idx] + w * S.knot_values[rows, idx + 1]
    return propagate_many(z0, ctrl, S.times, n_steps, C)


def _weighted(points: np.ndarray, lambdas: np.ndarray, order: float) -> np.ndarray:
    z = np.asarray(points, dtype=complex) * sobolev_weights(lambdas, order)
    return np.hstack([z.real, z.imag])


def pairwise_distances(points, lambdas, order: float) -> np.ndarray:
    x = _weighted(points, lambdas, order)
    return cdist(x, x)


def greedy_cover_count(D: np.ndarray, eps: float) -> int:
    """Pick the lowest-index uncovered point, drop everything within 2 eps; count the picks."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    n = D.shape[0]
    if n == 0:
        raise ValidationError("empty point set")
    alive = np.ones(n, dtype=bool)
    picks = 0
    i = 0
    while True:
        rest = np.flatnonzero(alive[i:])
        if rest.size == 0:
            return picks
        i += int(rest[0])
        picks += 1
        alive &= D[i] > 2 * eps
        alive[i] = False


def covering_number(points, norm_order: float, eps: float, lambdas=None) -> int:
    """Greedy 2 eps covering count in the H^{norm_order} metric.

    ``points`` is a list of StateCoeffs or a coefficient array (then
    ``lambdas`` is required).
    """
    if len(points) == 0:
        raise ValidationError("empty point list")
    if isinstance(points[0], StateCoeffs):
        lambdas = points[0].system.lambdas
        points = np.array([p.coeffs for p in points])
    if lambdas is None:
        raise ValidationError("lambdas are needed for raw coefficient arrays")
    return greedy_cover_count(pairwise_distances(points, lambdas, norm_order), eps)


def sample_ball_slice(lambdas, count: int, k: float, rng, oversample: int = 20) -> np.ndarray:
    """Uniform points of the unit sphere of C^n, keeping the ``count`` of smallest H^k norm.

    This is the slice {sum lambda^k |c|^2 <= r^2} of the unit sphere with r
    the empirical count-quantile.
    """
    lam = np.asarray(lambdas, dtype=float)
    n = lam.size
    total = count * oversample
    g = rng.standard_normal((total, n)) + 1j * rng.standard_normal((total, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    hk = np.linalg.norm(g * sobolev_weights(lam, k), axis=1)
    keep = np.sort(np.argsort(hk, kind="stable")[:count])
    return g[keep]


def monotone_counts(D: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Greedy counts along a decreasing eps grid, made non-decreasing as eps shrinks.

    A greedy set found at a larger eps stays 2 eps-separated at every smaller
    eps, so the running maximum is still a valid separated-set count.
    """
    return np.maximum.accumulate(np.array([greedy_cover_count(D, e) for e in eps]))


def fit_slope(eps: np.ndarray, counts: np.ndarray) -> float:
    """Least-squares slope of log H_eps = log ln N_eps against log(1/eps), skipping N = 1."""
    eps = np.asarray(eps, dtype=float)
    counts = np.asarray(counts, dtype=float)
    ok = counts > 1
    if ok.sum() < 2:
        return float("nan")
    x = np.log(1 / eps[ok])
    y = np.log(np.log(counts[ok]))
    return float(np.polyfit(x, y, 1)[0])


def eps_grid(D: np.ndarray, n_eps: int = 8, lo_pct: float = 10, hi_pct: float = 60) -> np.ndarray:
    """Decreasing eps grid with 2 eps spanning the lo..hi percentiles of the pairwise distances."""
    iu = np.triu_indices(D.shape[0], 1)
    lo, hi = np.percentile(D[iu], [lo_pct, hi_pct])
    if not lo > 0:
        raise ValidationError("distance distribution is degenerate")
    return np.geomspace(hi / 2, lo / 2, n_eps)


@dataclass
class EntropyConfig:
    m: float = 1.0
    count: int = 400
    knots: int = 8
    k: float = 0.5
    dt: float = 1e-3
    seed: int = 0
    n_eps: int = 8
    lo_pct: float = 10.0
    hi_pct: float = 60.0
    n_boot: int = 200
    oversample: int = 20


@dataclass
class EntropyReport:
    eps_reachable: np.ndarray
    eps_ball: np.ndarray
    counts_reachable: np.ndarray
    counts_ball: np.ndarray
    slope_reachable: float
    slope_ball: float
    gap: float
    gap_ci95: tuple
    slope_ci95: dict
    holder: dict
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eps_reachable": [float(e) for e in self.eps_reachable],
            "eps_ball": [float(e) for e in self.eps_ball],
            "counts_reachable": [int(c) for c in self.counts_reachable],
            "counts_ball": [int(c) for c in self.counts_ball],
            "slope_reachable": self.slope_reachable,
            "slope_ball": self.slope_ball,
            "gap": self.gap,
            "gap_ci95": [float(x) for x in self.gap_ci95],
            "slope_ci95": {k: [float(x) for x in v] for k, v in self.slope_ci95.items()},
            "holder": self.holder,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        data = np.column_stack([np.arange(1, self.eps_ball.size + 1), self.eps_reachable, self.counts_reachable,
                                self.eps_ball, self.counts_ball])
        np.savetxt(path, data, delimiter=",", header="level,eps_reachable,N_reachable,eps_ball,N_ball",
                   comments="", fmt=["%d", "%.17g", "%d", "%.17g", "%d"])


def holder_fit(cloud: np.ndarray, S: ControlBallSample, lambdas, order: float = 0.0,
               exponent: float = 1.0) -> float:
    """Smallest C with ||z_i - z_j||_order <= C (|t_i - t_j| + ||u_i - u_j||_L1)^exponent over all pairs."""
    D = pairwise_distances(cloud, lambdas, order)
    P = np.abs(S.times[:, None] - S.times[None, :]) + S.l1_distances()
    iu = np.triu_indices(D.shape[0], 1)
    base = P[iu] ** exponent
    ok = base > 0
    if np.any((D[iu] > 1e-14) & ~ok):
        return float("inf")
    return float(np.max(D[iu][ok] / base[ok])) if ok.any() else 0.0


def compare_clouds(reach: np.ndarray, ball: np.ndarray, lambdas, order: float, cfg: EntropyConfig):
    """Counts on per-channel eps grids, slopes, and a bootstrap interval for the slope gap."""
    if reach.shape[0] < 50 or ball.shape[0] < 50:
        raise ValidationError("need at least 50 points per channel for a slope fit")
    Dr = pairwise_distances(reach, lambdas, order)
    Db = pairwise_distances(ball, lambdas, order)
    er = eps_grid(Dr, cfg.n_eps, cfg.lo_pct, cfg.hi_pct)
    eb = eps_grid(Db, cfg.n_eps, cfg.lo_pct, cfg.hi_pct)
    cr, cb = monotone_counts(Dr, er), monotone_counts(Db, eb)
    sr, sb = fit_slope(er, cr), fit_slope(eb, cb)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    boot = []
    for _ in range(cfg.n_boot):
        ir = rng.integers(0, Dr.shape[0], Dr.shape[0])
        ib = rng.integers(0, Db.shape[0], Db.shape[0])
        boot.append((fit_slope(er, monotone_counts(Dr[np.ix_(ir, ir)], er)),
                     fit_slope(eb, monotone_counts(Db[np.ix_(ib, ib)], eb))))
    boot = np.array(boot).reshape(-1, 2)

    def ci95(x):
        x = x[np.isfinite(x)]
        return tuple(float(v) for v in np.percentile(x, [2.5, 97.5])) if x.size else (float("nan"),) * 2
    cis = {"reachable": ci95(boot[:, 0]), "ball": ci95(boot[:, 1]), "gap": ci95(boot[:, 1] - boot[:, 0])}
    return er, eb, cr, cb, sr, sb, cis


def entropy_report(z0: StateCoeffs, C: CouplingMatrix, cfg: EntropyConfig | None = None) -> EntropyReport:
    cfg = cfg or EntropyConfig()
    if not 0 < cfg.k < 1:
        raise ValidationError("the comparison order k must lie in (0, d) = (0, 1)")
    if cfg.count < 50:
        raise ValidationError("need at least 50 samples for a stable fit")
    ss = np.random.SeedSequence(cfg.seed)
    s_ctrl, s_ball = ss.spawn(2)
    S = sample_control_ball(cfg.m, cfg.count, cfg.knots, int(s_ctrl.generate_state(1)[0]))
    reach = reachable_cloud(z0, S, C, cfg.dt)
    ball = sample_ball_slice(C.lambdas, cfg.count, cfg.k, np.random.default_rng(s_ball), cfg.oversample)
    order = cfg.k - 1
    er, eb, cr, cb, sr, sb, cis = compare_clouds(reach, ball, C.lambdas, order, cfg)
    holder = {
        "l2_lipschitz": holder_fit(reach, S, C.lambdas, 0.0, 1.0),
        "hk1_holder": holder_fit(reach, S, C.lambdas, order, 1.0 / cfg.k),
        "hk1_exponent": 1.0 / cfg.k,
        "max_sphere_defect": float(np.max(np.abs(np.linalg.norm(reach, axis=1) - 1))),
    }
    return EntropyReport(er, eb, cr, cb, sr, sb, sb - sr, cis["gap"],
                         {"reachable": cis["reachable"], "ball": cis["ball"]}, holder, dict(vars(cfg)))
