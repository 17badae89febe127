"""Estimators turning raw simulation output into transport quantities.

Two independent routes to the axial diffusivity are kept strictly separate:

* ``msd_curve`` + ``fit_self_diffusion`` measure sigma^2 from mean squared
  displacement of free trajectories (D_self = sigma^2 / 2);
* ``fit_profile_gradient`` + ``transport_coefficient`` measure the
  Fick's-law ratio D_trans = (H * current) / density-gradient from the
  open-gas steady state.

Their agreement is the headline check, so neither may borrow numbers from
the other; the only shared input is the tube itself.  Uncertainties come
from nonparametric bootstrap over particles/trajectories (heavy-ish
lifetime tails make plug-in normal errors suspect), except where an
estimate is a linear function of bin means and exact covariance
propagation is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .billiard import Side, boundary_point_at, run_krw_chain, run_ksb, sample_cosine_direction
from .gas import GasSummary, OccupationLedger, run_ensemble
from .geometry import (
    Point2,
    TubeRealization,
    TubeSpec,
    Wall,
    build_tube,
    make_finite,
    mean_section_measure,
)
from .rng import Stream, hash2, tag64


class InsufficientCrossingsError(RuntimeError):
    """No crossings in the ledger; raise n_particles to roughly 100*H."""


@dataclass(eq=False)
class MsdCurve:
    times: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray
    n_traj: int
    seed: int
    # per-trajectory squared displacements (n_traj, n_times); kept for
    # bootstrap refits.  None for synthetic curves.
    sq: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class DiffusionFit:
    sigma2: float
    stderr: float
    n_points: int
    window: tuple[float, float]
    n_traj: int


@dataclass(eq=False)
class ProfileFit:
    """Fit of right-indexed bin counts against the linear-profile prediction.

    Bins are indexed j = 1..m from the far (right) gate, where the steady
    density vanishes; the predicted mean count of bin j is
    theta * H * (j - 1/2) / m^2 with theta = lam * mean_section.
    """

    theta_hat: float
    stderr: float
    max_dev: float  # max over bins of |count - pred| / pred
    counts: np.ndarray  # right-indexed bin mean counts
    predictions: np.ndarray
    rel_dev: np.ndarray
    rel_dev_stderr: np.ndarray
    m: int
    H: int


@dataclass(frozen=True)
class CrossingStats:
    et_over_h: float  # E[T] / H over all injected particles
    et_over_h_stderr: float
    hp_cross: float  # H * P[cross]
    hp_cross_stderr: float
    cond_t_over_h2: float  # E[T | cross] / H^2
    cond_t_over_h2_stderr: float
    t1c_over_h: float  # E[T ; cross] / H
    t1c_over_h_stderr: float
    t1cc_over_h: float  # E[T ; no cross] / H
    t1cc_over_h_stderr: float
    ratio: float  # t1cc / t1c
    ratio_stderr: float
    n_particles: int
    n_crossed: int
    H: int


@dataclass(eq=False)
class AnnealedResult:
    mean: float
    stderr: float
    jensen_factor: float
    protocol: str
    n_envs: int
    H: int
    per_env: np.ndarray
    gate_measures: np.ndarray
    mean_sections: np.ndarray

    @property
    def mean_section_avg(self) -> float:
        return float(self.mean_sections.mean())

    @property
    def inv_gate_avg(self) -> float:
        return float((1.0 / self.gate_measures).mean())


@dataclass(frozen=True)
class StatTest:
    name: str
    statistic: float
    z_or_p: float
    passed: bool
    threshold: str


def make_time_grid(
    t_max: float, points_per_decade: int, include_zero: bool = True
) -> np.ndarray:
    """Geometric time grid from 1 to t_max with the given resolution."""
    if t_max < 1.0 or points_per_decade < 1:
        raise ValueError("need t_max >= 1 and points_per_decade >= 1")
    n = int(math.floor(points_per_decade * math.log10(t_max) + 1e-9)) + 1
    grid = 10.0 ** (np.arange(n) / points_per_decade)
    if grid[-1] < t_max:
        grid = np.append(grid, t_max)
    else:
        grid[-1] = t_max
    if include_zero:
        grid = np.concatenate(([0.0], grid))
    return grid


def msd_curve(
    tube: TubeRealization,
    n_traj: int,
    t_grid,
    seed: int,
    label: str = "msd",
    burn_in: int = 1_000,
    stride: int = 50,
) -> MsdCurve:
    """Mean squared axial displacement over independent trajectories.

    Start points are boundary points picked every ``stride`` steps of one
    long embedded-walk run (after ``burn_in`` steps), so the trajectory
    ensemble starts from the walk's stationary boundary law on this fixed
    tube.  Trajectory i runs on Stream.derive(seed, label, i).
    """
    times = np.ascontiguousarray(t_grid, dtype=np.float64)
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    start0 = boundary_point_at(tube, 0.25, Wall.UPPER)
    chain = run_krw_chain(
        tube, start0, burn_in + n_traj * stride, Stream.derive(seed, f"{label}-starts", 0)
    )
    tag = tag64(label)
    sq = np.empty((n_traj, times.size))
    for i in range(n_traj):
        j = burn_in + (i + 1) * stride - 1
        pos = Point2(chain["x"][j], chain["y"][j])
        normal = (chain["nx"][j], chain["ny"][j])
        s = Stream.derive(seed, tag, i)
        direction = sample_cosine_direction(normal, 2, s)
        track = run_ksb(tube, pos, direction, float(times[-1]), times, s)
        sq[i] = (track.axial - pos.x) ** 2
    msd = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.full(times.size, np.inf)
    return MsdCurve(times=times, msd=msd, stderr=se, n_traj=n_traj, seed=seed, sq=sq)


def _wls_through_origin(t: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum(w * t * y) / np.sum(w * t * t))


def fit_self_diffusion(
    curve: MsdCurve,
    t_min: float,
    t_max: float,
    n_boot: int = 500,
) -> DiffusionFit:
    """sigma^2 from a weighted least-squares fit msd = sigma^2 * t.

    The line is forced through the origin (finite-time offsets are bias,
    not signal).  The standard error refits each of ``n_boot`` bootstrap
    resamples of the trajectories with the original weights.
    """
    mask = (curve.times >= t_min) & (curve.times <= t_max) & (curve.times > 0.0)
    n_pts = int(mask.sum())
    if n_pts < 5:
        raise ValueError(
            f"window [{t_min}, {t_max}] holds {n_pts} grid points; need >= 5"
        )
    t = curve.times[mask]
    y = curve.msd[mask]
    se = curve.stderr[mask]
    w = 1.0 / (se * se) if np.all(se > 0.0) & np.all(np.isfinite(se)) else np.ones_like(t)
    sigma2 = _wls_through_origin(t, y, w)

    if curve.sq is not None and curve.n_traj > 1:
        block = curve.sq[:, mask]
        rng = Stream.derive(curve.seed, "msd-boot", 0).numpy_rng("resample")
        n = curve.n_traj
        boots = np.empty(n_boot)
        for b in range(n_boot):
            idx = rng.integers(0, n, n)
            boots[b] = _wls_through_origin(t, block[idx].mean(axis=0), w)
        stderr = float(boots.std(ddof=1))
    elif np.all(se > 0.0) and np.all(np.isfinite(se)):
        denom = np.sum(w * t * t)
        stderr = float(math.sqrt(np.sum(w * w * t * t * se * se)) / denom)
    else:
        stderr = 0.0
    return DiffusionFit(
        sigma2=sigma2,
        stderr=stderr,
        n_points=n_pts,
        window=(t_min, t_max),
        n_traj=curve.n_traj,
    )


def loglog_slope(curve: MsdCurve, t_min: float, t_max: float) -> float:
    """Least-squares slope of log(msd) vs log(t) over the window."""
    mask = (curve.times >= t_min) & (curve.times <= t_max) & (curve.times > 0.0)
    if int(mask.sum()) < 3:
        raise ValueError("need >= 3 grid points in the window")
    lt = np.log(curve.times[mask])
    ly = np.log(curve.msd[mask])
    lt = lt - lt.mean()
    return float(np.sum(lt * ly) / np.sum(lt * lt))


def fit_profile_gradient(
    summary: GasSummary, lam: float, mean_section: float
) -> ProfileFit:
    """Fit the steady bin counts against the linear density profile.

    The density under one-sided left injection falls linearly from the
    injection gate to zero at the far gate, so with bins indexed j = 1..m
    from the right gate the predicted mean counts are
    theta * H * (j-1/2) / m^2, theta = lam * mean_section.  theta_hat is
    the least-squares scale of that shape; its stderr propagates the full
    covariance of the bin means (theta_hat is linear in them).
    """
    m = summary.mean_counts.size
    if m < 5:
        raise ValueError(f"m={m} bins: need >= 5")
    H = summary.H
    counts = summary.mean_counts[::-1].copy()  # j=1 nearest the right gate
    se = summary.mean_counts_stderr[::-1].copy()
    cov = summary.mean_counts_cov[::-1, ::-1].copy()
    j = np.arange(1, m + 1, dtype=np.float64)
    design = H * (j - 0.5) / (m * m)
    a = design / np.sum(design * design)
    theta_hat = float(a @ counts)
    var = float(a @ cov @ a)
    stderr = math.sqrt(var) if np.isfinite(var) and var >= 0.0 else math.inf
    predictions = lam * mean_section * design
    rel_dev = counts / predictions - 1.0
    rel_dev_se = se / predictions
    max_dev = float(np.max(np.abs(rel_dev)))
    return ProfileFit(
        theta_hat=theta_hat,
        stderr=stderr,
        max_dev=max_dev,
        counts=counts,
        predictions=predictions,
        rel_dev=rel_dev,
        rel_dev_stderr=rel_dev_se,
        m=m,
        H=H,
    )


def transport_coefficient(current_scaled: float, theta: float) -> float:
    """Fick's-law diffusivity D_trans = (H * current) / theta."""
    if not theta > 0.0:
        raise ValueError(f"theta={theta}: need a positive density gradient")
    return current_scaled / theta


def milne_length(sigma2: float, mean_section: float, gate_measure: float, d: int = 2) -> float:
    """Extrapolation length pi * mean_section * sigma^2 / (2 * gate), d=2."""
    if d != 2:
        raise ValueError("Milne length implemented for d=2 only")
    if sigma2 <= 0.0 or mean_section <= 0.0 or gate_measure <= 0.0:
        raise ValueError("inputs must be positive")
    return math.pi * mean_section * sigma2 / (2.0 * gate_measure)


def _crossing_values(life: np.ndarray, crossed: np.ndarray, H: float):
    n = life.size
    n_c = int(crossed.sum())
    p = n_c / n
    et = float(life.mean()) / H
    hp = H * p
    if n_c > 0:
        cond = float(life[crossed].mean()) / (H * H)
    else:
        cond = math.nan
    t1c = float((life * crossed).mean()) / H
    t1cc = float((life * ~crossed).mean()) / H
    ratio = t1cc / t1c if t1c > 0.0 else math.nan
    return et, hp, cond, t1c, t1cc, ratio


def crossing_statistics(
    ledger: OccupationLedger,
    H: Optional[float] = None,
    n_boot: int = 500,
    boot_seed: int = 0,
) -> CrossingStats:
    """Crossing-probability and lifetime asymptotics with bootstrap errors.

    All five statistics are resampled together over particles, so the
    stderrs include their mutual correlations.
    """
    if ledger.side != Side.LEFT:
        raise ValueError("crossing statistics expect left-gate injection")
    Hv = float(H if H is not None else ledger.ftube.H)
    life = ledger.lifetimes
    crossed = ledger.crossed
    n = life.size
    n_c = int(crossed.sum())
    if n_c == 0:
        raise InsufficientCrossingsError(
            f"no crossings among {n} particles; the crossing probability is "
            f"of order 1/H, so use n_particles of at least ~100*H (= {int(100 * Hv)})"
        )
    et, hp, cond, t1c, t1cc, ratio = _crossing_values(life, crossed, Hv)

    rng = Stream.derive(boot_seed, "crossing-boot", 0).numpy_rng("resample")
    boots = np.empty((n_boot, 6))
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        boots[b] = _crossing_values(life[idx], crossed[idx], Hv)
    ses = np.nanstd(boots, axis=0, ddof=1)

    return CrossingStats(
        et_over_h=et,
        et_over_h_stderr=float(ses[0]),
        hp_cross=hp,
        hp_cross_stderr=float(ses[1]),
        cond_t_over_h2=cond,
        cond_t_over_h2_stderr=float(ses[2]),
        t1c_over_h=t1c,
        t1c_over_h_stderr=float(ses[3]),
        t1cc_over_h=t1cc,
        t1cc_over_h_stderr=float(ses[4]),
        ratio=ratio,
        ratio_stderr=float(ses[5]),
        n_particles=n,
        n_crossed=n_c,
        H=int(Hv),
    )


def annealed_average(
    spec: TubeSpec,
    n_envs: int,
    H: int,
    protocol: str,
    base_seed: int,
    n_particles: int,
) -> AnnealedResult:
    """Environment-averaged estimate over independent tube seeds.

    protocol "lifetime" averages mean lifetime / H per environment;
    "crossing" averages H * P[cross].  jensen_factor multiplies the mean
    gate section by the mean inverse gate section over environments — it is
    exactly 1 for degenerate (constant-width) gates and > 1 otherwise,
    quantifying how much the annealed lifetime exceeds the naive plug-in.
    """
    if n_envs < 10:
        raise ValueError(f"n_envs={n_envs}: need >= 10 environments")
    if protocol not in ("lifetime", "crossing"):
        raise ValueError(f"unknown protocol {protocol!r}")
    env_tag = tag64("annealed-env")
    vals = np.empty(n_envs)
    gates = np.empty(n_envs)
    sections = np.empty(n_envs)
    for e in range(n_envs):
        env_seed = hash2(base_seed, env_tag, e)
        tube = build_tube(spec, env_seed)
        ftube = make_finite(tube, H)
        ledger = run_ensemble(ftube, Side.LEFT, n_particles, 1, env_seed, label="annealed")
        if protocol == "lifetime":
            vals[e] = ledger.lifetimes.mean() / H
        else:
            vals[e] = H * ledger.crossed.mean()
        gates[e] = ftube.gate_measure_left
        sections[e] = mean_section_measure(tube, 0.0, float(H))
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n_envs))
    jensen = float(gates.mean() * (1.0 / gates).mean())
    return AnnealedResult(
        mean=mean,
        stderr=stderr,
        jensen_factor=jensen,
        protocol=protocol,
        n_envs=n_envs,
        H=H,
        per_env=vals,
        gate_measures=gates,
        mean_sections=sections,
    )


def dispersion_test(
    counts,
    expected_mean: float,
    autocorr_rho: float = 0.0,
    name: str = "dispersion",
) -> StatTest:
    """Poisson index-of-dispersion test with an optional AR(1) correction.

    Under the Poisson null the dispersion index s^2/mean is 1 with standard
    error sqrt(2/(n-1)); the test passes when |z| < 3 and the sample mean is
    within 3 standard errors of ``expected_mean``.  For serially correlated
    count series (snapshots of one evolving system), pass the lag-1
    autocorrelation: both standard errors are inflated by
    sqrt(1 + 2*rho/(1 - rho)).
    """
    c = np.asarray(counts, dtype=np.float64)
    n = c.size
    if n < 100:
        raise ValueError(f"{n} counts: need >= 100")
    mean = float(c.mean())
    if mean <= 0.0:
        return StatTest(name, math.nan, math.inf, False, "mean must be positive")
    var = float(c.var(ddof=1))
    disp = var / mean
    infl = 1.0
    if autocorr_rho > 0.0:
        infl = math.sqrt(1.0 + 2.0 * autocorr_rho / (1.0 - autocorr_rho))
    z = (disp - 1.0) / (math.sqrt(2.0 / (n - 1)) * infl)
    mean_se = math.sqrt(var / n) * infl
    mean_ok = abs(mean - expected_mean) <= 3.0 * mean_se
    passed = abs(z) < 3.0 and mean_ok
    return StatTest(
        name=name,
        statistic=disp,
        z_or_p=z,
        passed=passed,
        threshold=f"|z| < 3 and |mean - {expected_mean:.6g}| < 3 stderr",
    )


__all__ = [
    "AnnealedResult",
    "CrossingStats",
    "DiffusionFit",
    "InsufficientCrossingsError",
    "MsdCurve",
    "ProfileFit",
    "StatTest",
    "annealed_average",
    "crossing_statistics",
    "dispersion_test",
    "fit_profile_gradient",
    "fit_self_diffusion",
    "loglog_slope",
    "make_time_grid",
    "milne_length",
    "msd_curve",
    "transport_coefficient",
]
