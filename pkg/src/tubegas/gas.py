"""Open-tube Knudsen gas: injection at the gates, absorption, steady state.

Particles do not interact, which this module exploits twice:

* ensemble mode injects n independent particles, records each lifetime and
  per-bin occupation time, and converts time averages into steady-state
  mean counts via Little's law (mean count = arrival rate x mean time);
* event-driven mode replays the actual open system — Poisson arrival times
  at each gate, each arrival's trajectory evaluated at the snapshot times —
  and is used to test Poissonity of the steady state, not for estimation.

Both modes drive the same kernel with per-particle counter-derived streams,
so a particle's path is a pure function of (seed, label, index) and can be
re-simulated bit-identically (event-driven mode relies on this to avoid
storing trajectories).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .billiard import Side, gamma_const, sample_gate_entry
from .geometry import FiniteTube
from .rng import Stream, tag64


@dataclass(frozen=True)
class InjectionConfig:
    """Gate injection rates (left, right); at least one must be positive."""

    lambda_left: float = 0.0
    lambda_right: float = 0.0

    def __post_init__(self):
        if self.lambda_left < 0.0 or self.lambda_right < 0.0:
            raise ValueError("injection rates must be nonnegative")
        if self.lambda_left == 0.0 and self.lambda_right == 0.0:
            raise ValueError("at least one injection rate must be positive")


@dataclass(eq=False)
class OccupationLedger:
    """Columnar per-particle records of one injection ensemble."""

    ftube: FiniteTube
    side: Side
    n_injected: int
    bin_edges: np.ndarray  # m+1 edges spanning [0, H]
    lifetimes: np.ndarray  # (n,)
    crossed: np.ndarray  # (n,) bool: exit at the far gate
    exit_side: np.ndarray  # (n,) int8 of Side
    collisions: np.ndarray  # (n,)
    bin_occupation: np.ndarray  # (n, m) time per bin
    budget_exceeded: np.ndarray  # (n,) bool, never expected to fire

    @property
    def m_bins(self) -> int:
        return self.bin_occupation.shape[1]


@dataclass(eq=False)
class GasSummary:
    """Steady-state quantities from one ledger via Little's law."""

    arrival_rate: float
    mean_counts: np.ndarray  # (m,) steady mean particle count per bin
    mean_counts_stderr: np.ndarray
    mean_counts_cov: np.ndarray  # (m, m) covariance of the mean-count vector
    q: float  # total mean count = arrival_rate * mean_lifetime
    mean_lifetime: float
    mean_lifetime_stderr: float
    current: float  # absorption rate at the far gate
    current_stderr: float
    h_times_current: float
    crossed_fraction: float
    bin_edges: np.ndarray
    n_particles: int
    side: Side
    H: int


@dataclass(eq=False)
class SteadySnapshot:
    """Instantaneous configuration: rows are (x, y, ux, uy)."""

    time: float
    particles: np.ndarray  # (n, 4)

    @property
    def count(self) -> int:
        return self.particles.shape[0]


@dataclass(eq=False)
class EventDrivenResult:
    snapshots: list[SteadySnapshot]
    n_arrivals_left: int
    n_arrivals_right: int
    t_end: float


@dataclass(frozen=True)
class PhaseCell:
    """A phase-space box: positions in [x_lo,x_hi]x[y_lo,y_hi], axial
    direction sign +1 / -1, or 0 for both."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    dir_sign: int = 0

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)


def arrival_rate(lam: float, ftube: FiniteTube, side: Side) -> float:
    """Rate at which injected particles actually enter through a gate.

    The injection intensity lam is per unit gate length and angle-weighted
    by the cosine law, so the total entry rate is
    lam * |gate| / (gamma_2 * |S^1|) = lam * |gate| / pi in d=2.
    """
    if not lam > 0.0:
        raise ValueError(f"lam={lam}: need a positive rate")
    gate = (
        ftube.gate_measure_left if side == Side.LEFT else ftube.gate_measure_right
    )
    return lam * gate / (gamma_const(2) * 2.0 * math.pi)


def run_ensemble(
    ftube: FiniteTube,
    side: Side,
    n_particles: int,
    m_bins: int,
    seed: int,
    label: str | None = None,
) -> OccupationLedger:
    """Inject n independent particles at one gate and record each lifetime.

    Particle i runs on Stream.derive(seed, label, i) (label defaults to
    "gas-left"/"gas-right"), consuming draws in the order: gate position,
    entry direction, then one draw per collision.
    """
    if n_particles < 1:
        raise ValueError("need at least one particle")
    if m_bins < 1:
        raise ValueError("need at least one bin")
    if label is None:
        label = f"gas-{side.name.lower()}"
    tag = tag64(label)
    eng = ftube.realization.engine
    H = float(ftube.H)

    lifetimes = np.empty(n_particles)
    crossed = np.zeros(n_particles, dtype=bool)
    exit_side = np.empty(n_particles, dtype=np.int8)
    collisions = np.empty(n_particles, dtype=np.int64)
    occ = np.zeros((n_particles, m_bins))
    budget = np.zeros(n_particles, dtype=bool)
    far = Side.RIGHT if side == Side.LEFT else Side.LEFT

    for i in range(n_particles):
        s = Stream.derive(seed, tag, i)
        pos, direction = sample_gate_entry(ftube, side, s)
        status, life, coll, k = eng.lifetime(
            pos.x, pos.y, direction[0], direction[1],
            0.0, H, m_bins, occ[i], s.s0, s.k,
        )
        lifetimes[i] = life
        collisions[i] = coll
        if status == 4:
            budget[i] = True
            exit_side[i] = side
            continue
        out = Side.RIGHT if status == 3 else Side.LEFT
        exit_side[i] = out
        crossed[i] = out == far

    return OccupationLedger(
        ftube=ftube,
        side=side,
        n_injected=n_particles,
        bin_edges=np.linspace(0.0, H, m_bins + 1),
        lifetimes=lifetimes,
        crossed=crossed,
        exit_side=exit_side,
        collisions=collisions,
        bin_occupation=occ,
        budget_exceeded=budget,
    )


def steady_state_from_ledger(ledger: OccupationLedger, lam: float) -> GasSummary:
    """Little's-law steady state: mean counts, total count, and current.

    q = arrival_rate * mean_lifetime holds exactly (it is the same sum
    rearranged); the per-bin mean counts decompose q because the bin
    occupations partition each lifetime.
    """
    if ledger.n_injected < 1:
        raise ValueError("empty ledger")
    rate = arrival_rate(lam, ledger.ftube, ledger.side)
    n = ledger.n_injected
    mean_life = float(ledger.lifetimes.mean())
    life_se = float(ledger.lifetimes.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    mean_counts = rate * ledger.bin_occupation.mean(axis=0)
    if n > 1:
        counts_se = rate * ledger.bin_occupation.std(axis=0, ddof=1) / math.sqrt(n)
        counts_cov = (
            rate * rate * np.cov(ledger.bin_occupation, rowvar=False, ddof=1) / n
        )
        counts_cov = np.atleast_2d(counts_cov)
    else:
        counts_se = np.full(ledger.m_bins, math.inf)
        counts_cov = np.full((ledger.m_bins, ledger.m_bins), math.inf)
    p_cross = float(ledger.crossed.mean())
    cross_se = math.sqrt(p_cross * (1.0 - p_cross) / n) if n > 1 else math.inf
    current = rate * p_cross
    return GasSummary(
        arrival_rate=rate,
        mean_counts=mean_counts,
        mean_counts_stderr=counts_se,
        mean_counts_cov=counts_cov,
        q=rate * mean_life,
        mean_lifetime=mean_life,
        mean_lifetime_stderr=life_se,
        current=current,
        current_stderr=rate * cross_se,
        h_times_current=ledger.ftube.H * current,
        crossed_fraction=p_cross,
        bin_edges=ledger.bin_edges,
        n_particles=n,
        side=ledger.side,
        H=ledger.ftube.H,
    )


def run_event_driven(
    ftube: FiniteTube,
    config: InjectionConfig,
    t_warmup: float,
    snapshot_times,
    seed: int,
    label: str = "events",
) -> EventDrivenResult:
    """Literal open-system run from the empty configuration.

    Arrivals at each gate form a Poisson process with the gate's arrival
    rate; each arrival's trajectory is simulated once to get its lifetime,
    and re-simulated (same stream, bit-identical) over the snapshot times it
    overlaps.  Snapshots record every particle present strictly inside.
    """
    times = np.ascontiguousarray(snapshot_times, dtype=np.float64)
    if times.size == 0:
        raise ValueError("need at least one snapshot time")
    if np.any(np.diff(times) < 0.0):
        raise ValueError("snapshot times must be sorted")
    if times[0] < t_warmup:
        raise ValueError("snapshots must not precede the warm-up")
    t_end = float(times[-1])
    eng = ftube.realization.engine
    H = float(ftube.H)
    occ_scratch = np.empty(1)

    per_snap: list[list[tuple[float, float, float, float]]] = [[] for _ in times]
    n_arrivals = {Side.LEFT: 0, Side.RIGHT: 0}

    for side, lam in ((Side.LEFT, config.lambda_left), (Side.RIGHT, config.lambda_right)):
        if lam <= 0.0:
            continue
        rate = arrival_rate(lam, ftube, side)
        arr_stream = Stream.derive(seed, f"{label}-arrivals-{side.name.lower()}", 0)
        ptag = tag64(f"{label}-particle-{side.name.lower()}")
        t_arr = 0.0
        idx = 0
        while True:
            t_arr += arr_stream.exponential(rate)
            if t_arr > t_end:
                break
            s = Stream.derive(seed, ptag, idx)
            pos, direction = sample_gate_entry(ftube, side, s)
            _, life, _, _ = eng.lifetime(
                pos.x, pos.y, direction[0], direction[1],
                0.0, H, 1, occ_scratch, s.s0, s.k,
            )
            # Present at snapshots with t_arr < t_snap < t_arr + life.
            i0 = int(np.searchsorted(times, t_arr, side="right"))
            i1 = int(np.searchsorted(times, t_arr + life, side="left"))
            if i1 > i0:
                rel = times[i0:i1] - t_arr
                s2 = Stream.derive(seed, ptag, idx)
                pos2, dir2 = sample_gate_entry(ftube, side, s2)
                outx = np.empty(rel.shape)
                outy = np.empty(rel.shape)
                outux = np.empty(rel.shape)
                outuy = np.empty(rel.shape)
                none = np.empty(0)
                si, _, _, _, _ = eng.track(
                    pos2.x, pos2.y, dir2[0], dir2[1], rel, 1, 0.0, H,
                    s2.s0, s2.k, outx, outy, outux, outuy, none, none,
                )
                for j in range(si):
                    per_snap[i0 + j].append(
                        (outx[j], outy[j], outux[j], outuy[j])
                    )
            idx += 1
        n_arrivals[side] = idx

    snapshots = [
        SteadySnapshot(
            time=float(t),
            particles=(
                np.array(rows, dtype=np.float64)
                if rows
                else np.empty((0, 4))
            ),
        )
        for t, rows in zip(times, per_snap)
    ]
    return EventDrivenResult(
        snapshots=snapshots,
        n_arrivals_left=n_arrivals[Side.LEFT],
        n_arrivals_right=n_arrivals[Side.RIGHT],
        t_end=t_end,
    )


def snapshot_counts(
    snapshots: list[SteadySnapshot],
    x_edges,
    dir_sign: int = 0,
) -> np.ndarray:
    """Count matrix (n_snapshots, n_bins) of particles per axial bin,
    optionally restricted to one axial direction sign."""
    edges = np.asarray(x_edges, dtype=np.float64)
    out = np.zeros((len(snapshots), edges.size - 1), dtype=np.int64)
    for i, snap in enumerate(snapshots):
        p = snap.particles
        if p.shape[0] == 0:
            continue
        xs = p[:, 0]
        if dir_sign > 0:
            xs = xs[p[:, 2] > 0.0]
        elif dir_sign < 0:
            xs = xs[p[:, 2] < 0.0]
        out[i], _ = np.histogram(xs, bins=edges)
    return out


def poisson_intensity_prediction(
    ftube: FiniteTube,
    config: InjectionConfig,
    cell: PhaseCell,
    n_mc: int,
    stream: Stream,
) -> tuple[float, float]:
    """Predicted steady-state mean count in a phase-space cell.

    The stationary intensity at (position, direction) is, up to the uniform
    1/|S^1| direction factor, mu + (lam - mu) * P[started there with the
    REVERSED direction, the axial coordinate hits 0 before H].  The cell
    mean is that weight averaged over the cell times its phase-space volume
    normalized by |S^1|.  Returns (prediction, stderr); equal rates make the
    weight constant and the stderr zero.
    """
    if n_mc < 1:
        raise ValueError("need at least one Monte Carlo sample")
    tube = ftube.realization
    for x in (cell.x_lo, cell.x_hi):
        lo, hi = tube.section(x)
        if not (0.0 <= cell.x_lo and cell.x_hi <= ftube.H):
            raise ValueError("cell outside [0, H]")
        if cell.y_lo < lo or cell.y_hi > hi:
            raise ValueError(f"cell leaves the tube at x={x}")
    lam = config.lambda_left
    mu = config.lambda_right
    angle_fraction = 1.0 if cell.dir_sign == 0 else 0.5
    volume_over_s1 = cell.area * angle_fraction

    if lam == mu:
        return lam * volume_over_s1, 0.0

    eng = tube.engine
    weights = np.empty(n_mc)
    for i in range(n_mc):
        x = cell.x_lo + (cell.x_hi - cell.x_lo) * stream.unit()
        y = cell.y_lo + (cell.y_hi - cell.y_lo) * stream.unit()
        if cell.dir_sign == 0:
            phi = 2.0 * math.pi * stream.unit()
        elif cell.dir_sign > 0:
            phi = -0.5 * math.pi + math.pi * stream.unit()
        else:
            phi = 0.5 * math.pi + math.pi * stream.unit()
        ux = math.cos(phi)
        uy = math.sin(phi)
        status, _, _, k = eng.first_passage(
            x, y, -ux, -uy, 0.0, float(ftube.H), stream.s0, stream.k
        )
        stream.k = k
        weights[i] = mu + (lam - mu) * (1.0 if status == 2 else 0.0)
    mean_w = float(weights.mean())
    se_w = float(weights.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else math.inf
    return mean_w * volume_over_s1, se_w * volume_over_s1


__all__ = [
    "EventDrivenResult",
    "GasSummary",
    "InjectionConfig",
    "OccupationLedger",
    "PhaseCell",
    "SteadySnapshot",
    "arrival_rate",
    "poisson_intensity_prediction",
    "run_ensemble",
    "run_event_driven",
    "snapshot_counts",
    "steady_state_from_ledger",
]
