"""Single-particle dynamics in a tube.

The embedded walk moves from boundary point to boundary point: at each
collision a new direction is drawn with density proportional to the cosine
of the angle to the inward normal, and the particle flies straight to the
next wall.  The continuous-time process moves at unit speed along that
polygonal path, so elapsed time equals path length.

All randomness flows through ``tubegas.rng.Stream`` objects; the hot loops
run inside the kernel backend, which consumes draws from the same counter
sequence, so a particle's trajectory is one pure function of its stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

import numpy as np

from .geometry import (
    BoundaryPoint,
    FiniteTube,
    NoHitError,
    Point2,
    TubeRealization,
    Wall,
)
from .kernel import BUDGET_COLL, GRAZE
from .rng import Stream

Tube = Union[TubeRealization, FiniteTube]


class BudgetExceededError(RuntimeError):
    """A particle exceeded the per-particle collision budget (a bug flag:
    finite-tube lifetimes have exponential tails, so this should never fire
    at realistic sample sizes)."""


class Side(IntEnum):
    LEFT = 0
    RIGHT = 1


@dataclass(eq=False)
class KsbTrack:
    """Positions/directions of one trajectory sampled on a time grid."""

    times: np.ndarray
    axial: np.ndarray
    transverse: np.ndarray
    dir_x: np.ndarray
    dir_y: np.ndarray
    n_sampled: int
    collisions: int
    collision_points: np.ndarray  # (n_logged, 2); first flights only
    absorbed_time: float  # inf unless absorbing gates ended the track
    status: int


@dataclass(eq=False)
class CrossingRecord:
    """Outcome of one particle in a finite tube with absorbing gates."""

    lifetime: float
    crossed: bool
    exit_side: Side
    bin_occupation: np.ndarray
    collisions: int


@dataclass(frozen=True)
class JumpStats:
    tail_table: tuple[tuple[float, float], ...]  # (u, P[|dx| >= u])
    second_moment: float
    n_samples: int
    max_jump: float


@dataclass(frozen=True)
class PassageResult:
    side: Side
    elapsed: float
    collisions: int


def gamma_const(d: int) -> float:
    """Normalizer of the cosine reflection density on the half-sphere."""
    if d == 2:
        return 0.5
    if d == 3:
        return 1.0 / math.pi
    raise ValueError(f"d={d}: cosine-law dynamics supported for d in {{2, 3}}")


def sample_cosine_direction(normal, d: int, stream: Stream):
    """One unit direction w with w.normal > 0, density ~ cos(angle to normal).

    d=2 uses the exact inverse CDF (the sine of the angle is uniform on
    (-1, 1)); d=3 draws cos^2 of the polar angle uniformly plus a uniform
    azimuth.  Directions with w.normal below the grazing guard are redrawn.
    """
    if d == 2:
        nx, ny = normal
        while True:
            s = stream.symmetric()
            c = math.sqrt(1.0 - s * s)
            if c >= GRAZE:
                break
        return (c * nx - s * ny, c * ny + s * nx)
    if d == 3:
        n = np.asarray(normal, dtype=np.float64)
        t1, t2 = _orthobasis(n)
        while True:
            c = math.sqrt(stream.unit())
            psi = 2.0 * math.pi * stream.unit()
            if c >= GRAZE:
                break
        s = math.sqrt(1.0 - c * c)
        w = c * n + s * (math.cos(psi) * t1 + math.sin(psi) * t2)
        return (w[0], w[1], w[2])
    raise ValueError(f"d={d}: cosine-law dynamics supported for d in {{2, 3}}")


def sample_cosine_directions(normal, d: int, stream: Stream, n: int) -> np.ndarray:
    """Vectorized form of sample_cosine_direction; returns an (n, d) array.

    Equivalent in law to n scalar calls, but batches the unit draws (so the
    counter advances in array order, not per-sample interleaved order).
    """
    if d == 2:
        nx, ny = normal
        ss = 2.0 * stream.unit_array(n) - 1.0
        cc = np.sqrt(1.0 - ss * ss)
        bad = cc < GRAZE
        while bad.any():
            ss[bad] = 2.0 * stream.unit_array(int(bad.sum())) - 1.0
            cc[bad] = np.sqrt(1.0 - ss[bad] * ss[bad])
            bad = cc < GRAZE
        out = np.empty((n, 2))
        out[:, 0] = cc * nx - ss * ny
        out[:, 1] = cc * ny + ss * nx
        return out
    if d == 3:
        nv = np.asarray(normal, dtype=np.float64)
        t1, t2 = _orthobasis(nv)
        cc = np.sqrt(stream.unit_array(n))
        psi = 2.0 * math.pi * stream.unit_array(n)
        bad = cc < GRAZE
        while bad.any():
            cc[bad] = np.sqrt(stream.unit_array(int(bad.sum())))
            psi[bad] = 2.0 * math.pi * stream.unit_array(int(bad.sum()))
            bad = cc < GRAZE
        ss = np.sqrt(1.0 - cc * cc)
        return (
            cc[:, None] * nv[None, :]
            + (ss * np.cos(psi))[:, None] * t1[None, :]
            + (ss * np.sin(psi))[:, None] * t2[None, :]
        )
    raise ValueError(f"d={d}: cosine-law dynamics supported for d in {{2, 3}}")


def _orthobasis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    probe = np.array([1.0, 0.0, 0.0]) if abs(n[0]) <= 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, probe)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2


def _engine_and_gates(tube: Tube):
    if isinstance(tube, FiniteTube):
        return tube.realization.engine, 0.0, float(tube.H), 1
    return tube.engine, 0.0, 0.0, 0


def krw_next(tube: Tube, point: BoundaryPoint, stream: Stream) -> tuple[BoundaryPoint, float]:
    """One embedded-walk step from a boundary point.

    For a FiniteTube, gate-plane crossings absorb: the returned point then
    has wall LeftGate/RightGate and its normal points back into the tube.
    """
    engine, glo, ghi, gated = _engine_and_gates(tube)
    ux, uy = sample_cosine_direction(point.inward_normal, 2, stream)
    status, t, x1, y1, nx, ny, ci, seg, arc = engine.ray_cast(
        point.position.x, point.position.y, ux, uy, glo, ghi, gated
    )
    if status == 4:
        raise NoHitError(
            f"no boundary hit from ({point.position.x}, {point.position.y})"
        )
    nxt = BoundaryPoint(Point2(x1, y1), (nx, ny), Wall(status), ci, seg, arc)
    return nxt, t


def boundary_point_at(tube: Tube, x: float, wall: Wall) -> BoundaryPoint:
    """Boundary point straight above/below the axis point (x, 0)."""
    engine, _, _, _ = _engine_and_gates(tube)
    if wall == Wall.UPPER:
        uy = 1.0
    elif wall == Wall.LOWER:
        uy = -1.0
    else:
        raise ValueError("gate walls have no vertical projection")
    status, t, x1, y1, nx, ny, ci, seg, arc = engine.ray_cast(
        x, 0.0, 0.0, uy, 0.0, 0.0, 0
    )
    if status != int(wall):
        raise NoHitError(f"vertical probe at x={x} missed the {wall.name} wall")
    return BoundaryPoint(Point2(x1, y1), (nx, ny), Wall(status), ci, seg, arc)


_GATE_MODES = {"none": 0, "absorb": 1, "reflect": 2}


def run_ksb(
    tube: Tube,
    start_pos: Point2,
    start_dir,
    t_max: float,
    sample_times,
    stream: Stream,
    gates: str = "none",
    collision_log: int = 0,
) -> KsbTrack:
    """Continuous-time trajectory sampled at the given sorted times.

    ``gates`` selects the behaviour at the planes x=0 and x=H of a
    FiniteTube: "none" (infinite tube), "absorb", or "reflect" (cosine law
    about the inward axial normal).  Passing a plain TubeRealization implies
    "none".
    """
    engine, glo, ghi, gated = _engine_and_gates(tube)
    if isinstance(tube, FiniteTube):
        gmode = _GATE_MODES[gates if gates != "none" else "absorb"]
    else:
        if gates != "none":
            raise ValueError("gate modes need a FiniteTube")
        gmode = 0

    times = np.ascontiguousarray(sample_times, dtype=np.float64)
    if times.size:
        if times[0] < 0.0 or times[-1] > t_max:
            raise ValueError("sample times must lie in [0, t_max]")
        if np.any(np.diff(times) < 0.0):
            raise ValueError("sample times must be sorted")
    outx = np.empty_like(times)
    outy = np.empty_like(times)
    outux = np.empty_like(times)
    outuy = np.empty_like(times)
    cx = np.empty(collision_log)
    cy = np.empty(collision_log)

    ux, uy = start_dir
    si, absorbed, coll, k, status = engine.track(
        start_pos.x, start_pos.y, ux, uy, times, gmode, glo, ghi,
        stream.s0, stream.k, outx, outy, outux, outuy, cx, cy,
    )
    stream.k = k
    if status == 4:
        if coll >= BUDGET_COLL:
            raise BudgetExceededError(f"collision budget hit at t<= {t_max}")
        raise NoHitError("trajectory escaped axially (no wall hit)")
    n_logged = min(coll, collision_log)
    pts = np.stack([cx[:n_logged], cy[:n_logged]], axis=1) if n_logged else np.empty((0, 2))
    return KsbTrack(
        times=times,
        axial=outx[:si],
        transverse=outy[:si],
        dir_x=outux[:si],
        dir_y=outuy[:si],
        n_sampled=si,
        collisions=coll,
        collision_points=pts,
        absorbed_time=absorbed,
        status=status,
    )


def run_lifetime(
    ftube: FiniteTube,
    start_pos: Point2,
    start_dir,
    m_bins: int,
    stream: Stream,
) -> CrossingRecord:
    """Absorbing-gate lifetime of one particle, with per-bin occupation.

    bin_occupation[j] is the time spent with the axial coordinate in
    [j*H/m, (j+1)*H/m); the bins partition the tube so the occupations sum
    to the lifetime.  ``crossed`` means the path reached x=H without ever
    touching x=0 (the trajectory is absorbed at its first gate contact, so
    this is simply exit at the right gate).
    """
    if m_bins < 1:
        raise ValueError(f"m_bins={m_bins}: need at least one bin")
    if not 0.0 <= start_pos.x <= ftube.H:
        raise ValueError(f"start x={start_pos.x} outside [0, {ftube.H}]")
    occ = np.zeros(m_bins)
    ux, uy = start_dir
    status, life, coll, k = ftube.realization.engine.lifetime(
        start_pos.x, start_pos.y, ux, uy, 0.0, float(ftube.H),
        m_bins, occ, stream.s0, stream.k,
    )
    stream.k = k
    if status == 4:
        raise BudgetExceededError("lifetime run exhausted the collision budget")
    side = Side.RIGHT if status == 3 else Side.LEFT
    return CrossingRecord(
        lifetime=life,
        crossed=(side == Side.RIGHT),
        exit_side=side,
        bin_occupation=occ,
        collisions=coll,
    )


def sample_gate_entry(ftube: FiniteTube, side: Side, stream: Stream):
    """Entry state of an injected particle: position uniform on the gate,
    direction cosine-law about the inward axial normal.

    Consumes the stream in the order (position, direction)."""
    if side == Side.LEFT:
        lo, hi = ftube.left_gate
        x = 0.0
        normal = (1.0, 0.0)
    else:
        lo, hi = ftube.right_gate
        x = float(ftube.H)
        normal = (-1.0, 0.0)
    y = lo + (hi - lo) * stream.unit()
    direction = sample_cosine_direction(normal, 2, stream)
    return Point2(x, y), direction


def first_passage_probe(
    tube: TubeRealization,
    start: tuple[Point2, tuple],
    a: float,
    b: float,
    stream: Stream,
) -> PassageResult:
    """Run until the axial coordinate first moves by a (down) or b (up).

    ``a`` and ``b`` are offsets from the start's axial coordinate with
    a <= 0 <= b; a == 0 (or -0.0) is the degenerate immediate-left case.
    """
    if not (a <= 0.0 <= b):
        raise ValueError(f"levels a={a}, b={b}: need a <= 0 <= b")
    pos, direction = start
    ux, uy = direction
    status, elapsed, coll, k = tube.engine.first_passage(
        pos.x, pos.y, ux, uy, pos.x + a, pos.x + b, stream.s0, stream.k
    )
    stream.k = k
    if status == 4:
        raise BudgetExceededError("first-passage run exhausted the collision budget")
    side = Side.RIGHT if status == 3 else Side.LEFT
    return PassageResult(side=side, elapsed=elapsed, collisions=coll)


def run_krw_chain(tube: TubeRealization, start: BoundaryPoint, n_steps: int, stream: Stream):
    """n_steps embedded-walk landings as columnar arrays (dict of ndarrays)."""
    oxs = np.empty(n_steps)
    oys = np.empty(n_steps)
    owall = np.empty(n_steps, dtype=np.int32)
    ocell = np.empty(n_steps, dtype=np.int64)
    oseg = np.empty(n_steps, dtype=np.int32)
    oarc = np.empty(n_steps)
    oflen = np.empty(n_steps)
    onx = np.empty(n_steps)
    ony = np.empty(n_steps)
    nx, ny = start.inward_normal
    done, k = tube.engine.krw_chain(
        start.position.x, start.position.y, nx, ny, n_steps,
        stream.s0, stream.k,
        oxs, oys, owall, ocell, oseg, oarc, oflen, onx, ony,
    )
    stream.k = k
    if done < n_steps:
        raise NoHitError(f"chain escaped axially after {done} steps")
    return {
        "x": oxs, "y": oys, "wall": owall, "cell": ocell, "seg": oseg,
        "arc": oarc, "flight": oflen, "nx": onx, "ny": ony,
    }


def jump_statistics(
    tube: TubeRealization,
    n_samples: int,
    stream: Stream,
    burn_in: int = 1_000,
) -> JumpStats:
    """Axial jump statistics of the embedded walk along one long run.

    The chain starts on the upper wall near x=0.25, runs ``burn_in`` steps
    to forget the start, then records ``n_samples`` consecutive jumps.  The
    tail table reports P[|dx| >= u] on a doubling grid of u until the
    empirical tail reaches zero.
    """
    if n_samples < 10_000:
        raise ValueError(f"n_samples={n_samples}: need at least 10^4")
    start = boundary_point_at(tube, 0.25, Wall.UPPER)
    total = n_samples + burn_in
    chain = run_krw_chain(tube, start, total, stream)
    xs = np.concatenate(([start.position.x], chain["x"]))
    jumps = np.diff(xs)[burn_in:]
    abs_jumps = np.abs(jumps)
    max_jump = float(abs_jumps.max())
    second = float(np.mean(jumps * jumps))
    table = []
    u = 1.0
    while True:
        table.append((u, float(np.mean(abs_jumps >= u))))
        if u > max_jump:
            break
        u *= 2.0
    return JumpStats(
        tail_table=tuple(table),
        second_moment=second,
        n_samples=n_samples,
        max_jump=max_jump,
    )


__all__ = [
    "BudgetExceededError",
    "CrossingRecord",
    "JumpStats",
    "KsbTrack",
    "PassageResult",
    "Side",
    "boundary_point_at",
    "first_passage_probe",
    "gamma_const",
    "jump_statistics",
    "krw_next",
    "run_ksb",
    "run_krw_chain",
    "run_lifetime",
    "sample_cosine_direction",
    "sample_cosine_directions",
    "sample_gate_entry",
]
