"""Pure-Python reference kernel.

This module defines the exact semantics of the hot simulation loops: wall
geometry of procedurally generated cells, first ray/boundary intersection,
cosine-law redirection, and the particle-level loops built on them (chains,
lifetimes, time-sampled tracks, first passages).

The compiled twin (``_fast.pyx``) re-implements these functions statement for
statement.  To keep the two backends bit-identical:

* only ``+ - * /``, ``sqrt`` and ``floor`` are used (all IEEE-754 correctly
  rounded; no trig anywhere — the cosine sampler needs only a square root);
* expression order is never "simplified" in one backend only;
* the extension is compiled with ``-ffp-contract=off`` so no FMA contraction
  is introduced.

Parity is asserted by tests, not assumed.

Conventions used throughout:

* a tube is an infinite channel around the x axis; ``upper(x)`` and
  ``lower(x)`` are piecewise-linear walls with kinks at half-integers only;
* status codes: 0 upper wall, 1 lower wall, 2 low/left plane, 3 high/right
  plane, 4 no hit (budget exhausted or axial escape);
* ``(s0, k)`` is a draw stream: draw ``k`` is ``mix64(s0 + k*GOLD)`` with the
  counter pre-incremented, matching ``tubegas.rng.Stream``.
"""

from __future__ import annotations

from math import floor, sqrt

from ..rng import GOLD, MASK64, hash2, mix64, u01

INF = float("inf")

# Minimum advance along a ray before an intersection counts: lets a ray leave
# the boundary point it starts on.
EPS_STEP = 1e-9
# Resample threshold on (direction . normal) for the cosine sampler.
GRAZE = 1e-9
# March at most this many cells per ray before reporting "no hit".
BUDGET_CELLS = 1_000_000
# Collision budget per particle; exceeding it flags a bug, not physics.
BUDGET_COLL = 1_000_000_000

FAMILY_STRIP = 0
FAMILY_ROUGH = 1

# Roles for per-cell hashed randomness.
_R_KNOT_UP = 1
_R_KNOT_LO = 2
_R_TOOTH_UP = 3
_R_TOOTH_LO = 4


class Kernel:
    """Geometry + dynamics engine for one tube realization.

    Parameters mirror the tube spec: ``family`` 0 is a flat strip of
    half-width ``w_lo`` (the other parameters are ignored), family 1 is the
    rough random channel with knot half-widths uniform in [w_lo, w_hi] and
    tooth depths uniform in [t_lo, t_hi], all hashed from ``seed``.
    """

    __slots__ = ("family", "w_lo", "w_hi", "w_rng", "t_lo", "t_hi", "t_rng", "seed")

    def __init__(self, family, w_lo, w_hi, t_lo, t_hi, seed):
        self.family = int(family)
        self.w_lo = float(w_lo)
        self.w_hi = float(w_hi)
        self.w_rng = float(w_hi) - float(w_lo)
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.t_rng = float(t_hi) - float(t_lo)
        self.seed = int(seed) & MASK64

    # ------------------------------------------------------------------
    # cell geometry
    # ------------------------------------------------------------------

    def knot_up(self, i):
        return self.w_lo + self.w_rng * u01(hash2(self.seed, _R_KNOT_UP, i))

    def knot_lo(self, i):
        return self.w_lo + self.w_rng * u01(hash2(self.seed, _R_KNOT_LO, i))

    def tooth_up(self, i):
        return self.t_lo + self.t_rng * u01(hash2(self.seed, _R_TOOTH_UP, i))

    def tooth_lo(self, i):
        return self.t_lo + self.t_rng * u01(hash2(self.seed, _R_TOOTH_LO, i))

    def cell_data(self, i):
        """(hu0, hu1, tu, hl0, hl1, tl) for cell [i, i+1).

        hu0/hu1 are upper knot half-widths at x=i and x=i+1, tu the upper
        tooth tip height at x=i+0.5; hl*/tl likewise for the (independent)
        lower wall, as depths below the axis.
        """
        hu0 = self.knot_up(i)
        hu1 = self.knot_up(i + 1)
        hl0 = self.knot_lo(i)
        hl1 = self.knot_lo(i + 1)
        tu = (hu0 if hu0 <= hu1 else hu1) - self.tooth_up(i)
        tl = (hl0 if hl0 <= hl1 else hl1) - self.tooth_lo(i)
        return hu0, hu1, tu, hl0, hl1, tl

    def section(self, alpha):
        """Open cross-section interval (y_lo, y_hi) at axial coordinate alpha."""
        if self.family == FAMILY_STRIP:
            return (-self.w_lo, self.w_lo)
        i = int(floor(alpha))
        xf = alpha - i
        hu0, hu1, tu, hl0, hl1, tl = self.cell_data(i)
        if xf < 0.5:
            yu = hu0 + 2.0 * (tu - hu0) * xf
            yl = -(hl0 + 2.0 * (tl - hl0) * xf)
        else:
            yu = tu + 2.0 * (hu1 - tu) * (xf - 0.5)
            yl = -(tl + 2.0 * (hl1 - tl) * (xf - 0.5))
        return (yl, yu)

    def sections(self, alphas, out_lo, out_hi):
        n = len(alphas)
        for j in range(n):
            lo, hi = self.section(alphas[j])
            out_lo[j] = lo
            out_hi[j] = hi

    # ------------------------------------------------------------------
    # ray casting
    # ------------------------------------------------------------------

    def ray_cast(self, x0, y0, ux, uy, glo, ghi, gated):
        """First intersection of the ray with the walls (and, if ``gated``,
        with the planes x=glo / x=ghi, which win against any later wall hit).

        Returns (status, t, x1, y1, nx, ny, cell, seg, arc): hit point, inward
        unit normal, cell index, segment index within the cell, and arc-length
        position along the segment (for plane hits, arc is the raw y).
        """
        if self.family == FAMILY_STRIP:
            return self._strip_cast(x0, y0, ux, uy, glo, ghi, gated)

        # Plane crossings cap the march in time: computed once, compared
        # against wall candidates.  Immune to piece-boundary rounding ties.
        tg = INF
        gstat = 0
        if gated != 0 and ux != 0.0:
            if ux > 0.0:
                tc = (ghi - x0) / ux
                if tc > EPS_STEP:
                    tg = tc
                    gstat = 3
            else:
                tc = (glo - x0) / ux
                if tc > EPS_STEP:
                    tg = tc
                    gstat = 2

        i = int(floor(x0))
        xf = x0 - i
        sx = 1 if ux > 0.0 else (-1 if ux < 0.0 else 0)
        if sx < 0 and xf == 0.0:
            i -= 1
            xf = 1.0
        p = 0 if xf < 0.5 else 1
        if sx < 0 and xf == 0.5:
            p = 0
        hu0, hu1, tu, hl0, hl1, tl = self.cell_data(i)

        t0 = 0.0
        cells = 0
        while cells <= BUDGET_CELLS:
            if p == 0:
                xL = float(i)
                u0 = hu0
                us = 2.0 * (tu - hu0)
                l0 = hl0
                ls = 2.0 * (tl - hl0)
            else:
                xL = i + 0.5
                u0 = tu
                us = 2.0 * (hu1 - tu)
                l0 = tl
                ls = 2.0 * (hl1 - tl)

            if sx > 0:
                t1 = (xL + 0.5 - x0) / ux
            elif sx < 0:
                t1 = (xL - x0) / ux
            else:
                t1 = INF

            # Signed distances to the walls along the ray, linear in t within
            # this piece: phi_up = a_up + b_up*t (negative inside),
            # phi_lo = a_lo + b_lo*t (positive inside).
            dx0 = x0 - xL
            a_up = y0 - u0 - us * dx0
            b_up = uy - us * ux
            a_lo = y0 + l0 + ls * dx0
            b_lo = uy + ls * ux

            best = INF
            wall = -1
            if b_up > 0.0:
                tc = -a_up / b_up
                if tc < t0:
                    # Started this piece marginally outside (rounding near a
                    # kink) while still moving outward: hit at piece entry.
                    tc = t0
                if tc <= t1 and tc > EPS_STEP:
                    best = tc
                    wall = 0
            if b_lo < 0.0:
                tc = -a_lo / b_lo
                if tc < t0:
                    tc = t0
                if tc <= t1 and tc > EPS_STEP and tc < best:
                    best = tc
                    wall = 1

            if wall >= 0:
                if tg <= best:
                    return self._plane_hit(gstat, tg, y0, uy, glo, ghi)
                x1 = x0 + best * ux
                if wall == 0:
                    y1 = u0 + us * (x1 - xL)
                    nn = sqrt(1.0 + us * us)
                    return (0, best, x1, y1, us / nn, -1.0 / nn, i, p, (x1 - xL) * nn)
                y1 = -(l0 + ls * (x1 - xL))
                nn = sqrt(1.0 + ls * ls)
                return (1, best, x1, y1, ls / nn, 1.0 / nn, i, p, (x1 - xL) * nn)

            if gstat != 0 and tg <= t1:
                return self._plane_hit(gstat, tg, y0, uy, glo, ghi)
            if sx == 0:
                # Vertical ray found no wall: degenerate start (within
                # EPS_STEP of the target wall).  Report no-hit.
                return (4, 0.0, x0, y0, 0.0, 0.0, i, p, 0.0)

            t0 = t1
            if sx > 0:
                if p == 0:
                    p = 1
                else:
                    p = 0
                    i += 1
                    cells += 1
                    hu0, hu1, tu, hl0, hl1, tl = self.cell_data(i)
            else:
                if p == 1:
                    p = 0
                else:
                    p = 1
                    i -= 1
                    cells += 1
                    hu0, hu1, tu, hl0, hl1, tl = self.cell_data(i)
        return (4, 0.0, x0, y0, 0.0, 0.0, i, p, 0.0)

    def _plane_hit(self, gstat, tg, y0, uy, glo, ghi):
        if gstat == 2:
            x1 = glo
            nx = 1.0
        else:
            x1 = ghi
            nx = -1.0
        y1 = y0 + tg * uy
        return (gstat, tg, x1, y1, nx, 0.0, int(floor(x1)), 0, y1)

    def _strip_cast(self, x0, y0, ux, uy, glo, ghi, gated):
        w = self.w_lo
        tg = INF
        gstat = 0
        if gated != 0 and ux != 0.0:
            if ux > 0.0:
                tc = (ghi - x0) / ux
                if tc > EPS_STEP:
                    tg = tc
                    gstat = 3
            else:
                tc = (glo - x0) / ux
                if tc > EPS_STEP:
                    tg = tc
                    gstat = 2
        if uy > 0.0:
            t = (w - y0) / uy
            wall = 0
            y1 = w
            ny = -1.0
        elif uy < 0.0:
            t = (-w - y0) / uy
            wall = 1
            y1 = -w
            ny = 1.0
        else:
            t = INF
            wall = -1
            y1 = 0.0
            ny = 0.0
        if t <= EPS_STEP:
            t = INF
            wall = -1
        if gstat != 0 and tg <= t:
            return self._plane_hit(gstat, tg, y0, uy, glo, ghi)
        if wall < 0:
            return (4, 0.0, x0, y0, 0.0, 0.0, int(floor(x0)), 0, 0.0)
        x1 = x0 + t * ux
        ci = int(floor(x1))
        return (wall, t, x1, y1, 0.0, ny, ci, 0, x1 - ci)

    # ------------------------------------------------------------------
    # cosine-law redirection
    # ------------------------------------------------------------------

    def newdir(self, nx, ny, s0, k):
        """Sample an inward direction about unit normal (nx, ny) with density
        proportional to the cosine of the angle to the normal.

        Exact inverse-CDF: the sine of the angle is uniform on (-1, 1), so no
        trig is needed.  Returns (ux, uy, k').
        """
        while True:
            k += 1
            s = 2.0 * u01(mix64((s0 + k * GOLD) & MASK64)) - 1.0
            c = sqrt(1.0 - s * s)
            if c >= GRAZE:
                break
        return (c * nx - s * ny, c * ny + s * nx, k)

    # ------------------------------------------------------------------
    # particle loops
    # ------------------------------------------------------------------

    def lifetime(self, x0, y0, ux, uy, glo, ghi, m, occ, s0, k):
        """Run until absorption at x=glo or x=ghi; accumulate per-bin
        occupation times into ``occ`` (length m, spanning [glo, ghi]).

        Returns (status, lifetime, collisions, k).
        """
        if x0 <= glo and ux < 0.0:
            return (2, 0.0, 0, k)
        if x0 >= ghi and ux > 0.0:
            return (3, 0.0, 0, k)
        life = 0.0
        coll = 0
        binw = (ghi - glo) / m
        status = 4
        while True:
            status, t, x1, y1, nx, ny, ci, si, arc = self.ray_cast(x0, y0, ux, uy, glo, ghi, 1)
            if status == 4:
                break
            if x1 >= x0:
                xa = x0
                xb = x1
            else:
                xa = x1
                xb = x0
            if xb - xa <= 0.0:
                j = int((x0 - glo) / binw)
                if j < 0:
                    j = 0
                if j >= m:
                    j = m - 1
                occ[j] += t
            else:
                rate = t / (xb - xa)
                ja = int((xa - glo) / binw)
                if ja < 0:
                    ja = 0
                jb = int((xb - glo) / binw)
                if jb >= m:
                    jb = m - 1
                if ja == jb:
                    occ[ja] += t
                else:
                    for j in range(ja, jb + 1):
                        lo_edge = glo + binw * j
                        hi_edge = lo_edge + binw
                        seg_lo = xa if xa > lo_edge else lo_edge
                        seg_hi = xb if xb < hi_edge else hi_edge
                        if seg_hi > seg_lo:
                            occ[j] += rate * (seg_hi - seg_lo)
            life += t
            x0 = x1
            y0 = y1
            if status == 2 or status == 3:
                break
            coll += 1
            if coll >= BUDGET_COLL:
                status = 4
                break
            ux, uy, k = self.newdir(nx, ny, s0, k)
            # A collision landing exactly on a plane with an outward draw is
            # an absorption (touching the plane ends the lifetime).
            if x0 <= glo and ux < 0.0:
                status = 2
                break
            if x0 >= ghi and ux > 0.0:
                status = 3
                break
        return (status, life, coll, k)

    def track(self, x0, y0, ux, uy, times, gmode, glo, ghi, s0, k, outx, outy, outux, outuy, cx, cy):
        """Sample the trajectory at the sorted ``times``.

        gmode: 0 infinite tube, 1 absorbing planes, 2 reflecting planes
        (cosine law about the inward axial normal).  Fills position/direction
        arrays up to the number of samples reached; logs the first len(cx)
        collision points into (cx, cy).

        Returns (n_sampled, absorbed_time, collisions, k, status).
        """
        n = len(times)
        cap = len(cx)
        si = 0
        t_now = 0.0
        coll = 0
        absorbed = INF
        gated = 1 if gmode >= 1 else 0
        status = 0
        while si < n:
            status, t, x1, y1, nx, ny, ci, sgi, arc = self.ray_cast(x0, y0, ux, uy, glo, ghi, gated)
            if status == 4:
                break
            t_end = t_now + t
            while si < n and times[si] <= t_end:
                tau = times[si] - t_now
                outx[si] = x0 + tau * ux
                outy[si] = y0 + tau * uy
                outux[si] = ux
                outuy[si] = uy
                si += 1
            t_now = t_end
            x0 = x1
            y0 = y1
            if coll < cap:
                cx[coll] = x1
                cy[coll] = y1
            if gmode == 1 and status >= 2:
                absorbed = t_now
                break
            if status >= 2:
                nx = 1.0 if status == 2 else -1.0
                ny = 0.0
            ux, uy, k = self.newdir(nx, ny, s0, k)
            coll += 1
            if gmode == 2:
                if x0 <= glo and ux < 0.0:
                    ux = -ux
                elif x0 >= ghi and ux > 0.0:
                    ux = -ux
            if coll >= BUDGET_COLL:
                status = 4
                break
        return (si, absorbed, coll, k, status)

    def krw_chain(self, x0, y0, nx, ny, n, s0, k, oxs, oys, owall, ocell, oseg, oarc, oflen, onx, ony):
        """n embedded-walk steps from boundary point (x0, y0) with inward
        normal (nx, ny), recording each landing point.

        Returns (steps_done, k); steps_done < n only on a no-hit.
        """
        for j in range(n):
            ux, uy, k = self.newdir(nx, ny, s0, k)
            status, t, x1, y1, nx1, ny1, ci, si, arc = self.ray_cast(x0, y0, ux, uy, 0.0, 0.0, 0)
            if status == 4:
                return (j, k)
            x0 = x1
            y0 = y1
            nx = nx1
            ny = ny1
            oxs[j] = x1
            oys[j] = y1
            owall[j] = status
            ocell[j] = ci
            oseg[j] = si
            oarc[j] = arc
            oflen[j] = t
            onx[j] = nx1
            ony[j] = ny1
        return (n, k)

    def first_passage(self, x0, y0, ux, uy, lo, hi, s0, k):
        """Run until the axial coordinate first touches lo or hi.

        Returns (status, elapsed, collisions, k) with status 2 for lo, 3 for
        hi (4 only on budget exhaustion).
        """
        if x0 <= lo:
            return (2, 0.0, 0, k)
        if x0 >= hi:
            return (3, 0.0, 0, k)
        t_now = 0.0
        coll = 0
        while True:
            status, t, x1, y1, nx, ny, ci, si, arc = self.ray_cast(x0, y0, ux, uy, lo, hi, 1)
            if status == 4:
                return (4, t_now, coll, k)
            t_now += t
            x0 = x1
            y0 = y1
            if status >= 2:
                return (status, t_now, coll, k)
            coll += 1
            if coll >= BUDGET_COLL:
                return (4, t_now, coll, k)
            ux, uy, k = self.newdir(nx, ny, s0, k)
            if x0 <= lo and ux < 0.0:
                return (2, t_now, coll, k)
            if x0 >= hi and ux > 0.0:
                return (3, t_now, coll, k)
