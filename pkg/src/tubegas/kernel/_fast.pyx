# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel: statement-for-statement twin of ``_ref.py``.

Any change here must be mirrored in the reference module (and vice versa);
the parity test suite asserts exact float equality between the two backends.
Keep the expression order identical and do not introduce math.h calls beyond
sqrt/floor — together with ``-ffp-contract=off`` that keeps both backends
bit-identical on IEEE-754 hardware.
"""

from libc.math cimport floor, sqrt
from libc.stdint cimport uint64_t

# Python-visible constants (mirrors of the C globals below; keep in sync
# with ``_ref.py``).
EPS_STEP = 1e-9
GRAZE = 1e-9
BUDGET_CELLS = 1_000_000
BUDGET_COLL = 1_000_000_000
FAMILY_STRIP = 0
FAMILY_ROUGH = 1
INF = float("inf")

cdef double C_INF = float("inf")
cdef double C_EPS_STEP = 1e-9
cdef double C_GRAZE = 1e-9
cdef long long C_BUDGET_CELLS = 1000000
cdef long long C_BUDGET_COLL = 1000000000

cdef uint64_t GOLD = <uint64_t>0x9E3779B97F4A7C15
cdef uint64_t MIX_M1 = <uint64_t>0xBF58476D1CE4E5B9
cdef uint64_t MIX_M2 = <uint64_t>0x94D049BB133111EB
cdef uint64_t SEED_TWEAK = <uint64_t>0xA0761D6478BD642F
cdef double INV53 = 1.0 / 9007199254740992.0

cdef uint64_t R_KNOT_UP = 1
cdef uint64_t R_KNOT_LO = 2
cdef uint64_t R_TOOTH_UP = 3
cdef uint64_t R_TOOTH_LO = 4


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX_M1
    z = (z ^ (z >> 27)) * MIX_M2
    return z ^ (z >> 31)


cdef inline uint64_t _hash2(uint64_t seed, uint64_t a, uint64_t b) nogil:
    cdef uint64_t h = _mix64(seed ^ SEED_TWEAK)
    h = _mix64(h + a * GOLD)
    return _mix64(h + b * GOLD)


cdef inline double _u01(uint64_t x) nogil:
    return <double>(x >> 11) * INV53


ctypedef struct CellW:
    double hu0
    double hu1
    double tu
    double hl0
    double hl1
    double tl


ctypedef struct Hit:
    int status
    double t
    double x1
    double y1
    double nx
    double ny
    long long cell
    int seg
    double arc


cdef class Kernel:
    """Compiled twin of the pure-Python reference kernel (same API)."""

    cdef public int family
    cdef public double w_lo
    cdef public double w_hi
    cdef public double w_rng
    cdef public double t_lo
    cdef public double t_hi
    cdef public double t_rng
    cdef uint64_t _seed

    def __init__(self, family, w_lo, w_hi, t_lo, t_hi, seed):
        self.family = int(family)
        self.w_lo = float(w_lo)
        self.w_hi = float(w_hi)
        self.w_rng = float(w_hi) - float(w_lo)
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.t_rng = float(t_hi) - float(t_lo)
        self._seed = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)

    @property
    def seed(self):
        return int(self._seed)

    # ------------------------------------------------------------------
    # cell geometry
    # ------------------------------------------------------------------

    cdef inline double _knot_up(self, long long i) nogil:
        return self.w_lo + self.w_rng * _u01(_hash2(self._seed, R_KNOT_UP, <uint64_t>i))

    cdef inline double _knot_lo(self, long long i) nogil:
        return self.w_lo + self.w_rng * _u01(_hash2(self._seed, R_KNOT_LO, <uint64_t>i))

    cdef inline double _tooth_up(self, long long i) nogil:
        return self.t_lo + self.t_rng * _u01(_hash2(self._seed, R_TOOTH_UP, <uint64_t>i))

    cdef inline double _tooth_lo(self, long long i) nogil:
        return self.t_lo + self.t_rng * _u01(_hash2(self._seed, R_TOOTH_LO, <uint64_t>i))

    cdef CellW _cell(self, long long i) nogil:
        cdef CellW c
        c.hu0 = self._knot_up(i)
        c.hu1 = self._knot_up(i + 1)
        c.hl0 = self._knot_lo(i)
        c.hl1 = self._knot_lo(i + 1)
        c.tu = (c.hu0 if c.hu0 <= c.hu1 else c.hu1) - self._tooth_up(i)
        c.tl = (c.hl0 if c.hl0 <= c.hl1 else c.hl1) - self._tooth_lo(i)
        return c

    def knot_up(self, i):
        return self._knot_up(i)

    def knot_lo(self, i):
        return self._knot_lo(i)

    def tooth_up(self, i):
        return self._tooth_up(i)

    def tooth_lo(self, i):
        return self._tooth_lo(i)

    def cell_data(self, i):
        """(hu0, hu1, tu, hl0, hl1, tl) for cell [i, i+1)."""
        cdef CellW c = self._cell(i)
        return (c.hu0, c.hu1, c.tu, c.hl0, c.hl1, c.tl)

    cdef inline void _section_c(self, double alpha, double* ylo, double* yhi) nogil:
        cdef long long i
        cdef double xf, yu, yl
        cdef CellW c
        if self.family == 0:
            ylo[0] = -self.w_lo
            yhi[0] = self.w_lo
            return
        i = <long long>floor(alpha)
        xf = alpha - i
        c = self._cell(i)
        if xf < 0.5:
            yu = c.hu0 + 2.0 * (c.tu - c.hu0) * xf
            yl = -(c.hl0 + 2.0 * (c.tl - c.hl0) * xf)
        else:
            yu = c.tu + 2.0 * (c.hu1 - c.tu) * (xf - 0.5)
            yl = -(c.tl + 2.0 * (c.hl1 - c.tl) * (xf - 0.5))
        ylo[0] = yl
        yhi[0] = yu

    def section(self, alpha):
        """Open cross-section interval (y_lo, y_hi) at axial coordinate alpha."""
        cdef double lo, hi
        self._section_c(alpha, &lo, &hi)
        return (lo, hi)

    def sections(self, double[::1] alphas, double[::1] out_lo, double[::1] out_hi):
        cdef Py_ssize_t j, n = alphas.shape[0]
        cdef double lo, hi
        for j in range(n):
            self._section_c(alphas[j], &lo, &hi)
            out_lo[j] = lo
            out_hi[j] = hi

    # ------------------------------------------------------------------
    # ray casting
    # ------------------------------------------------------------------

    cdef Hit _cast(self, double x0, double y0, double ux, double uy, double glo, double ghi, int gated) nogil:
        cdef Hit h
        cdef double tg, tc, xf, xL, u0, us, l0, ls, t0, t1, dx0
        cdef double a_up, b_up, a_lo, b_lo, best, x1, nn
        cdef int gstat, sx, p, wall
        cdef long long i, cells
        cdef CellW c

        if self.family == 0:
            return self._strip_cast(x0, y0, ux, uy, glo, ghi, gated)

        # Plane crossings cap the march in time: computed once, compared
        # against wall candidates.  Immune to piece-boundary rounding ties.
        tg = C_INF
        gstat = 0
        if gated != 0 and ux != 0.0:
            if ux > 0.0:
                tc = (ghi - x0) / ux
                if tc > C_EPS_STEP:
                    tg = tc
                    gstat = 3
            else:
                tc = (glo - x0) / ux
                if tc > C_EPS_STEP:
                    tg = tc
                    gstat = 2

        i = <long long>floor(x0)
        xf = x0 - i
        sx = 1 if ux > 0.0 else (-1 if ux < 0.0 else 0)
        if sx < 0 and xf == 0.0:
            i -= 1
            xf = 1.0
        p = 0 if xf < 0.5 else 1
        if sx < 0 and xf == 0.5:
            p = 0
        c = self._cell(i)

        t0 = 0.0
        cells = 0
        while cells <= C_BUDGET_CELLS:
            if p == 0:
                xL = <double>i
                u0 = c.hu0
                us = 2.0 * (c.tu - c.hu0)
                l0 = c.hl0
                ls = 2.0 * (c.tl - c.hl0)
            else:
                xL = i + 0.5
                u0 = c.tu
                us = 2.0 * (c.hu1 - c.tu)
                l0 = c.tl
                ls = 2.0 * (c.hl1 - c.tl)

            if sx > 0:
                t1 = (xL + 0.5 - x0) / ux
            elif sx < 0:
                t1 = (xL - x0) / ux
            else:
                t1 = C_INF

            # Signed distances to the walls along the ray, linear in t within
            # this piece: phi_up = a_up + b_up*t (negative inside),
            # phi_lo = a_lo + b_lo*t (positive inside).
            dx0 = x0 - xL
            a_up = y0 - u0 - us * dx0
            b_up = uy - us * ux
            a_lo = y0 + l0 + ls * dx0
            b_lo = uy + ls * ux

            best = C_INF
            wall = -1
            if b_up > 0.0:
                tc = -a_up / b_up
                if tc < t0:
                    # Started this piece marginally outside (rounding near a
                    # kink) while still moving outward: hit at piece entry.
                    tc = t0
                if tc <= t1 and tc > C_EPS_STEP:
                    best = tc
                    wall = 0
            if b_lo < 0.0:
                tc = -a_lo / b_lo
                if tc < t0:
                    tc = t0
                if tc <= t1 and tc > C_EPS_STEP and tc < best:
                    best = tc
                    wall = 1

            if wall >= 0:
                if tg <= best:
                    return self._plane_hit(gstat, tg, y0, uy, glo, ghi)
                x1 = x0 + best * ux
                if wall == 0:
                    h.y1 = u0 + us * (x1 - xL)
                    nn = sqrt(1.0 + us * us)
                    h.status = 0
                    h.t = best
                    h.x1 = x1
                    h.nx = us / nn
                    h.ny = -1.0 / nn
                    h.cell = i
                    h.seg = p
                    h.arc = (x1 - xL) * nn
                    return h
                h.y1 = -(l0 + ls * (x1 - xL))
                nn = sqrt(1.0 + ls * ls)
                h.status = 1
                h.t = best
                h.x1 = x1
                h.nx = ls / nn
                h.ny = 1.0 / nn
                h.cell = i
                h.seg = p
                h.arc = (x1 - xL) * nn
                return h

            if gstat != 0 and tg <= t1:
                return self._plane_hit(gstat, tg, y0, uy, glo, ghi)
            if sx == 0:
                # Vertical ray found no wall: degenerate start (within
                # EPS_STEP of the target wall).  Report no-hit.
                h.status = 4
                h.t = 0.0
                h.x1 = x0
                h.y1 = y0
                h.nx = 0.0
                h.ny = 0.0
                h.cell = i
                h.seg = p
                h.arc = 0.0
                return h

            t0 = t1
            if sx > 0:
                if p == 0:
                    p = 1
                else:
                    p = 0
                    i += 1
                    cells += 1
                    c = self._cell(i)
            else:
                if p == 1:
                    p = 0
                else:
                    p = 1
                    i -= 1
                    cells += 1
                    c = self._cell(i)

        h.status = 4
        h.t = 0.0
        h.x1 = x0
        h.y1 = y0
        h.nx = 0.0
        h.ny = 0.0
        h.cell = i
        h.seg = p
        h.arc = 0.0
        return h

    cdef Hit _plane_hit(self, int gstat, double tg, double y0, double uy, double glo, double ghi) nogil:
        cdef Hit h
        if gstat == 2:
            h.x1 = glo
            h.nx = 1.0
        else:
            h.x1 = ghi
            h.nx = -1.0
        h.y1 = y0 + tg * uy
        h.status = gstat
        h.t = tg
        h.ny = 0.0
        h.cell = <long long>floor(h.x1)
        h.seg = 0
        h.arc = h.y1
        return h

    cdef Hit _strip_cast(self, double x0, double y0, double ux, double uy, double glo, double ghi, int gated) nogil:
        cdef Hit h
        cdef double w = self.w_lo
        cdef double tg, tc, t, y1, ny, x1
        cdef int gstat, wall
        cdef long long ci
        tg = C_INF
        gstat = 0
        if gated != 0 and ux != 0.0:
            if ux > 0.0:
                tc = (ghi - x0) / ux
                if tc > C_EPS_STEP:
                    tg = tc
                    gstat = 3
            else:
                tc = (glo - x0) / ux
                if tc > C_EPS_STEP:
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
            t = C_INF
            wall = -1
            y1 = 0.0
            ny = 0.0
        if t <= C_EPS_STEP:
            t = C_INF
            wall = -1
        if gstat != 0 and tg <= t:
            return self._plane_hit(gstat, tg, y0, uy, glo, ghi)
        if wall < 0:
            h.status = 4
            h.t = 0.0
            h.x1 = x0
            h.y1 = y0
            h.nx = 0.0
            h.ny = 0.0
            h.cell = <long long>floor(x0)
            h.seg = 0
            h.arc = 0.0
            return h
        x1 = x0 + t * ux
        ci = <long long>floor(x1)
        h.status = wall
        h.t = t
        h.x1 = x1
        h.y1 = y1
        h.nx = 0.0
        h.ny = ny
        h.cell = ci
        h.seg = 0
        h.arc = x1 - ci
        return h

    def ray_cast(self, x0, y0, ux, uy, glo, ghi, gated):
        """First intersection of the ray with the walls (and, if ``gated``,
        with the planes x=glo / x=ghi, which win against any later wall hit).

        Returns (status, t, x1, y1, nx, ny, cell, seg, arc).
        """
        cdef Hit h = self._cast(x0, y0, ux, uy, glo, ghi, gated)
        return (h.status, h.t, h.x1, h.y1, h.nx, h.ny, h.cell, h.seg, h.arc)

    # ------------------------------------------------------------------
    # cosine-law redirection
    # ------------------------------------------------------------------

    cdef inline void _newdir(self, double nx, double ny, uint64_t s0, uint64_t* k, double* ux, double* uy) nogil:
        cdef double s, c
        while True:
            k[0] += 1
            s = 2.0 * _u01(_mix64(s0 + k[0] * GOLD)) - 1.0
            c = sqrt(1.0 - s * s)
            if c >= C_GRAZE:
                break
        ux[0] = c * nx - s * ny
        uy[0] = c * ny + s * nx

    def newdir(self, nx, ny, s0, k):
        """Cosine-law inward direction about unit normal (nx, ny); (ux, uy, k')."""
        cdef uint64_t kk = <uint64_t>(int(k) & 0xFFFFFFFFFFFFFFFF)
        cdef double ux, uy
        self._newdir(nx, ny, <uint64_t>(int(s0) & 0xFFFFFFFFFFFFFFFF), &kk, &ux, &uy)
        return (ux, uy, int(kk))

    # ------------------------------------------------------------------
    # particle loops
    # ------------------------------------------------------------------

    def lifetime(self, double x0, double y0, double ux, double uy, double glo, double ghi,
                 long long m, double[::1] occ, s0, k):
        """Run until absorption at x=glo or x=ghi; accumulate per-bin
        occupation times into ``occ``.  Returns (status, lifetime, collisions, k).
        """
        cdef uint64_t cs0 = <uint64_t>(int(s0) & 0xFFFFFFFFFFFFFFFF)
        cdef uint64_t ck = <uint64_t>(int(k) & 0xFFFFFFFFFFFFFFFF)
        cdef double life, binw, t, xa, xb, rate, lo_edge, hi_edge, seg_lo, seg_hi
        cdef long long coll, j, ja, jb
        cdef int status
        cdef Hit h

        if x0 <= glo and ux < 0.0:
            return (2, 0.0, 0, int(ck))
        if x0 >= ghi and ux > 0.0:
            return (3, 0.0, 0, int(ck))
        life = 0.0
        coll = 0
        binw = (ghi - glo) / m
        status = 4
        while True:
            h = self._cast(x0, y0, ux, uy, glo, ghi, 1)
            status = h.status
            if status == 4:
                break
            t = h.t
            if h.x1 >= x0:
                xa = x0
                xb = h.x1
            else:
                xa = h.x1
                xb = x0
            if xb - xa <= 0.0:
                j = <long long>((x0 - glo) / binw)
                if j < 0:
                    j = 0
                if j >= m:
                    j = m - 1
                occ[j] += t
            else:
                rate = t / (xb - xa)
                ja = <long long>((xa - glo) / binw)
                if ja < 0:
                    ja = 0
                jb = <long long>((xb - glo) / binw)
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
            x0 = h.x1
            y0 = h.y1
            if status == 2 or status == 3:
                break
            coll += 1
            if coll >= C_BUDGET_COLL:
                status = 4
                break
            self._newdir(h.nx, h.ny, cs0, &ck, &ux, &uy)
            # A collision landing exactly on a plane with an outward draw is
            # an absorption (touching the plane ends the lifetime).
            if x0 <= glo and ux < 0.0:
                status = 2
                break
            if x0 >= ghi and ux > 0.0:
                status = 3
                break
        return (status, life, coll, int(ck))

    def track(self, double x0, double y0, double ux, double uy, double[::1] times,
              int gmode, double glo, double ghi, s0, k,
              double[::1] outx, double[::1] outy, double[::1] outux, double[::1] outuy,
              double[::1] cx, double[::1] cy):
        """Sample the trajectory at the sorted ``times``.

        gmode: 0 infinite tube, 1 absorbing planes, 2 reflecting planes.
        Returns (n_sampled, absorbed_time, collisions, k, status).
        """
        cdef uint64_t cs0 = <uint64_t>(int(s0) & 0xFFFFFFFFFFFFFFFF)
        cdef uint64_t ck = <uint64_t>(int(k) & 0xFFFFFFFFFFFFFFFF)
        cdef Py_ssize_t n = times.shape[0]
        cdef Py_ssize_t cap = cx.shape[0]
        cdef Py_ssize_t si = 0
        cdef double t_now = 0.0
        cdef long long coll = 0
        cdef double absorbed = C_INF
        cdef int gated = 1 if gmode >= 1 else 0
        cdef int status = 0
        cdef double t_end, tau, nx, ny
        cdef Hit h

        while si < n:
            h = self._cast(x0, y0, ux, uy, glo, ghi, gated)
            status = h.status
            if status == 4:
                break
            t_end = t_now + h.t
            while si < n and times[si] <= t_end:
                tau = times[si] - t_now
                outx[si] = x0 + tau * ux
                outy[si] = y0 + tau * uy
                outux[si] = ux
                outuy[si] = uy
                si += 1
            t_now = t_end
            x0 = h.x1
            y0 = h.y1
            if coll < cap:
                cx[coll] = h.x1
                cy[coll] = h.y1
            if gmode == 1 and status >= 2:
                absorbed = t_now
                break
            nx = h.nx
            ny = h.ny
            if status >= 2:
                nx = 1.0 if status == 2 else -1.0
                ny = 0.0
            self._newdir(nx, ny, cs0, &ck, &ux, &uy)
            coll += 1
            if gmode == 2:
                if x0 <= glo and ux < 0.0:
                    ux = -ux
                elif x0 >= ghi and ux > 0.0:
                    ux = -ux
            if coll >= C_BUDGET_COLL:
                status = 4
                break
        return (si, absorbed, coll, int(ck), status)

    def krw_chain(self, double x0, double y0, double nx, double ny, long long n, s0, k,
                  double[::1] oxs, double[::1] oys, int[::1] owall, long long[::1] ocell,
                  int[::1] oseg, double[::1] oarc, double[::1] oflen,
                  double[::1] onx, double[::1] ony):
        """n embedded-walk steps recording each landing; (steps_done, k)."""
        cdef uint64_t cs0 = <uint64_t>(int(s0) & 0xFFFFFFFFFFFFFFFF)
        cdef uint64_t ck = <uint64_t>(int(k) & 0xFFFFFFFFFFFFFFFF)
        cdef long long j
        cdef double ux, uy
        cdef Hit h
        for j in range(n):
            self._newdir(nx, ny, cs0, &ck, &ux, &uy)
            h = self._cast(x0, y0, ux, uy, 0.0, 0.0, 0)
            if h.status == 4:
                return (j, int(ck))
            x0 = h.x1
            y0 = h.y1
            nx = h.nx
            ny = h.ny
            oxs[j] = h.x1
            oys[j] = h.y1
            owall[j] = h.status
            ocell[j] = h.cell
            oseg[j] = h.seg
            oarc[j] = h.arc
            oflen[j] = h.t
            onx[j] = h.nx
            ony[j] = h.ny
        return (n, int(ck))

    def first_passage(self, double x0, double y0, double ux, double uy, double lo, double hi, s0, k):
        """Run until the axial coordinate first touches lo or hi.

        Returns (status, elapsed, collisions, k), status 2 for lo / 3 for hi.
        """
        cdef uint64_t cs0 = <uint64_t>(int(s0) & 0xFFFFFFFFFFFFFFFF)
        cdef uint64_t ck = <uint64_t>(int(k) & 0xFFFFFFFFFFFFFFFF)
        cdef double t_now = 0.0
        cdef long long coll = 0
        cdef Hit h
        if x0 <= lo:
            return (2, 0.0, 0, int(ck))
        if x0 >= hi:
            return (3, 0.0, 0, int(ck))
        while True:
            h = self._cast(x0, y0, ux, uy, lo, hi, 1)
            if h.status == 4:
                return (4, t_now, coll, int(ck))
            t_now += h.t
            x0 = h.x1
            y0 = h.y1
            if h.status >= 2:
                return (h.status, t_now, coll, int(ck))
            coll += 1
            if coll >= C_BUDGET_COLL:
                return (4, t_now, coll, int(ck))
            self._newdir(h.nx, h.ny, cs0, &ck, &ux, &uy)
            if x0 <= lo and ux < 0.0:
                return (2, t_now, coll, int(ck))
            if x0 >= hi and ux > 0.0:
                return (3, t_now, coll, int(ck))
