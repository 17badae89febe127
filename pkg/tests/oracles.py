"""Independent brute-force referees for the geometry kernel.

Everything here is deliberately dumb: walls are evaluated point by point from
the hashed cell data (the tube's *definition*, shared with the kernel), and
first intersections are found by dense marching along the ray plus bisection,
never by the kernel's incremental segment algebra.  Slow, vectorized enough
to be usable, and wrong only if the tube definition itself is wrong.
"""

from __future__ import annotations

import numpy as np

_R_KNOT_UP = 1
_R_KNOT_LO = 2
_R_TOOTH_UP = 3
_R_TOOTH_LO = 4

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWEAK = np.uint64(0xA0761D6478BD642F)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def cell_u01(seed, role, idx):
    """Vectorized (seed, role, cell) -> uniform double, the cell-randomness
    addressing convention shared with the kernel."""
    idx = np.asarray(idx, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):  # modular 64-bit arithmetic is the point
        h = _mix(np.uint64(seed) ^ _TWEAK)
        h = _mix(h + np.uint64(role) * _GOLD)
        h = _mix(h + idx * _GOLD)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class OracleTube:
    """Point-evaluated twin of a tube realization.

    ``family`` 0: flat strip of half-width ``w_lo``.  Family 1: the rough
    random channel — knot half-widths uniform in [w_lo, w_hi] hashed per
    integer station, tooth tips at half-integers, upper and lower walls
    independent.
    """

    def __init__(self, family, w_lo, w_hi, t_lo, t_hi, seed):
        self.family = int(family)
        self.w_lo = float(w_lo)
        self.w_hi = float(w_hi)
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.seed = int(seed)

    def _knots(self, idx, role):
        return self.w_lo + (self.w_hi - self.w_lo) * cell_u01(self.seed, role, idx)

    def _teeth(self, idx, role):
        return self.t_lo + (self.t_hi - self.t_lo) * cell_u01(self.seed, role, idx)

    def walls_at(self, xs):
        """(y_lower, y_upper) wall heights at axial positions ``xs``.

        Each wall over cell [i, i+1) is the tent  knot(i) → tip → knot(i+1)
        with the tip at x = i + 1/2 dropped ``tooth`` below the lower of the
        two knots.  Evaluated directly from that description.
        """
        xs = np.asarray(xs, dtype=float)
        if self.family == 0:
            w = np.full(xs.shape, self.w_lo)
            return -w, w
        i = np.floor(xs).astype(np.int64)
        xf = xs - i
        yu = self._tent(i, xf, self._knots(i, _R_KNOT_UP),
                        self._knots(i + 1, _R_KNOT_UP), self._teeth(i, _R_TOOTH_UP))
        yl = self._tent(i, xf, self._knots(i, _R_KNOT_LO),
                        self._knots(i + 1, _R_KNOT_LO), self._teeth(i, _R_TOOTH_LO))
        return -yl, yu

    @staticmethod
    def _tent(i, xf, h0, h1, depth):
        tip = np.minimum(h0, h1) - depth
        left = h0 + (tip - h0) * (xf / 0.5)
        right = tip + (h1 - tip) * ((xf - 0.5) / 0.5)
        return np.where(xf < 0.5, left, right)

    def inside(self, xs, ys):
        lo, hi = self.walls_at(xs)
        ys = np.asarray(ys, dtype=float)
        return (ys > lo) & (ys < hi)

    def clearance(self, xs, ys):
        """Distance-like margin min(y - y_lower, y_upper - y); > 0 inside."""
        lo, hi = self.walls_at(xs)
        ys = np.asarray(ys, dtype=float)
        return np.minimum(ys - lo, hi - ys)

    # ------------------------------------------------------------------
    # marching ray oracle
    # ------------------------------------------------------------------

    def first_hit(self, x0, y0, ux, uy, step=5e-5, t_cap=400.0, chunk=65536):
        """First boundary crossing of the ray from an *interior* point.

        Marches t in increments of ``step`` until the inside predicate goes
        false, then bisects the bracketing interval down to ~1e-12.  Returns
        (t, x, y), or None if still inside at ``t_cap``.
        """
        if not bool(self.inside(x0, y0)):
            raise ValueError("marching oracle wants an interior start point")
        t_lo = 0.0
        while t_lo < t_cap:
            n = chunk
            ts = t_lo + step * np.arange(1, n + 1)
            ins = self.inside(x0 + ts * ux, y0 + ts * uy)
            bad = np.nonzero(~ins)[0]
            if bad.size:
                j = int(bad[0])
                a = t_lo + step * j        # last known inside (or t_lo)
                b = float(ts[j])           # first known outside
                return self._bisect(x0, y0, ux, uy, a, b)
            t_lo = float(ts[-1])
        return None

    def _bisect(self, x0, y0, ux, uy, a, b):
        for _ in range(60):
            m = 0.5 * (a + b)
            if bool(self.inside(x0 + m * ux, y0 + m * uy)):
                a = m
            else:
                b = m
            if b - a < 1e-13:
                break
        t = 0.5 * (a + b)
        return t, x0 + t * ux, y0 + t * uy

    def sample_interior(self, rng, x_lo, x_hi, n):
        """n interior points, uniform in area, by rejection from the box."""
        cap = max(self.w_hi if self.family else self.w_lo, self.w_lo)
        out = np.empty((n, 2))
        got = 0
        while got < n:
            m = 4 * (n - got) + 64
            xs = rng.uniform(x_lo, x_hi, size=m)
            ys = rng.uniform(-cap, cap, size=m)
            keep = self.inside(xs, ys)
            k = min(int(keep.sum()), n - got)
            sel = np.nonzero(keep)[0][:k]
            out[got:got + k, 0] = xs[sel]
            out[got:got + k, 1] = ys[sel]
            got += k
        return out


def section_area(tube, x_lo, x_hi, n=20001):
    """Trapezoid area of the tube piece between two axial stations."""
    xs = np.linspace(x_lo, x_hi, n)
    lo, hi = tube.walls_at(xs)
    return float(np.trapezoid(hi - lo, xs))
