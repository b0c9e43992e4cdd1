"""K-functional curves and the norms derived from them.

For a weight w and cube Q the curve

    K(t) = K(t, w chi_Q; L1(Q), Linf(Q)) = integral_0^t (w chi_Q)*(s) ds

is piecewise linear, nondecreasing, concave, and passes through the origin:
its breakpoints sit at the cumulative plateau measures of the rearrangement
and its slopes are the plateau values.  Everything here is built on that
exact representation:

  * (Lp, Linf): G(t) = (integral_0^t (w*)^p)^{1/p}, stored via the exact
    piecewise-linear curve of G^p;
  * composite curves H(t) = (integral_0^{t^{1/(1-theta)}} [s^{-theta} K(s)]^q
    ds/s)^{1/q}, integrated in closed form on origin pieces and by adaptive
    Gauss-Legendre panels elsewhere (relative tolerance 1e-10);
  * Lorentz norms over (0, infinity) using the exact 1/t tail of the averaged
    rearrangement;
  * the Luxemburg norm of L log L by bisection on its defining integral;
  * the limiting-space norm integral_0^{|Q|} K(s)/s ds, computed two
    independent ways (K-side and log-weighted rearrangement side) and
    cross-checked;
  * packing operators S_pi (weighted cube averages over disjoint cube
    families) and the weighted K-functional estimate they generate.

Cube-local inequalities are evaluated on (0, |Q|]; beyond |Q| every curve is
determined by its exact constant or 1/t tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DyadicCube, WeightGrid, integrate, level_cubes
from .rearrange import DecreasingStep, rearrangement

_GL20 = np.polynomial.legendre.leggauss(20)
_GL40 = np.polynomial.legendre.leggauss(40)


# ---------------------------------------------------------------------------
# curves

class ConcaveCurve:
    """Nondecreasing concave piecewise-linear curve with value 0 at 0.

    knots_t / knots_v are the breakpoints, starting at (0, 0); the curve is
    constant past domain_end = knots_t[-1].  value(t)/t is nonincreasing on
    (0, domain_end], which the constructor verifies via the slopes.
    """

    def __init__(self, knots_t, knots_v, slopes: np.ndarray | None = None):
        t = np.asarray(knots_t, dtype=np.float64)
        v = np.asarray(knots_v, dtype=np.float64)
        if t.size < 2 or t.size != v.size:
            raise ValueError("need matching knot arrays with at least two points")
        if t[0] != 0.0 or v[0] != 0.0:
            raise ValueError("curve must start at (0, 0)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")
        if slopes is None:
            slopes = np.diff(v) / np.diff(t)
        slopes = np.asarray(slopes, dtype=np.float64)
        if np.any(slopes < 0):
            raise ValueError("curve must be nondecreasing")
        # concavity: slopes nonincreasing (tiny relative slack for sampled input)
        if np.any(slopes[1:] > slopes[:-1] * (1.0 + 1e-9) + 1e-300):
            raise ValueError("curve must be concave (slopes nonincreasing)")
        self.t = t
        self.v = v
        self.slopes = slopes

    @classmethod
    def from_plateaus(cls, values: np.ndarray, measures: np.ndarray) -> "ConcaveCurve":
        t = np.concatenate(([0.0], np.cumsum(measures)))
        v = np.concatenate(([0.0], np.cumsum(np.asarray(values) * np.asarray(measures))))
        return cls(t, v, slopes=np.asarray(values, dtype=np.float64))

    @property
    def domain_end(self) -> float:
        return float(self.t[-1])

    @property
    def mass(self) -> float:
        return float(self.v[-1])

    def value(self, s):
        out = np.interp(s, self.t, self.v)  # constant tail past the last knot
        return float(out) if np.ndim(s) == 0 else out

    def pieces(self):
        """(A, B, s0, s1) arrays with the curve equal to A + B s on [s0, s1]."""
        s0 = self.t[:-1]
        s1 = self.t[1:]
        B = self.slopes
        A = self.v[:-1] - B * s0
        return A, B, s0, s1


@dataclass
class LpKCurve:
    """G(t) = (integral_0^t (w*)^p)^{1/p}; gp holds the exact curve of G^p."""

    gp: ConcaveCurve
    p: float

    @property
    def domain_end(self) -> float:
        return self.gp.domain_end

    def value(self, t):
        g = self.gp.value(t)
        return g ** (1.0 / self.p) if np.ndim(g) == 0 else np.asarray(g) ** (1.0 / self.p)


class StepProductCurve:
    """t * r*(t) for a rearrangement step r: piecewise linear through the
    origin on each plateau, with downward jumps at the plateau boundaries.

    Left and right values at each breakpoint are both exposed, since the
    almost-increase ratio must see the two-sided envelope.
    """

    def __init__(self, r: DecreasingStep):
        self.breaks = r.breaks
        self.values = r.values

    @property
    def domain_end(self) -> float:
        return float(self.breaks[-1])

    def value(self, t):
        return np.asarray(t) * np.asarray(
            StepProductCurve._step(self.breaks, self.values, t)
        )

    @staticmethod
    def _step(breaks, values, t):
        idx = np.searchsorted(breaks, np.asarray(t, dtype=np.float64), side="left")
        idx = np.minimum(idx, values.size - 1)
        return values[idx]

    def two_sided(self, gamma_end: float):
        """Candidate points (s, phi(s)) with both one-sided values at jumps,
        restricted to (0, gamma_end]."""
        bs = self.breaks
        vs = self.values
        inner = bs < gamma_end
        n_in = int(inner.sum())
        # left value v_k at tau_k, right value v_{k+1} just past it
        s = np.repeat(bs[inner], 2)
        val = np.empty_like(s)
        val[0::2] = bs[inner] * vs[:n_in]
        kright = np.minimum(np.arange(n_in) + 1, vs.size - 1)
        val[1::2] = bs[inner] * vs[kright]
        # endpoint of the window, left-continuous
        end_val = gamma_end * StepProductCurve._step(bs, vs, gamma_end)
        s = np.concatenate([s, [gamma_end]])
        val = np.concatenate([val, [end_val]])
        return s, val


@dataclass
class CurveFamily:
    """The cube-indexed curve family of a weight.

    kind "k" maps Q to K(., w chi_Q; L1, Linf); kind "acks" maps Q to
    t (w chi_Q)*(t).  beta and q record the transform phi -> (s^-beta phi)^q
    applied by the index machinery.
    """

    w: WeightGrid
    kind: str = "k"
    beta: float = 0.0
    q: float = 1.0
    policy: str = "all-dyadic"

    def curve(self, Q: DyadicCube):
        r = rearrangement(self.w, Q)
        if self.kind == "k":
            return ConcaveCurve.from_plateaus(r.values, r.measures)
        if self.kind == "acks":
            return StepProductCurve(r)
        raise ValueError(f"unknown curve kind {self.kind!r}")


# ---------------------------------------------------------------------------
# the shared piece integrator

def _antider_pow(s: np.ndarray, r: float) -> np.ndarray:
    """Antiderivative of s^r (s > 0), log branch at r = -1."""
    if r == -1.0:
        return np.log(s)
    return s ** (r + 1.0) / (r + 1.0)


def _gl_panel(A, B, s0, s1, q, E, table):
    nodes, weights = table
    mid = 0.5 * (s0 + s1)
    half = 0.5 * (s1 - s0)
    s = mid[:, None] + half[:, None] * nodes[None, :]
    f = (A[:, None] + B[:, None] * s) ** q * s ** E
    return half * (f @ weights)


def power_piece_integral(A, B, s0, s1, q: float, E: float, rel: float = 1e-10) -> np.ndarray:
    """Batched integral of (A + B s)^q s^E over [s0, s1], elementwise.

    Exact closed forms when A = 0 (pure power; requires q + E > -1 if s0 = 0)
    or q = 1; otherwise adaptive Gauss-Legendre with 20/40-node comparison,
    bisecting panels until the relative difference is below rel.
    """
    A = np.atleast_1d(np.asarray(A, dtype=np.float64))
    B = np.atleast_1d(np.asarray(B, dtype=np.float64))
    s0 = np.atleast_1d(np.asarray(s0, dtype=np.float64))
    s1 = np.atleast_1d(np.asarray(s1, dtype=np.float64))
    A, B, s0, s1 = np.broadcast_arrays(A, B, s0, s1)
    out = np.zeros(A.shape, dtype=np.float64)
    live = s1 > s0
    origin = live & (A == 0.0)
    if np.any(origin):
        r = q + E
        if np.any(s0[origin] == 0.0) and r <= -1.0:
            raise ValueError("divergent integral at the origin")
        lo = np.where(s0[origin] == 0.0, 0.0, _antider_pow(np.maximum(s0[origin], 1e-300), r))
        out[origin] = B[origin] ** q * (_antider_pow(s1[origin], r) - lo)
        live = live & ~origin
    if q == 1.0 and np.any(live):
        out[live] = A[live] * (_antider_pow(s1[live], E) - _antider_pow(s0[live], E)) + B[live] * (
            _antider_pow(s1[live], E + 1.0) - _antider_pow(s0[live], E + 1.0)
        )
        return out
    if not np.any(live):
        return out
    idx = np.nonzero(live.ravel())[0]
    flat = lambda x: x.ravel()[idx]
    work = [(flat(A), flat(B), flat(s0), flat(s1), idx, 0)]
    acc = np.zeros(out.size, dtype=np.float64)
    while work:
        a, b, lo, hi, ix, depth = work.pop()
        c20 = _gl_panel(a, b, lo, hi, q, E, _GL20)
        c40 = _gl_panel(a, b, lo, hi, q, E, _GL40)
        tol = rel * np.maximum(np.abs(c40), 1e-300)
        done = (np.abs(c40 - c20) <= tol) | (depth >= 40)
        np.add.at(acc, ix[done], c40[done])
        bad = ~done
        if np.any(bad):
            mid = 0.5 * (lo[bad] + hi[bad])
            work.append((a[bad], b[bad], lo[bad], mid, ix[bad], depth + 1))
            work.append((a[bad], b[bad], mid, hi[bad], ix[bad], depth + 1))
    out += acc.reshape(out.shape)
    return out


# ---------------------------------------------------------------------------
# K-functional curves

def k_l1_linf(w: WeightGrid, Q: DyadicCube) -> ConcaveCurve:
    """K(t, w chi_Q; L1(Q), Linf(Q)) = integral_0^t (w chi_Q)*."""
    r = rearrangement(w, Q)
    return ConcaveCurve.from_plateaus(r.values, r.measures)


def k_lp_linf(w: WeightGrid, Q: DyadicCube, p: float) -> LpKCurve:
    """G(t) = (integral_0^t ((w chi_Q)*)^p)^{1/p}; exact curve of G^p."""
    if p < 1.0:
        raise ValueError("p must be at least 1")
    r = rearrangement(w, Q)
    gp = ConcaveCurve.from_plateaus(r.values ** p, r.measures)
    return LpKCurve(gp, p)


class HolmstedtCurve:
    """H(t) = (integral_0^{t^{1/(1-theta)}} [s^{-theta} K(s)]^q ds/s)^{1/q}.

    Piece integrals of K(s)^q s^{-theta q - 1} are exact on the origin piece
    and Gauss-Legendre panels elsewhere; past K's domain the integrand uses
    K's constant tail in closed form.
    """

    def __init__(self, K: ConcaveCurve, theta: float, q: float, rel: float = 1e-10):
        if not 0.0 < theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if q < 1.0:
            raise ValueError("q must be at least 1")
        self.K = K
        self.theta = theta
        self.q = q
        self.E = -theta * q - 1.0
        A, B, s0, s1 = K.pieces()
        self._piece_params = (A, B, s0, s1)
        vals = power_piece_integral(A, B, s0, s1, q, self.E, rel=rel)
        self.prefix = np.concatenate(([0.0], np.cumsum(vals)))  # at K's knots

    def inner_integral(self, T: float) -> float:
        """integral_0^T K(s)^q s^{-theta q - 1} ds."""
        K = self.K
        if T <= 0:
            return 0.0
        if T >= K.domain_end:
            head = self.prefix[-1]
            if T > K.domain_end:
                tq = self.theta * self.q
                head += K.mass ** self.q * (K.domain_end ** -tq - T ** -tq) / tq
            return float(head)
        j = int(np.searchsorted(K.t, T, side="right")) - 1
        j = min(j, K.t.size - 2)
        A, B, s0, s1 = self._piece_params
        part = power_piece_integral(
            np.asarray([A[j]]), np.asarray([B[j]]), np.asarray([K.t[j]]), np.asarray([T]), self.q, self.E
        )[0]
        return float(self.prefix[j] + part)

    def value(self, t):
        one = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.empty_like(ts)
        for i, ti in enumerate(ts):
            T = ti ** (1.0 / (1.0 - self.theta))
            out[i] = self.inner_integral(T) ** (1.0 / self.q)
        return float(out[0]) if one else out


def holmstedt_curve(K: ConcaveCurve, theta: float, q: float) -> HolmstedtCurve:
    return HolmstedtCurve(K, theta, q)


# ---------------------------------------------------------------------------
# Lorentz

def lorentz_norm(w: WeightGrid, Q: DyadicCube, p: float, q: float) -> float:
    """L(p,q) norm of w chi_Q over (0, infinity):
    (integral_0^inf [f**(t)]^q t^{q/p - 1} dt)^{1/q}, with the exact
    mass/t tail of f** past |Q|."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    if q < 1.0:
        raise ValueError("q must be at least 1")
    K = k_l1_linf(w, Q)
    A, B, s0, s1 = K.pieces()
    E = q / p - q - 1.0
    head = float(np.sum(power_piece_integral(A, B, s0, s1, q, E)))
    m = K.mass
    T = K.domain_end
    pprime = p / (p - 1.0)
    tail = m ** q * T ** (q / p - q) * pprime / q
    return (head + tail) ** (1.0 / q)


def k_lorentz_linf(w: WeightGrid, Q: DyadicCube, p: float, q: float, t: float) -> float:
    """(integral_0^{t^p} [w*(s) s^{1/p}]^q ds/s)^{1/q}, exact per plateau."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    if q < 1.0:
        raise ValueError("q must be at least 1")
    if t <= 0.0:
        raise ValueError("t must be positive")
    r = rearrangement(w, Q)
    T = min(t ** p, r.total_measure)  # w* vanishes past the cube measure
    lo = np.concatenate(([0.0], r.breaks[:-1]))
    hi = np.minimum(r.breaks, T)
    active = lo < T
    e = q / p
    total = float(np.sum(r.values[active] ** q * (hi[active] ** e - lo[active] ** e) / e))
    return total ** (1.0 / q)


# ---------------------------------------------------------------------------
# L log L

def _llogl_g(cells: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Defining integral (1/|Q|) int_Q (|f|/r) log(e + |f|/r), rowwise.

    cells has shape (n, m); r has shape (n,)."""
    u = cells / r[:, None]
    return np.mean(u * np.log(np.e + u), axis=1)


def llogl_norm_rows(cells: np.ndarray) -> np.ndarray:
    """Luxemburg norms of the rows of a (n, m) cell matrix.

    Bisection on r in [row mean, doubling upper bound]; the row mean is a
    valid lower bracket since u log(e + u) >= u.  Stops when the relative
    bracket width is below 1e-13, leaving the defining-integral residual
    orders below the 1e-9 contract.
    """
    cells = np.atleast_2d(cells)
    lo = cells.mean(axis=1)
    hi = lo.copy()
    for _ in range(200):
        bad = _llogl_g(cells, hi) > 1.0
        if not np.any(bad):
            break
        hi[bad] *= 2.0
    for _ in range(120):
        if np.all(hi - lo <= 1e-13 * hi):
            break
        mid = 0.5 * (lo + hi)
        gm = _llogl_g(cells, mid) > 1.0
        lo = np.where(gm, mid, lo)
        hi = np.where(gm, hi, mid)
    return 0.5 * (lo + hi)


def llogl_norm(w: WeightGrid, Q: DyadicCube) -> float:
    """Luxemburg norm inf{r > 0 : (1/|Q|) int_Q (w/r) log(e + w/r) <= 1}."""
    return float(llogl_norm_rows(w.cube_cells(Q)[None, :])[0])


def llogl_integral_forms(w: WeightGrid, Q: DyadicCube) -> tuple[float, float]:
    """Two integral quantities comparable to the Luxemburg norm.

    A = (1/|Q|) int_Q |f| log(e + |f| / avg_Q |f|),
    B = (1/|Q|) int_0^{|Q|} f*(s) log(e + |Q|/s) ds,
    both exact (cell sums; per-plateau closed-form antiderivative).
    """
    cells = w.cube_cells(Q)
    a1 = float(cells.mean())
    A = float(np.mean(cells * np.log(np.e + cells / a1)))
    r = rearrangement(w, Q)
    T = r.total_measure

    def F(s: np.ndarray) -> np.ndarray:
        # antiderivative of log(e + T/s); s log(e+T/s) -> 0 as s -> 0
        s = np.asarray(s, dtype=np.float64)
        out = np.where(s > 0, s * np.log(np.e + T / np.where(s > 0, s, 1.0)), 0.0)
        return out + (T / np.e) * np.log(np.e * s + T)

    lo = np.concatenate(([0.0], r.breaks[:-1]))
    B = float(np.sum(r.values * (F(r.breaks) - F(lo))) / T)
    return A, B


# ---------------------------------------------------------------------------
# limiting-space norm

def extrapolation_norm(w: WeightGrid, Q: DyadicCube) -> float:
    """integral_0^{|Q|} K(s, w chi_Q; L1, Linf) ds / s.

    Computed two independent ways (closed forms in both): as the log-weighted
    rearrangement integral int_0^{|Q|} f*(s) log(|Q|/s) ds, and as the direct
    piecewise integral of K(s)/s.  The two must agree to 1e-10 relative.
    """
    r = rearrangement(w, Q)
    T = r.total_measure
    lo = np.concatenate(([0.0], r.breaks[:-1]))

    def G(s: np.ndarray) -> np.ndarray:
        # antiderivative of log(T/s), with the s -> 0 limit 0
        s = np.asarray(s, dtype=np.float64)
        return np.where(s > 0, s * np.log(T / np.where(s > 0, s, 1.0)) + s, 0.0)

    rep_log = float(np.sum(r.values * (G(r.breaks) - G(lo))))

    K = ConcaveCurve.from_plateaus(r.values, r.measures)
    A, B, s0, s1 = K.pieces()
    terms = B * (s1 - s0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logpart = np.where(s0 > 0, A * np.log(np.where(s0 > 0, s1 / np.where(s0 > 0, s0, 1.0), 1.0)), 0.0)
    rep_k = float(np.sum(terms + logpart))

    if not math.isclose(rep_log, rep_k, rel_tol=1e-10):
        raise RuntimeError(
            f"limiting-norm representations disagree: {rep_log!r} vs {rep_k!r}"
        )
    return rep_log


# ---------------------------------------------------------------------------
# packings and the weighted K-functional

@dataclass
class PackingFamily:
    """A list of packings (disjoint dyadic cube families)."""

    packings: list[list[DyadicCube]]
    policy: str = "explicit"


@dataclass
class PackedFunction:
    """S_pi(f): weighted cube averages on the packing's cubes."""

    cubes: list[DyadicCube]
    values: np.ndarray
    w_measures: np.ndarray

    def rearrange_w(self) -> tuple[np.ndarray, np.ndarray]:
        """(values desc, cumulative w-measures), the w-rearrangement data."""
        order = np.argsort(-self.values, kind="stable")
        return self.values[order], np.cumsum(self.w_measures[order])


@dataclass
class WeightedKEstimate:
    value: float
    packing_index: int
    packing: list[DyadicCube]
    raw_sup: float


def grid_power(w: WeightGrid, p: float) -> WeightGrid:
    """Cellwise power of a grid (used for |f|^p and w^p objects)."""
    return WeightGrid(w.d, w.L, w.cells ** p, label=f"({w.label})^{p:g}", base=w.base)


def packing_average(f: WeightGrid, w: WeightGrid, pi: list[DyadicCube]) -> PackedFunction:
    """S_pi(f) = sum_i (1/w(Q_i)) int_{Q_i} f w  on each Q_i.

    Values outside the union are excluded from the rearrangement mass.
    """
    if f.d != w.d or f.L != w.L:
        raise ValueError("f and w must share a grid")
    if not pi:
        raise ValueError("empty packing")
    ranges = sorted(f.zrange(Q) for Q in pi)
    for (a0, b0), (a1, b1) in zip(ranges, ranges[1:]):
        if a1 < b0:
            raise ValueError("packing cubes overlap")
    fw = f.zcells * w.zcells
    wz = w.zcells
    num = np.array([fw[a:b].sum() for a, b in (f.zrange(Q) for Q in pi)])
    den = np.array([wz[a:b].sum() for a, b in (w.zrange(Q) for Q in pi)])
    return PackedFunction(list(pi), num / den, den * w.cell_measure)


def packing_family(
    f: WeightGrid,
    w: WeightGrid | None = None,
    p: float = 1.0,
    policy: str = "standard",
    max_stopping: int = 33,
) -> PackingFamily:
    """Single-level packings plus stopping-time packings.

    The stopping packings take a deterministic menu of at most max_stopping
    thresholds among the distinct dyadic averages A_Q = int_Q f^p w / w(Q);
    for each threshold the packing is the family of maximal dyadic cubes with
    A_Q above it.
    """
    if w is None:
        w = WeightGrid(f.d, f.L, np.ones(f.ncells), label="const:1", base=f.base)
    packs: list[list[DyadicCube]] = []
    for lev in range(f.base.level, f.L + 1):
        packs.append(level_cubes(f, lev))
    if policy == "standard":
        g = grid_power(f, p)
        gw = g.zcells * w.zcells
        wz = w.zcells
        all_avgs = []
        for lev in range(f.base.level, f.L + 1):
            width = 1 << (f.d * (f.L - lev))
            a = gw.reshape(-1, width).sum(axis=1)
            b = wz.reshape(-1, width).sum(axis=1)
            all_avgs.append(a / b)
        distinct = np.unique(np.concatenate(all_avgs))
        if distinct.size > max_stopping:
            sel = np.linspace(0, distinct.size - 1, max_stopping).astype(int)
            distinct = distinct[sel]
        for lam in distinct[:-1]:  # the top threshold selects nothing
            pick: list[DyadicCube] = []
            covered = np.zeros(1, dtype=bool)
            for lev_i, avgs in enumerate(all_avgs):
                lev = f.base.level + lev_i
                if lev_i > 0:
                    covered = np.repeat(covered, 1 << f.d)
                sel = (avgs > lam) & ~covered
                if np.any(sel):
                    cubes = level_cubes(f, lev)
                    pick.extend(cubes[i] for i in np.nonzero(sel)[0])
                    covered = covered | sel
            if pick:
                packs.append(pick)
    return PackingFamily(packs, policy=policy)


def k_weighted(f: WeightGrid, w: WeightGrid, p: float, t: float, Pi: PackingFamily) -> WeightedKEstimate:
    """Weighted-pair K-functional estimate via packings:

        t^{1/p} * (max over pi of (S_pi(|f|^p))_w^*(t))^{1/p},

    with the w-rearrangement evaluated left-continuously at t.  The maximum
    over the finite family is a certified lower bound for the supremum over
    all packings; the achieving packing is returned as witness.
    """
    if p < 1.0:
        raise ValueError("p must be at least 1")
    if not Pi.packings:
        raise ValueError("empty packing family")
    w_total = integrate(w, w.base)
    if not 0.0 < t < w_total:
        raise ValueError(f"t must lie in (0, {w_total})")
    fp = grid_power(f, p) if p != 1.0 else f
    best = -math.inf
    best_i = 0
    for i, pi in enumerate(Pi.packings):
        pf = packing_average(fp, w, pi)
        vals, cum = pf.rearrange_w()
        idx = int(np.searchsorted(cum, t, side="left"))
        val = float(vals[idx]) if idx < vals.size else 0.0
        if val > best:
            best = val
            best_i = i
    return WeightedKEstimate(
        value=t ** (1.0 / p) * best ** (1.0 / p),
        packing_index=best_i,
        packing=Pi.packings[best_i],
        raw_sup=best,
    )
