"""Occupation measures of sample paths and Riesz potentials thereof.

An occupation measure of a path over [s, t] assigns to each spatial set the
time the path spends in it.  On a discrete path it is represented by the
grid nodes inside [s, t] (endpoints interpolated in) together with
trapezoidal time weights, whose total is exactly t - s.

The alpha-Riesz potential of that measure at x is the time integral of
``||x - X_u||^(alpha - d)``.  The integrand blows up where the path touches
x, so quadrature cells whose endpoints come within a cutoff eta are replaced
by the analytic power model ``C^(alpha-d) |u - t0|^(H (alpha-d))`` with the
empirical local Hoelder constant C; the exponent is integrable exactly when
H (d - alpha) < 1, which is the parameter regime of interest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import ParameterError, RedirectError
from .process_sim import SamplePath

SINGULAR_CUTOFF_FACTOR = 0.1   # eta = step^H * this
DEFAULT_HURST_HINT = 0.5
_CHUNK_FLOATS = 4_000_000      # bound on the (sites x nodes) work array


def unit_ball_volume(d: int) -> float:
    """Volume of the d-dimensional unit ball, by the two-step recursion."""
    if d < 0:
        raise ParameterError("dimension must be nonnegative")
    if d == 0:
        return 1.0
    if d == 1:
        return 2.0
    return 2.0 * math.pi / d * unit_ball_volume(d - 2)


# ---------------------------------------------------------------------------
# admissibility of (H, d, alpha, beta)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibleParams:
    H: float
    d: int
    alpha: float
    beta_incr: Optional[float] = None


@dataclass(frozen=True)
class Rejection:
    condition: str
    detail: str

    def __str__(self):
        return f"{self.condition}: {self.detail}"


def beta_increment_cap(H: float, d: int, alpha: float) -> float:
    """Largest admissible spatial increment exponent for given (H, d, alpha)."""
    return alpha + min(1.0, (1.0 - H * d) / (2.0 * H), (1.0 - H * d) / H)


def check_admissible(H: float, d: int, alpha: float,
                     beta_incr: Optional[float] = None
                     ) -> Union[AdmissibleParams, Rejection]:
    """Accept a parameter tuple or explain which condition rejects it.

    Two conditions are enforced.  The potential order must satisfy
    0 <= alpha < d when H d < 1, and d - 1/H < alpha < d when H d >= 1.
    When a spatial increment exponent is supplied it must satisfy
    0 <= beta <= 1 and beta - alpha < min(1, (1-Hd)/(2H), (1-Hd)/H).
    """
    if not 0 < H < 1:
        return Rejection("hurst-range", f"H must lie in (0,1), got {H}")
    if d < 1:
        return Rejection("dimension", f"d must be >= 1, got {d}")
    hd = H * d
    if hd < 1.0:
        if not 0.0 <= alpha < d:
            return Rejection(
                "potential-order-range",
                f"H*d = {hd:g} < 1 requires 0 <= alpha < d = {d}; got alpha = {alpha}")
    else:
        lo = d - 1.0 / H
        if not lo < alpha < d:
            return Rejection(
                "potential-order-range",
                f"H*d = {hd:g} >= 1 requires alpha in (d - 1/H, d) = "
                f"({lo:g}, {d}); got alpha = {alpha}")
    if beta_incr is not None:
        if not 0.0 <= beta_incr <= 1.0:
            return Rejection("increment-exponent-range",
                             f"beta_incr must lie in [0,1], got {beta_incr}")
        cap = beta_increment_cap(H, d, alpha)
        if not beta_incr < cap:
            return Rejection(
                "increment-exponent-bound",
                f"beta_incr - alpha must be < min(1, (1-Hd)/(2H), (1-Hd)/H) "
                f"= {cap - alpha:g}; got beta_incr = {beta_incr} (cap {cap:g})")
    return AdmissibleParams(H=H, d=d, alpha=alpha, beta_incr=beta_incr)


# ---------------------------------------------------------------------------
# occupation measures
# ---------------------------------------------------------------------------

@dataclass
class OccupationMeasure:
    """Time the path spends in spatial sets, restricted to [s, t].

    ``times`` are the grid nodes inside [s, t] with both endpoints
    interpolated in; ``weights`` are trapezoidal and sum to t - s.
    """

    source: SamplePath
    s: float
    t: float
    times: np.ndarray
    positions: np.ndarray
    weights: np.ndarray

    @property
    def mass(self) -> float:
        return self.t - self.s

    @property
    def dim(self) -> int:
        return self.source.dim

    @property
    def hurst_hint(self) -> float:
        h = self.source.hurst_hint
        return DEFAULT_HURST_HINT if h is None else h

    # -- spatial queries ----------------------------------------------------

    def box_mass(self, lo, hi) -> float:
        """Exact time spent in the box [lo, hi] by the piecewise-linear path.

        Computed cell by cell from the crossing times of the linear
        interpolant, so restriction additivity holds to float arithmetic.
        """
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        a = self.positions[:-1]
        b = self.positions[1:]
        du = np.diff(self.times)
        slope = b - a
        with np.errstate(divide="ignore", invalid="ignore"):
            tau_lo = (lo - a) / slope
            tau_hi = (hi - a) / slope
        pos = slope > 0
        neg = slope < 0
        flat = slope == 0
        enter = np.where(pos, tau_lo, np.where(neg, tau_hi, 0.0))
        exit_ = np.where(pos, tau_hi, np.where(neg, tau_lo, 1.0))
        inside_flat = (a >= lo) & (a <= hi)
        enter = np.where(flat, np.where(inside_flat, 0.0, 1.0), enter)
        exit_ = np.where(flat, np.where(inside_flat, 1.0, 0.0), exit_)
        start = np.clip(enter, 0.0, 1.0).max(axis=1)
        stop = np.clip(exit_, 0.0, 1.0).min(axis=1)
        return float(np.sum(np.clip(stop - start, 0.0, None) * du))

    def _sorted_distances(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        diff = self.positions - x
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.argsort(dist, kind="stable")
        cum = np.concatenate([[0.0], np.cumsum(self.weights[order])])
        return dist[order], cum

    def ball_mass(self, x, r: float) -> float:
        """Weighted count of samples in the open ball B(x, r)."""
        return float(self.ball_masses(x, np.asarray([r]))[0])

    def ball_masses(self, x, radii) -> np.ndarray:
        """Vectorized ``ball_mass`` over a radius grid (one sort per x)."""
        dist, cum = self._sorted_distances(x)
        idx = np.searchsorted(dist, np.asarray(radii, dtype=np.float64), side="left")
        return cum[idx]


def occupation_measure(path: SamplePath, s: float, t: float) -> OccupationMeasure:
    """Restrict a path to [s, t] and attach trapezoidal time weights."""
    if not t > s:
        raise ParameterError(f"need s < t, got s={s}, t={t}")
    if s < 0 or t > path.horizon * (1 + 1e-12):
        raise ParameterError(f"[{s}, {t}] falls outside [0, {path.horizon}]")
    t = min(t, path.horizon)
    grid = path.times
    i0 = np.searchsorted(grid, s, side="right")
    i1 = np.searchsorted(grid, t, side="left")
    times = np.concatenate([[s], grid[i0:i1], [t]])
    pos = np.empty((times.size, path.dim))
    pos[1:-1] = path.positions[i0:i1]
    for ell in range(path.dim):
        pos[0, ell] = np.interp(s, grid, path.positions[:, ell])
        pos[-1, ell] = np.interp(t, grid, path.positions[:, ell])
    du = np.diff(times)
    w = np.zeros(times.size)
    w[:-1] += 0.5 * du
    w[1:] += 0.5 * du
    return OccupationMeasure(source=path, s=float(s), t=float(t),
                             times=times, positions=pos, weights=w)


# ---------------------------------------------------------------------------
# Riesz potentials
# ---------------------------------------------------------------------------

@dataclass
class PotentialEstimate:
    """Value of a potential at one point, with discretization metadata."""

    value: float
    alpha: float
    x: np.ndarray
    interval: tuple
    err_bound: float
    singular_corrected: bool
    divergent: bool = False

    def __post_init__(self):
        if self.value < 0:
            raise ParameterError("potential values are nonnegative")


def _segment_integrals_1d(times, pos, xs, alpha):
    """Exact cell integrals of |x - Xhat(u)|^(alpha-1) for the linear
    interpolant in dimension one.

    With z the signed offset at the left node, s the cell increment and
    w = z/s, the unit-cell integral is |s|^(alpha-1) G(w) where G has the
    three-branch closed form below; no singularity handling is needed since
    G stays finite for every w (the crossing case integrates the |.|^(alpha-1)
    spike exactly).
    """
    du = np.diff(times)
    x1 = pos[:, 0]
    s = x1[1:] - x1[:-1]
    z = xs[:, 0:1] - x1[None, :-1]
    moving = s != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        w = z / s[None, :]
        aw = np.abs(w)
        awm = np.abs(w - 1.0)
        inside = (w >= 0) & (w <= 1)
        g = np.where(inside, aw ** alpha + awm ** alpha,
                     np.abs(aw ** alpha - awm ** alpha)) / alpha
        cells = np.abs(s)[None, :] ** (alpha - 1.0) * g * du[None, :]
        flat = np.abs(z) ** (alpha - 1.0) * du[None, :]
    return np.where(moving[None, :], cells, flat)


def _local_model_cells(times, pos, alpha, d, H):
    """Per-cell integral of the local power model C |u - t0|^(H(alpha-d))
    with the neighborhood Hoelder constant C; inf where the model diverges."""
    du = np.diff(times)
    expo_cell = 1.0 + H * (alpha - d)
    step = pos[1:] - pos[:-1]
    csq = np.einsum("ij,ij->i", step, step)
    if csq.size > 1:
        csq = maximum_filter1d(csq, size=5, mode="nearest")
    with np.errstate(divide="ignore"):
        if expo_cell > 0:
            holder = np.sqrt(csq) / du ** H
            model = holder ** (alpha - d) * du ** expo_cell / expo_cell
        else:
            model = np.full_like(du, np.inf)   # local integral diverges
    return np.where(csq > 0, model, np.inf)    # flat cell pinned at x: point mass


def _cell_quadrature(times, pos, xs, alpha, d, H):
    """Cellwise potential quadrature for a block of evaluation points.

    Returns (cells, corrections, singular_any, replaced) where ``cells`` has
    shape (len(xs), n_cells).  In dimension one the cells are the exact
    integrals of the linear interpolant; in higher dimensions they are
    trapezoid values with near-singular cells replaced by the local power
    model.  ``corrections`` is the per-point total singular-handling
    magnitude and ``replaced`` the per-cell mask of handled cells.
    """
    if d == 1:
        du = np.diff(times)
        eta_sq = (SINGULAR_CUTOFF_FACTOR * du ** H) ** 2
        exact = _segment_integrals_1d(times, pos, xs, alpha)
        diff = xs[:, None, 0] - pos[None, :, 0]
        dist_sq = diff * diff
        near = np.minimum(dist_sq[:, :-1], dist_sq[:, 1:]) < eta_sq
        if np.any(near):
            # A near-zero increment makes the interpolant linger at one level
            # and its exact integral blow up like |s|^(alpha-1); a genuinely
            # H-rough path cannot linger, so flagged cells are capped by the
            # power model with the neighborhood Hoelder constant.
            model = _local_model_cells(times, pos, alpha, d, H)
            capped = np.minimum(exact, model[None, :])
            cells = np.where(near, capped, exact)
        else:
            cells = exact
        corrections = np.where(near & np.isfinite(exact), exact, 0.0).sum(axis=1)
        return cells, corrections, near.any(axis=1), near
    du = np.diff(times)
    expo_cell = 1.0 + H * (alpha - d)
    eta_sq = (SINGULAR_CUTOFF_FACTOR * du ** H) ** 2
    step = pos[1:] - pos[:-1]
    csq = np.einsum("ij,ij->i", step, step)
    if csq.size > 1:
        # Hoelder constants are suprema: estimate them over a small cell
        # neighborhood, not from the one increment that happens to be tiny.
        csq = maximum_filter1d(csq, size=5, mode="nearest")

    diff = xs[:, None, :] - pos[None, :, :]
    dist_sq = np.einsum("mnj,mnj->mn", diff, diff)
    with np.errstate(divide="ignore"):
        f = dist_sq ** ((alpha - d) / 2.0)
    raw = 0.5 * (f[:, :-1] + f[:, 1:]) * du
    dmin_sq = np.minimum(dist_sq[:, :-1], dist_sq[:, 1:])
    singular = dmin_sq < eta_sq

    with np.errstate(divide="ignore"):
        if expo_cell > 0:
            holder = np.sqrt(csq) / du ** H
            model = holder ** (alpha - d) * du ** expo_cell / expo_cell
        else:
            model = np.full_like(du, np.inf)   # local integral diverges
    model = np.where(csq > 0, model, np.inf)   # flat cell pinned at x: point mass

    if np.any(singular):
        # The trapezoid overestimates on endpoint-singular cells (the kernel
        # decays convexly away from the hit), so the local model is only ever
        # allowed to lower the cell value; an exact hit leaves raw = inf and
        # the model takes over entirely.  This also keeps flat cells at
        # positive distance on their exact constant-integrand value.
        model_b = np.broadcast_to(model, raw.shape)
        capped = np.minimum(raw, model_b)
        cells = np.where(singular, capped, raw)
        replaced = singular & (capped < raw)
        delta = np.where(np.isfinite(raw), raw - capped, model_b)
        corrections = np.where(replaced, delta, 0.0).sum(axis=1)
        singular_any = replaced.any(axis=1)
    else:
        cells = raw
        replaced = np.zeros(raw.shape, dtype=bool)
        corrections = np.zeros(xs.shape[0])
        singular_any = np.zeros(xs.shape[0], dtype=bool)
    return cells, corrections, singular_any, replaced


def _chunks(m: int, n_nodes: int):
    block = max(1, _CHUNK_FLOATS // max(1, n_nodes))
    for start in range(0, m, block):
        yield start, min(m, start + block)


def potential_values(occ: OccupationMeasure, alpha: float, xs,
                     hurst: Optional[float] = None) -> np.ndarray:
    """Fast potential evaluation at many points (no error estimate)."""
    d = occ.dim
    if not 0 < alpha < d:
        raise ParameterError(f"alpha must lie in (0, d) = (0, {d}), got {alpha}")
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    H = occ.hurst_hint if hurst is None else hurst
    out = np.empty(xs.shape[0])
    for a, b in _chunks(xs.shape[0], occ.times.size):
        cells, _, _, _ = _cell_quadrature(occ.times, occ.positions, xs[a:b],
                                          alpha, d, H)
        out[a:b] = cells.sum(axis=1)
    return out


def potential_profile(occ: OccupationMeasure, alpha: float, x,
                      hurst: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative potential u -> U^alpha over [s, u] at every node time."""
    times, cum = potential_profiles(occ, alpha, np.atleast_2d(np.asarray(x)), hurst)
    return times, cum[0]


def potential_profiles(occ: OccupationMeasure, alpha: float, xs,
                       hurst: Optional[float] = None
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative potentials for a batch of points; shape (len(xs), n_nodes)."""
    d = occ.dim
    if not 0 < alpha < d:
        raise ParameterError(f"alpha must lie in (0, d) = (0, {d}), got {alpha}")
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    H = occ.hurst_hint if hurst is None else hurst
    cum = np.empty((xs.shape[0], occ.times.size))
    cum[:, 0] = 0.0
    for a, b in _chunks(xs.shape[0], occ.times.size):
        cells, _, _, _ = _cell_quadrature(occ.times, occ.positions, xs[a:b],
                                          alpha, d, H)
        np.cumsum(cells, axis=1, out=cum[a:b, 1:])
    return occ.times, cum


def riesz_potential(occ: OccupationMeasure, alpha: float, x) -> PotentialEstimate:
    """Potential of the occupation measure at x, with an error bound.

    The bound combines the total singular-cell correction with a
    midpoint-vs-trapezoid discrepancy on the regular cells.  When
    H (d - alpha) >= 1 the integral may be infinite: the estimate is flagged
    ``divergent`` and reported as inf whenever a singular cell was hit.
    """
    d = occ.dim
    if not 0 < alpha < d:
        raise ParameterError(f"alpha must lie in (0, d) = (0, {d}), got {alpha}")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    H = occ.hurst_hint
    divergent = H * (d - alpha) >= 1.0
    if divergent:
        warnings.warn(
            f"H*(d-alpha) = {H * (d - alpha):g} >= 1: the potential may be "
            "infinite; the estimate carries a divergence flag", stacklevel=2)
    cells, corr, sing, replaced = _cell_quadrature(
        occ.times, occ.positions, x[None, :], alpha, d, H)
    value = float(cells.sum())
    # midpoint pass on the linearly interpolated path as a cheap error probe
    mid = 0.5 * (occ.positions[:-1] + occ.positions[1:])
    diff = mid - x
    dist_sq = np.einsum("ij,ij->i", diff, diff)
    du = np.diff(occ.times)
    with np.errstate(divide="ignore"):
        f_mid = dist_sq ** ((alpha - d) / 2.0)
    mid_cells = f_mid * du
    regular = np.isfinite(cells[0]) & np.isfinite(mid_cells) & ~replaced[0]
    discrepancy = float(np.abs(cells[0] - mid_cells)[regular].sum())
    err = float(corr[0]) + 1.5 * discrepancy + 1e-12 * abs(value)
    return PotentialEstimate(value=value, alpha=alpha, x=x,
                             interval=(occ.s, occ.t), err_bound=err,
                             singular_corrected=bool(sing[0]),
                             divergent=divergent)


def rescaled_potential(occ: OccupationMeasure, alpha: float, x) -> PotentialEstimate:
    """alpha/(d omega_d) times the Riesz potential; tends to the local time
    as alpha tends to 0 when the latter exists."""
    if alpha == 0:
        raise RedirectError(
            "the alpha = 0 branch is the local time itself; use "
            "local_time_histogram on the occupation measure instead")
    est = riesz_potential(occ, alpha, x)
    factor = alpha / (occ.dim * unit_ball_volume(occ.dim))
    est.value *= factor
    est.err_bound *= factor
    return est


def brute_force_potential(occ: OccupationMeasure, alpha: float, x,
                          refine: int = 64) -> float:
    """Independent oracle: midpoint quadrature on a ``refine`` times finer
    grid of the linearly interpolated path.  Midpoints never coincide with
    path nodes, so the integrand stays finite."""
    d = occ.dim
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    total = 0.0
    a_pos = occ.positions[:-1]
    step = occ.positions[1:] - occ.positions[:-1]
    du = np.diff(occ.times)
    taus = (np.arange(refine) + 0.5) / refine
    for tau in taus:
        pts = a_pos + tau * step
        diff = pts - x
        dist_sq = np.einsum("ij,ij->i", diff, diff)
        total += np.sum(dist_sq ** ((alpha - d) / 2.0) * du) / refine
    return float(total)


# ---------------------------------------------------------------------------
# local-time histograms
# ---------------------------------------------------------------------------

@dataclass
class LocalTimeHistogram:
    """Occupation mass per spatial box, normalized by box volume."""

    bin_width: float
    dim: int
    indices: np.ndarray    # (n_boxes, d) integer box coordinates
    density: np.ndarray    # (n_boxes,) mass / bin_width^d
    mass: float

    def total_mass(self) -> float:
        return float(self.density.sum() * self.bin_width ** self.dim)

    def density_at(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        key = np.floor(x / self.bin_width).astype(np.int64)
        hit = np.all(self.indices == key, axis=1)
        where = np.nonzero(hit)[0]
        return float(self.density[where[0]]) if where.size else 0.0

    def sup_density(self) -> float:
        return float(self.density.max()) if self.density.size else 0.0


def local_time_histogram(occ: OccupationMeasure, bin_width: Optional[float] = None
                         ) -> LocalTimeHistogram:
    """Histogram estimate of the occupation density.

    The default bin width is step^H of the source grid.  Total mass is the
    interval length exactly, since every weighted node lands in one box.
    A histogram is only a local time estimate when H d < 1; outside that
    regime a warning is issued but the (still well-defined) density table is
    returned.
    """
    if bin_width is None:
        step = float(np.median(np.diff(occ.source.times)))
        bin_width = step ** occ.hurst_hint
    if bin_width <= 0:
        raise ParameterError(f"bin_width must be positive, got {bin_width}")
    if occ.hurst_hint * occ.dim >= 1.0:
        warnings.warn(
            f"H*d = {occ.hurst_hint * occ.dim:g} >= 1: occupation densities "
            "(local times) need H*d < 1; the histogram is not consistent",
            stacklevel=2)
    keys = np.floor(occ.positions / bin_width).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    masses = np.bincount(inverse, weights=occ.weights, minlength=uniq.shape[0])
    return LocalTimeHistogram(bin_width=float(bin_width), dim=occ.dim,
                              indices=uniq,
                              density=masses / bin_width ** occ.dim,
                              mass=occ.mass)


# ---------------------------------------------------------------------------
# spatial supremum of the rescaled potential
# ---------------------------------------------------------------------------

class SupPotential(NamedTuple):
    value: float            # max of L^{alpha,X} over the probed sites
    argmax: np.ndarray
    err_bound: float
    bound_factor: float     # true sup over R^d <= bound_factor * value * (1+err)


def sup_potential_over_space(occ: OccupationMeasure, alpha: float,
                             max_sites: int = 4096) -> SupPotential:
    """Maximum of the rescaled potential over (subsampled) path points.

    By the maximum principle for Riesz kernels the supremum over all of R^d
    is at most 2^(d - alpha) times the supremum over the path's range, so the
    returned value bounds the global sup up to that explicit factor.
    """
    d = occ.dim
    if not 0 < alpha < d:
        raise ParameterError(f"alpha must lie in (0, d) = (0, {d}), got {alpha}")
    n = occ.positions.shape[0]
    stride = max(1, int(np.ceil(n / max_sites)))
    sites = occ.positions[::stride]
    values = potential_values(occ, alpha, sites)
    k = int(np.argmax(values))
    argmax = sites[k]
    probe = riesz_potential(occ, alpha, argmax)
    scale = alpha / (d * unit_ball_volume(d))
    rel_err = probe.err_bound / probe.value if probe.value > 0 else 0.0
    return SupPotential(value=float(values[k]) * scale,
                        argmax=argmax.copy(),
                        err_bound=rel_err,
                        bound_factor=2.0 ** (d - alpha))
