"""Limit relations tying potentials to densities and average densities.

Three estimators are realized here:

* the small-order recovery ``alpha U^alpha mu -> d omega_d (dmu/dL^d)``,
  evaluated on a decreasing alpha grid and extrapolated,
* the average s-density, a logarithmically averaged ball-mass ratio that can
  exist even when the plain s-density does not,
* the varying-order potential limit ``eps U^{d-s+eps} mu -> s D_a^s mu``,
  which generalizes the first relation to transient regimes.

The averaging kernels k_eps(u) = eps^2 u^(eps-1) |log u| on (0,1) and their
two exact integral identities get their own entry points, since everything
above rests on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import ParameterError
from .occupation import OccupationMeasure, potential_values, unit_ball_volume

DEFAULT_ALPHA_GRID = 0.5 ** np.arange(2, 10)        # 2^-2 .. 2^-9
DEFAULT_EPS_GRID = 0.5 ** np.arange(2, 10)
DEFAULT_U_GRID = 0.5 ** np.arange(4, 17)            # 2^-4 .. 2^-16


# ---------------------------------------------------------------------------
# averaging kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AveragingKernelParams:
    eps: float
    u_cut: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")


def kernel_k_eps(eps: float, u) -> np.ndarray:
    """Pointwise kernel value eps^2 u^(eps-1) |log u| on (0,1), else 0."""
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    u = np.asarray(u, dtype=np.float64)
    inside = (u > 0) & (u < 1)
    safe = np.where(inside, u, 0.5)
    vals = eps ** 2 * safe ** (eps - 1.0) * np.abs(np.log(safe))
    return np.where(inside, vals, 0.0)


def _quad_log_substituted(fn, y_lo: float, y_hi: float) -> float:
    # integrate fn(u) du over u = e^{-y}, y in [y_lo, y_hi]
    val, _ = integrate.quad(lambda y: fn(np.exp(-y)) * np.exp(-y),
                            y_lo, y_hi, limit=200)
    return val


@dataclass
class KernelIdentityReport:
    eps: float
    r: float
    mass_quadrature: float        # integral of k_eps over (0, inf)
    mass_exact: float             # = 1
    weighted_quadrature: float    # integral of k_eps/|log u| over (0, r)
    weighted_exact: float         # = eps * r^eps
    mass_error: float
    weighted_error: float

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("eps", "r", "mass_quadrature", "mass_exact",
                 "weighted_quadrature", "weighted_exact",
                 "mass_error", "weighted_error")}


def kernel_identities(eps: float, r: float) -> KernelIdentityReport:
    """Check the normalization and the weighted truncation identity of k_eps.

    Both integrals are computed by quadrature under the substitution
    u = e^{-y}, which removes the endpoint singularity, and compared with
    their closed forms 1 and eps * r^eps.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if not 0 <= r < 1:
        raise ParameterError(f"r must lie in [0, 1), got {r}")
    mass = _quad_log_substituted(lambda u: kernel_k_eps(eps, u), 0.0, np.inf)
    if r == 0.0:
        weighted = 0.0
    else:
        # in the y = -log u variable the |log u| weight is just y > -log r > 0
        weighted, _ = integrate.quad(
            lambda y: kernel_k_eps(eps, np.exp(-y)) * np.exp(-y) / y,
            -np.log(r), np.inf, limit=200)
    exact = eps * r ** eps if r > 0 else 0.0
    return KernelIdentityReport(eps=eps, r=r,
                                mass_quadrature=mass, mass_exact=1.0,
                                weighted_quadrature=weighted,
                                weighted_exact=exact,
                                mass_error=abs(mass - 1.0),
                                weighted_error=abs(weighted - exact))


def kernel_tail_mass(eps: float, u0: float) -> float:
    """Mass of k_eps above u0; tends to 0 with eps for any fixed u0 > 0."""
    if eps <= 0 or u0 <= 0:
        raise ParameterError("eps and u0 must be positive")
    if u0 >= 1:
        return 0.0
    return _quad_log_substituted(lambda u: kernel_k_eps(eps, u), 0.0, -np.log(u0))


# ---------------------------------------------------------------------------
# limit reports
# ---------------------------------------------------------------------------

@dataclass
class DensityLimitReport:
    """A limit estimated from a decreasing parameter grid.

    ``values`` is the raw sequence; ``limit`` the two-point extrapolation of
    its tail; ``stability`` the largest successive difference, reported in
    place of an asserted convergence rate.
    """

    x: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    limit: float
    stability: float
    kind: str
    failed: bool = False
    comparison: Optional[dict] = None

    def to_dict(self):
        out = {
            "kind": self.kind,
            "x": [float(v) for v in np.atleast_1d(self.x)],
            "grid": [float(v) for v in self.grid],
            "values": [float(v) for v in self.values],
            "limit": float(self.limit),
            "stability": float(self.stability),
            "failed": bool(self.failed),
        }
        if self.comparison is not None:
            out["comparison"] = {k: float(v) for k, v in self.comparison.items()}
        return out


def _check_decreasing(grid, name):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.diff(grid) < 0):
        raise ParameterError(f"{name} must be a strictly decreasing grid "
                             "with at least two entries")
    return grid


def _extrapolate_linear(grid, values):
    # two-point Richardson assuming value = limit + c * parameter
    g1, g2 = grid[-2], grid[-1]
    v1, v2 = values[-2], values[-1]
    return float(v2 + (v2 - v1) * g2 / (g1 - g2))


def _stability(values):
    diffs = np.abs(np.diff(values))
    return float(diffs.max()) if diffs.size else 0.0


def potential_limit_alpha_to_zero(occ: OccupationMeasure, x, alpha_grid=None
                                  ) -> DensityLimitReport:
    """Occupation density at x recovered as the alpha -> 0 potential limit.

    Computes alpha/(d omega_d) U^alpha mu(x) on the grid and extrapolates
    linearly in alpha; for an absolutely continuous occupation measure the
    limit is the density (local time) at x.
    """
    d = occ.dim
    grid = _check_decreasing(DEFAULT_ALPHA_GRID if alpha_grid is None else alpha_grid,
                             "alpha_grid")
    if grid[0] >= d:
        raise ParameterError(f"alpha grid must stay below d = {d}")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    scale = 1.0 / (d * unit_ball_volume(d))
    values = np.array([a * scale * potential_values(occ, a, x[None, :])[0]
                       for a in grid])
    failed = not np.all(np.isfinite(values))
    limit = _extrapolate_linear(grid, values) if not failed else float("nan")
    return DensityLimitReport(x=x, grid=grid, values=values, limit=limit,
                              stability=_stability(values),
                              kind="potential_limit_alpha_to_zero",
                              failed=failed)


def average_density(occ: OccupationMeasure, s_order: float, x, u_grid=None
                    ) -> DensityLimitReport:
    """Average s-density of the occupation measure at x.

    The log-averaged integral of m_x(r) r^(-s-1) over (u, 1) has an exact
    closed form for the weighted empirical measure, namely
    sum_i w_i (max(u, dist_i)^(-s) - 1)/s over samples with dist_i < 1,
    so no radial quadrature error enters.  The limit u -> 0 is extrapolated
    linearly in 1/|log u|.
    """
    d = occ.dim
    if not 0 < s_order <= d:
        raise ParameterError(f"s_order must lie in (0, d] = (0, {d}], got {s_order}")
    grid = _check_decreasing(DEFAULT_U_GRID if u_grid is None else u_grid, "u_grid")
    if grid[0] >= 1:
        raise ParameterError("u_grid must lie inside (0, 1)")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    diff = occ.positions - x
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    logs = np.abs(np.log(grid))
    lower = np.clip(dist[None, :], grid[:, None], 1.0)
    integral = ((lower ** (-s_order) - 1.0) / s_order * occ.weights[None, :]).sum(axis=1)
    values = integral / logs
    # value = limit + c/|log u| up to the averaging error
    v1, v2 = values[-2], values[-1]
    l1, l2 = logs[-2], logs[-1]
    limit = float((v2 * l2 - v1 * l1) / (l2 - l1))
    return DensityLimitReport(x=x, grid=grid, values=values, limit=limit,
                              stability=_stability(values),
                              kind="average_density")


def potential_limit_varying_order(occ: OccupationMeasure, s_order: float, x,
                                  eps_grid=None, compare_u_grid=None
                                  ) -> DensityLimitReport:
    """eps U^{d-s+eps} mu(x) on a decreasing eps grid, extrapolated to 0.

    The limit equals s times the average s-density whenever the latter
    exists and the ball masses obey a slowly varying upper bound; the report
    carries that paired comparison.
    """
    d = occ.dim
    if not 0 < s_order <= d:
        raise ParameterError(f"s_order must lie in (0, d] = (0, {d}], got {s_order}")
    grid = _check_decreasing(DEFAULT_EPS_GRID if eps_grid is None else eps_grid,
                             "eps_grid")
    if grid[0] >= s_order:
        raise ParameterError("eps grid must stay below s_order so that the "
                             "potential order stays below d")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    values = np.array([e * potential_values(occ, d - s_order + e, x[None, :])[0]
                       for e in grid])
    failed = not np.all(np.isfinite(values))
    limit = _extrapolate_linear(grid, values) if not failed else float("nan")
    companion = average_density(occ, s_order, x, u_grid=compare_u_grid)
    target = s_order * companion.limit
    comparison = {
        "average_density_limit": companion.limit,
        "target": target,
        "ratio": limit / target if target != 0 else float("inf"),
    }
    return DensityLimitReport(x=x, grid=grid, values=values, limit=limit,
                              stability=_stability(values),
                              kind="potential_limit_varying_order",
                              failed=failed, comparison=comparison)


# ---------------------------------------------------------------------------
# ball-mass envelopes
# ---------------------------------------------------------------------------

@dataclass
class BallMassEnvelope:
    """Ratios m_x(r) / (r^s |log r|) over a dyadic radius grid."""

    x: np.ndarray
    s_order: float
    radii: np.ndarray
    ratios: np.ndarray
    sup: float
    trend_slope: float     # slope of log ratio against log r
    diverging: bool

    def to_dict(self):
        return {
            "x": [float(v) for v in np.atleast_1d(self.x)],
            "s_order": float(self.s_order),
            "radii": [float(v) for v in self.radii],
            "ratios": [float(v) for v in self.ratios],
            "sup": float(self.sup),
            "trend_slope": float(self.trend_slope),
            "diverging": bool(self.diverging),
        }


def ball_mass_envelope(occ: OccupationMeasure, x, s_order: float,
                       k_min: int = 4, k_max: int = 14,
                       diverging_slope: float = -0.25) -> BallMassEnvelope:
    """Tabulate m_x(r)/(r^s |log r|) over r = 2^-k, k_min <= k <= k_max.

    A clearly negative trend of log ratio in log r (ratios growing as r
    shrinks) marks the envelope as diverging, as happens e.g. for an atom.
    """
    if k_min >= k_max:
        raise ParameterError("need k_min < k_max")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    radii = 0.5 ** np.arange(k_min, k_max + 1)
    masses = occ.ball_masses(x, radii)
    ratios = masses / (radii ** s_order * np.abs(np.log(radii)))
    positive = ratios > 0
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.log(radii[positive]),
                                 np.log(ratios[positive]), 1)[0])
    else:
        slope = 0.0
    return BallMassEnvelope(x=x, s_order=s_order, radii=radii, ratios=ratios,
                            sup=float(ratios.max()), trend_slope=slope,
                            diverging=bool(slope <= diverging_slope))
