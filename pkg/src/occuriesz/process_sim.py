"""Sample-path synthesis for every process class the toolkit treats.

Process classes
---------------
* fractional Brownian motion (fBm), per-coordinate covariance
  R(s,t) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2, exact on the grid via
  circulant embedding of fractional Gaussian noise (Cholesky fallback),
* Brownian motion as the H = 1/2 special case,
* Rosenblatt processes, built as normalized Hermite-rank-2 partial sums of a
  long-memory Gaussian micro-sequence,
* symmetric beta-stable processes with i.i.d. increments per step,
* solutions of SDEs driven by fBm with H >= 1/2 (Heun scheme for the Young
  regime H > 1/2, explicit midpoint for the Stratonovich case H = 1/2).

All coordinates are independent copies of the one-dimensional construction.
Determinism: identical (spec, seed, rep) gives a bit-identical path; each
(seed, rep, coordinate) triple owns its own counter-based stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (CapacityError, ParameterError, ResolutionError,
                     UnsupportedRegimeError)
from .rng import stream

CHOLESKY_MAX_STEPS = 4096          # n^2 memory bound of the fallback
ROSENBLATT_MICRO_DEFAULT = 2 ** 8  # micro-steps per output step

FBM = "FBM"
BROWNIAN = "BROWNIAN"
ROSENBLATT = "ROSENBLATT"
STABLE_SYM = "STABLE_SYM"
YOUNG_SDE = "YOUNG_SDE"

KINDS = (FBM, BROWNIAN, ROSENBLATT, STABLE_SYM, YOUNG_SDE)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class SamplePath:
    """One discretized realization: a time grid on [0, T] and positions in R^d.

    ``hurst_hint`` carries the roughness exponent of the generating process;
    downstream singularity handling uses it to size cutoff scales.
    """

    times: np.ndarray       # shape (n+1,), strictly increasing, [0, T]
    positions: np.ndarray   # shape (n+1, d)
    dim: int
    hurst_hint: Optional[float] = None

    def __post_init__(self):
        self.times = np.ascontiguousarray(self.times, dtype=np.float64)
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        self.validate()

    def validate(self):
        if self.dim < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim}")
        if self.times.ndim != 1 or self.times.size < 2:
            raise ParameterError("times must be a 1-d grid with >= 2 entries")
        if self.times[0] != 0.0:
            raise ParameterError(f"times must start at 0, got {self.times[0]}")
        if not np.all(np.diff(self.times) > 0):
            raise ParameterError("times must be strictly increasing")
        if self.positions.shape != (self.times.size, self.dim):
            raise ParameterError(
                f"positions shape {self.positions.shape} does not match "
                f"(len(times), dim) = ({self.times.size}, {self.dim})")
        if not np.all(np.isfinite(self.positions)):
            raise ParameterError("positions contain non-finite values")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1


@dataclass
class SDECoefficients:
    """Data of the driven equation dX = V0(X) dt + V(X) dB.

    ``drift`` maps R^d -> R^d; ``diffusion`` maps R^d to the (d, d) matrix
    whose columns multiply the driver coordinates.  Caller contract: smooth,
    bounded derivatives, and ``diffusion`` uniformly elliptic with constant
    ``ellipticity``.
    """

    x0: np.ndarray
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    ellipticity: float = 1.0

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64))
        if self.ellipticity <= 0:
            raise ParameterError("ellipticity must be positive")


@dataclass
class ProcessSpec:
    """Declarative recipe: which process to sample, with which parameters."""

    kind: str
    d: int = 1
    n_steps: int = 1024
    T: float = 1.0
    seed: int = 0
    H: Optional[float] = None
    beta_stable: Optional[float] = None
    rosenblatt_micro: int = ROSENBLATT_MICRO_DEFAULT
    sde: Optional[SDECoefficients] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown process kind {self.kind!r}; "
                                 f"expected one of {KINDS}")
        if self.d < 1:
            raise ParameterError("d must be >= 1")
        if self.n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        if self.T <= 0:
            raise ParameterError("T must be positive")
        if self.kind == BROWNIAN and self.H is None:
            self.H = 0.5
        if self.kind in (FBM, ROSENBLATT, YOUNG_SDE):
            if self.H is None or not 0 < self.H < 1:
                raise ParameterError(f"{self.kind} requires H in (0,1), got {self.H}")
        if self.kind == ROSENBLATT and not self.H > 0.5:
            raise ParameterError(f"ROSENBLATT requires H in (1/2,1), got H={self.H}")
        if self.kind == YOUNG_SDE:
            if self.H < 0.5:
                raise UnsupportedRegimeError(
                    f"YOUNG_SDE requires H >= 1/2 (got H={self.H}); the rough-path "
                    "regime H in (1/4,1/2) is out of scope for this artifact")
            if self.sde is None:
                raise ParameterError("YOUNG_SDE requires sde coefficients")
        if self.kind == STABLE_SYM:
            if self.beta_stable is None or not 0 < self.beta_stable <= 2:
                raise ParameterError(
                    f"STABLE_SYM requires beta_stable in (0,2], got {self.beta_stable}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def grid(self) -> np.ndarray:
        t = np.linspace(0.0, self.T, self.n_steps + 1)
        t[-1] = self.T
        return t


# ---------------------------------------------------------------------------
# fractional Gaussian noise synthesis
# ---------------------------------------------------------------------------

def fgn_autocovariance(max_lag: int, H: float) -> np.ndarray:
    """Autocovariance of unit-variance fGn at lags 0..max_lag."""
    k = np.arange(max_lag + 1, dtype=np.float64)
    return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


def _embedding_eigenvalues(n: int, H: float) -> np.ndarray:
    rho = fgn_autocovariance(n, H)
    circ = np.concatenate([rho[:n], rho[n:n + 1], rho[n - 1:0:-1]])
    return np.fft.fft(circ).real


def _fgn_from_gaussians(lam: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Map 2n i.i.d. standard normals to one exact fGn block of length n.

    ``lam`` are the 2n circulant eigenvalues, ``z`` has shape (..., 2n).
    The map is linear, which the tests exploit to verify the covariance
    exactly rather than by Monte Carlo.
    """
    m = lam.size
    n = m // 2
    spec = np.zeros(z.shape, dtype=np.complex128)
    spec[..., 0] = np.sqrt(lam[0] / m) * z[..., 0]
    spec[..., n] = np.sqrt(lam[n] / m) * z[..., 1]
    half = np.sqrt(lam[1:n] / (2 * m))
    core = half * (z[..., 2:2 * n:2] + 1j * z[..., 3:2 * n + 1:2])
    spec[..., 1:n] = core
    spec[..., n + 1:] = np.conj(core[..., ::-1])
    return np.fft.fft(spec, axis=-1).real[..., :n]


def _fgn_cholesky(n: int, H: float, rng: np.random.Generator,
                  size: tuple = ()) -> np.ndarray:
    if n > CHOLESKY_MAX_STEPS:
        raise CapacityError(
            f"circulant embedding failed and n_steps={n} exceeds the Cholesky "
            f"fallback bound {CHOLESKY_MAX_STEPS}")
    rho = fgn_autocovariance(n - 1, H)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    cov = rho[idx]
    # tiny jitter guards against roundoff on the PSD boundary
    L = np.linalg.cholesky(cov + 1e-12 * np.eye(n))
    z = rng.standard_normal(size + (n,))
    return z @ L.T


def sample_fgn(n: int, H: float, rng: np.random.Generator,
               size: tuple = ()) -> np.ndarray:
    """Unit-variance fGn of length n (exact grid distribution).

    Uses the circulant embedding when its eigenvalues are nonnegative and a
    dense Cholesky factorization otherwise.
    """
    lam = _embedding_eigenvalues(n, H)
    floor = -1e-8 * lam.max()
    if lam.min() < floor:
        return _fgn_cholesky(n, H, rng, size)
    z = rng.standard_normal(size + (2 * n,))
    return _fgn_from_gaussians(np.clip(lam, 0.0, None), z)


def fbm_covariance(s, t, H: float):
    """R(s,t) of one fBm coordinate."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    return 0.5 * (np.abs(t) ** (2 * H) + np.abs(s) ** (2 * H)
                  - np.abs(t - s) ** (2 * H))


def sample_fbm_increments(n: int, H: float, dt: float, rng: np.random.Generator,
                          size: tuple = ()) -> np.ndarray:
    """Increments of fBm on a uniform grid with step dt, exact in law."""
    return dt ** H * sample_fgn(n, H, rng, size)


def simulate_fbm(spec: ProcessSpec, rep: int = 0) -> SamplePath:
    """Sample a d-dimensional fBm path, exact in distribution on the grid.

    Coordinates are independent.  Requires n_steps to be a power of two so
    the embedding FFT stays an O(n log n) synthesis.
    """
    if spec.kind not in (FBM, BROWNIAN):
        raise ParameterError(f"simulate_fbm got spec of kind {spec.kind}")
    n = spec.n_steps
    if n & (n - 1):
        raise ResolutionError(f"n_steps must be a power of two, got {n}")
    H = spec.H
    paths = np.empty((n + 1, spec.d))
    paths[0] = 0.0
    for coord in range(spec.d):
        rng = stream(spec.seed, rep, coord)
        incr = sample_fbm_increments(n, H, spec.dt, rng)
        np.cumsum(incr, out=paths[1:, coord])
    return SamplePath(times=spec.grid(), positions=paths, dim=spec.d, hurst_hint=H)


# ---------------------------------------------------------------------------
# Rosenblatt processes
# ---------------------------------------------------------------------------

def _rank2_sum_variance(n_total: int, micro_H: float) -> float:
    """Exact variance of sum_{k<=N} (xi_k^2 - 1) for a unit fGn micro-sequence."""
    rho = fgn_autocovariance(n_total - 1, micro_H)
    lags = np.arange(n_total, dtype=np.float64)
    # Var = 2 * sum_{|k|<N} (N - |k|) rho(k)^2
    return float(2.0 * (n_total * rho[0] ** 2
                        + 2.0 * np.sum((n_total - lags[1:]) * rho[1:] ** 2)))


def simulate_rosenblatt(spec: ProcessSpec, rep: int = 0) -> SamplePath:
    """Sample a d-dimensional Rosenblatt path of Hurst index H in (1/2, 1).

    Each coordinate is built from the partial sums of xi_k^2 - 1, where xi is
    a stationary Gaussian sequence with autocovariance decaying like
    k^(H-1); concretely xi is unit fGn of parameter (H+1)/2, which has
    exactly that tail.  There are ``rosenblatt_micro`` micro-steps per output
    step, and the output is scaled so that Var Z_t = t^{2H} holds exactly at
    t = T (hence Var Z_1 = 1 under the process self-similarity).
    """
    if spec.kind != ROSENBLATT:
        raise ParameterError(f"simulate_rosenblatt got spec of kind {spec.kind}")
    H = spec.H
    M = spec.rosenblatt_micro
    N = spec.n_steps * M
    micro_H = (H + 1.0) / 2.0
    norm = spec.T ** H / np.sqrt(_rank2_sum_variance(N, micro_H))
    out = np.zeros((spec.n_steps + 1, spec.d))
    for coord in range(spec.d):
        rng = stream(spec.seed, rep, coord)
        xi = sample_fgn(N, micro_H, rng)
        partial = np.cumsum(xi * xi - 1.0)
        out[1:, coord] = norm * partial[M - 1::M]
    return SamplePath(times=spec.grid(), positions=out, dim=spec.d, hurst_hint=H)


# ---------------------------------------------------------------------------
# symmetric stable processes
# ---------------------------------------------------------------------------

def sample_symmetric_stable(beta: float, rng: np.random.Generator,
                            size: tuple = ()) -> np.ndarray:
    """Standard symmetric beta-stable variates (Chambers-Mallows-Stuck).

    Characteristic function exp(-|xi|^beta); at beta = 2 this is N(0, 2).
    """
    u = rng.uniform(-np.pi / 2, np.pi / 2, size=size)
    if beta == 1.0:
        return np.tan(u)
    e = rng.standard_exponential(size=size)
    g = (np.sin(beta * u) / np.cos(u) ** (1.0 / beta)
         * (np.cos((1.0 - beta) * u) / e) ** ((1.0 - beta) / beta))
    return g


def simulate_stable(spec: ProcessSpec, rep: int = 0) -> SamplePath:
    """Sample a path with i.i.d. symmetric beta-stable increments.

    Scale convention: one increment over dt has characteristic function
    exp(-dt |xi|^beta), so beta = 2 reduces to Gaussian increments of
    variance 2 dt and X_{ct} =d= c^{1/beta} X_t.
    """
    if spec.kind != STABLE_SYM:
        raise ParameterError(f"simulate_stable got spec of kind {spec.kind}")
    beta = spec.beta_stable
    scale = spec.dt ** (1.0 / beta)
    out = np.empty((spec.n_steps + 1, spec.d))
    out[0] = 0.0
    for coord in range(spec.d):
        rng = stream(spec.seed, rep, coord)
        incr = scale * sample_symmetric_stable(beta, rng, (spec.n_steps,))
        np.cumsum(incr, out=out[1:, coord])
    hint = 1.0 / beta if beta > 1 else None  # self-similarity index, only in (0,1) for beta>1
    return SamplePath(times=spec.grid(), positions=out, dim=spec.d, hurst_hint=hint)


# ---------------------------------------------------------------------------
# SDEs driven by fBm (Young / Stratonovich regime)
# ---------------------------------------------------------------------------

def solve_young_sde(spec: ProcessSpec, driver: SamplePath) -> SamplePath:
    """Pathwise solve of dX = V0(X) dt + V(X) dB on the driver's grid.

    H > 1/2 uses a Heun (predictor-corrector) step for the Young integral;
    H = 1/2 uses the explicit midpoint step, which converges to the
    Stratonovich solution.
    """
    if spec.kind != YOUNG_SDE:
        raise ParameterError(f"solve_young_sde got spec of kind {spec.kind}")
    if spec.H < 0.5:
        raise UnsupportedRegimeError(
            "solve_young_sde supports H >= 1/2 only; rough-path lifting for "
            "H in (1/4,1/2) is a declared non-goal")
    if driver.dim != spec.d:
        raise ParameterError(f"driver dim {driver.dim} != spec.d {spec.d}")
    coeffs = spec.sde
    v0, vmat = coeffs.drift, coeffs.diffusion
    t = driver.times
    b = driver.positions
    n = t.size - 1
    x = np.empty((n + 1, spec.d))
    x[0] = coeffs.x0
    if spec.H > 0.5:
        for k in range(n):
            dt = t[k + 1] - t[k]
            db = b[k + 1] - b[k]
            xk = x[k]
            f0 = v0(xk)
            g0 = vmat(xk)
            pred = xk + f0 * dt + g0 @ db
            x[k + 1] = xk + 0.5 * (f0 + v0(pred)) * dt + 0.5 * (g0 + vmat(pred)) @ db
    else:
        for k in range(n):
            dt = t[k + 1] - t[k]
            db = b[k + 1] - b[k]
            xk = x[k]
            mid = xk + 0.5 * v0(xk) * dt + 0.5 * (vmat(xk) @ db)
            x[k + 1] = xk + v0(mid) * dt + vmat(mid) @ db
    return SamplePath(times=t.copy(), positions=x, dim=spec.d, hurst_hint=spec.H)


def simulate(spec: ProcessSpec, rep: int = 0) -> SamplePath:
    """Dispatch on spec.kind.  YOUNG_SDE simulates its fBm driver internally."""
    if spec.kind in (FBM, BROWNIAN):
        return simulate_fbm(spec, rep)
    if spec.kind == ROSENBLATT:
        return simulate_rosenblatt(spec, rep)
    if spec.kind == STABLE_SYM:
        return simulate_stable(spec, rep)
    if spec.kind == YOUNG_SDE:
        driver_spec = ProcessSpec(kind=FBM, H=spec.H, d=spec.d,
                                  n_steps=spec.n_steps, T=spec.T, seed=spec.seed)
        return solve_young_sde(spec, simulate_fbm(driver_spec, rep))
    raise ParameterError(f"unknown kind {spec.kind}")


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

PATH_SCHEMA_VERSION = 1


def _header(spec_like: dict) -> dict:
    head = {"schema": PATH_SCHEMA_VERSION}
    head.update(spec_like)
    return head


def save_path(path: SamplePath, filename: str, header: Optional[dict] = None,
              fmt: str = "npz") -> None:
    """Persist a path.  ``npz`` round-trips bit-exactly; ``csv`` is lossy-free
    too (float repr) but meant for interchange."""
    meta = _header(header or {})
    meta.setdefault("d", path.dim)
    meta.setdefault("n_steps", path.n_steps)
    meta.setdefault("T", path.horizon)
    if path.hurst_hint is not None:
        meta.setdefault("H", path.hurst_hint)
    if fmt == "npz":
        np.savez(filename, times=path.times, positions=path.positions,
                 header=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8))
    elif fmt == "csv":
        cols = ["t"] + [f"x_{i + 1}" for i in range(path.dim)]
        with open(filename, "w") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            fh.write(",".join(cols) + "\n")
            for i in range(path.times.size):
                row = [repr(float(path.times[i]))]
                row += [repr(float(v)) for v in path.positions[i]]
                fh.write(",".join(row) + "\n")
    else:
        raise ParameterError(f"unknown format {fmt!r}; use 'npz' or 'csv'")


def load_path(filename: str) -> tuple[SamplePath, dict]:
    """Load a path saved by :func:`save_path`; returns (path, header)."""
    if filename.endswith(".csv"):
        with open(filename) as fh:
            meta = json.loads(fh.readline().lstrip("# ").strip())
            fh.readline()
            data = np.loadtxt(fh, delimiter=",")
        times, pos = data[:, 0], data[:, 1:]
    else:
        with np.load(filename) as archive:
            meta = json.loads(bytes(archive["header"]).decode())
            times, pos = archive["times"], archive["positions"]
    hp = meta.get("H")
    return SamplePath(times=times, positions=pos, dim=pos.shape[1],
                      hurst_hint=hp), meta


# ---------------------------------------------------------------------------
# deterministic stub paths for negative controls
# ---------------------------------------------------------------------------

def constant_path(point: Sequence[float], n_steps: int = 64, T: float = 1.0) -> SamplePath:
    p = np.atleast_1d(np.asarray(point, dtype=np.float64))
    t = np.linspace(0.0, T, n_steps + 1)
    return SamplePath(times=t, positions=np.tile(p, (n_steps + 1, 1)),
                      dim=p.size, hurst_hint=0.5)


def linear_path(speed: float = 1.0, n_steps: int = 64, T: float = 1.0,
                d: int = 1) -> SamplePath:
    t = np.linspace(0.0, T, n_steps + 1)
    pos = np.zeros((n_steps + 1, d))
    pos[:, 0] = speed * t
    return SamplePath(times=t, positions=pos, dim=d, hurst_hint=1.0 - 1e-9)
