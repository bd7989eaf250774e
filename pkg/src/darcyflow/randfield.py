"""Log-normal hydraulic-conductivity fields via randomized spectral sampling.

A field is a superposition of N cosine modes,

    Y'(x) = c2 * sum_i cos(phase_i + 2*pi*k_i.x),      K(x) = c1 * exp(Y'(x)),

with wavenumbers k_i drawn from the normalized spectral density of the
requested correlation model and phases uniform on [0, 2*pi).  Uniform phases
make Var(Y') = sigma^2 exactly in expectation, and the empirical covariance
of Y' reproduces the chosen correlation function.
"""

from __future__ import annotations

import concurrent.futures
import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DomainError, SolverError

TWO_PI = 2.0 * np.pi


class CorrelationKind(enum.Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value) -> "CorrelationKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown correlation kind: {value!r}") from None


@dataclass(frozen=True)
class FieldSpec:
    """Statistical description of one log-conductivity field.

    sigma2 is the variance of the log-conductivity perturbation, lambdas the
    per-axis correlation lengths, n_modes the number of cosine modes, mean_k
    the (geometric) mean conductivity, and seed the 64-bit master seed for
    reproducible realizations.
    """

    dim: int
    kind: CorrelationKind
    sigma2: float
    lambdas: tuple
    n_modes: int
    mean_k: float = 15.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", CorrelationKind.parse(self.kind))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in np.atleast_1d(self.lambdas)))
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.lambdas) != self.dim:
            raise DomainError(f"need {self.dim} correlation lengths, got {len(self.lambdas)}")
        if any(l <= 0 or not math.isfinite(l) for l in self.lambdas):
            raise DomainError("correlation lengths must be positive and finite")
        if self.sigma2 < 0 or not math.isfinite(self.sigma2):
            raise DomainError("sigma2 must be >= 0")
        if self.n_modes < 1:
            raise DomainError("n_modes must be >= 1")
        if self.mean_k <= 0:
            raise DomainError("mean_k must be > 0")


@dataclass(frozen=True)
class FieldRealization:
    """One frozen sample of a field: modes, phases and scaling constants."""

    spec: FieldSpec
    wavenumbers: np.ndarray  # (N, dim)
    phases: np.ndarray  # (N,)
    c1: float
    c2: float

    def __post_init__(self):
        if self.wavenumbers.shape != (self.spec.n_modes, self.spec.dim):
            raise DomainError("wavenumber array has wrong shape")
        if self.phases.shape != (self.spec.n_modes,):
            raise DomainError("phase array has wrong shape")
        self.wavenumbers.setflags(write=False)
        self.phases.setflags(write=False)


def covariance(kind, r, sigma2: float, lam: float):
    """Covariance of Y' at separation distance r (isotropic form)."""
    kind = CorrelationKind.parse(kind)
    r = np.asarray(r, dtype=float)
    if lam <= 0 or not np.isfinite(lam) or not np.all(np.isfinite(r)) or not np.isfinite(sigma2):
        raise DomainError("covariance needs finite inputs and lam > 0")
    if kind is CorrelationKind.EXPONENTIAL:
        out = sigma2 * np.exp(-np.abs(r) / lam)
    else:
        out = sigma2 * np.exp(-(r / lam) ** 2)
    return float(out) if out.ndim == 0 else out


def spectral_density(kind, k, lam: float, sigma2: float, d: int):
    """Spectral density S(k) matching :func:`covariance` for dimension d."""
    kind = CorrelationKind.parse(kind)
    if d not in (1, 2, 3):
        raise DomainError(f"d must be 1, 2 or 3, got {d}")
    k = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k)):
        raise DomainError("non-finite wavenumber")
    if kind is CorrelationKind.EXPONENTIAL:
        out = sigma2 * lam**d * (1.0 + (TWO_PI * k * lam) ** 2) ** (-(d + 1) / 2.0)
    else:
        out = sigma2 * np.pi ** (d / 2.0) * lam**d * np.exp(-((np.pi * k * lam) ** 2))
    return float(out) if out.ndim == 0 else out


def exp_radius_2d(mu):
    """Radius of a unit-scale 2D exponential-spectrum mode from uniform mu."""
    mu = np.asarray(mu, dtype=float)
    return np.sqrt(1.0 / mu**2 - 1.0)


def _exp_radius_3d_cdf(r):
    return (2.0 / np.pi) * (np.arctan(r) - r / (1.0 + r * r))


def exp_radius_3d(gamma1, tol: float = 1e-12):
    """Radius of a unit-scale 3D exponential-spectrum mode.

    Solves (2/pi)*(arctan r - r/(1+r^2)) = gamma1 by bisection; the bracket
    is grown by doubling and must close below 1e8.
    """
    g = np.atleast_1d(np.asarray(gamma1, dtype=float))
    if np.any((g < 0) | (g >= 1)):
        raise DomainError("gamma1 must lie in [0, 1)")
    hi = np.ones_like(g)
    for _ in range(60):
        short = _exp_radius_3d_cdf(hi) < g
        if not short.any():
            break
        hi[short] *= 2.0
        if np.any(hi > 1e8):
            raise SolverError("3D exponential radius failed to bracket in [0, 1e8]")
    else:
        raise SolverError("3D exponential radius failed to bracket in [0, 1e8]")
    lo = np.zeros_like(g)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        below = _exp_radius_3d_cdf(mid) < g
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    return float(out[0]) if np.isscalar(gamma1) or np.ndim(gamma1) == 0 else out


def _sample_wavenumbers(spec: FieldSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n wavenumber vectors from the normalized spectral density.

    Gaussian correlation: independent normals scaled by 1/(sqrt(2)*pi*lambda_j).
    Exponential correlation: a unit-scale heavy-tailed radial draw (Cauchy in
    1D, the closed-form inverse CDF in 2D, a bisection solve in 3D) combined
    with a uniform direction, then scaled by 1/(2*pi*lambda_j) per axis so
    the field covariance decays with the requested correlation length.
    """
    lam = np.asarray(spec.lambdas)
    if spec.kind is CorrelationKind.GAUSSIAN:
        return rng.standard_normal((n, spec.dim)) / (np.sqrt(2.0) * np.pi * lam)
    if spec.dim == 1:
        u = rng.uniform(size=n)
        return (np.tan(np.pi * (u - 0.5)) / (TWO_PI * lam))[:, None]
    if spec.dim == 2:
        mu = rng.uniform(size=n)
        mu[mu == 0.0] = 0.5  # uniform(0,1): exclude the measure-zero endpoint
        r = exp_radius_2d(mu)
        ang = TWO_PI * rng.uniform(size=n)
        u = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        return u / (TWO_PI * lam)
    xi = rng.uniform(size=n)
    gamma = rng.uniform(size=n)
    gamma1 = rng.uniform(size=n)
    theta = np.arccos(1.0 - 2.0 * xi)
    r = exp_radius_3d(gamma1)
    u = np.column_stack(
        [
            r * np.sin(theta) * np.cos(TWO_PI * gamma),
            r * np.sin(theta) * np.sin(TWO_PI * gamma),
            r * np.cos(theta),
        ]
    )
    return u / (TWO_PI * lam)


def sample_wavenumber(spec: FieldSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw a single wavenumber vector (dim entries)."""
    return _sample_wavenumbers(spec, rng, 1)[0]


def _c1(spec: FieldSpec) -> float:
    factor = -spec.sigma2 / (6.0 if spec.dim == 3 else 2.0)
    return spec.mean_k * math.exp(factor)


def realization_rng(spec: FieldSpec, index: int = 0) -> np.random.Generator:
    """Independent PCG64 stream for realization `index` of this spec."""
    return np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(index,)))


def realize(spec: FieldSpec, index: int = 0) -> FieldRealization:
    """Draw one realization: (spec, index) -> realization is a pure function.

    Wavenumbers are drawn first, then phases, from a stream derived from
    (spec.seed, index), so ensembles can be generated independently and in
    parallel.
    """
    rng = realization_rng(spec, index)
    wavenumbers = np.ascontiguousarray(_sample_wavenumbers(spec, rng, spec.n_modes))
    phases = rng.uniform(0.0, TWO_PI, size=spec.n_modes)
    return FieldRealization(spec, wavenumbers, phases, _c1(spec), spec_scale(spec))


def _points_2d(real: FieldRealization, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != real.spec.dim:
        raise DomainError(f"points have dim {pts.shape[1]}, field has dim {real.spec.dim}")
    return np.ascontiguousarray(pts)


def eval_logk_perturbation(real: FieldRealization, x):
    """Y'(x); accepts a single point (dim,) or a stack of points (n, dim)."""
    pts = _points_2d(real, x)
    y = real.c2 * _backend.mode_sum(real.wavenumbers, real.phases, pts)
    return float(y[0]) if np.ndim(x) == 1 else y


def eval_k(real: FieldRealization, x):
    """Hydraulic conductivity K(x) = c1 * exp(Y'(x))."""
    y = eval_logk_perturbation(real, x)
    return real.c1 * np.exp(y)


def eval_k_and_grad(real: FieldRealization, x):
    """K(x) and its exact gradient, one fused kernel pass."""
    pts = _points_2d(real, x)
    y, g = _backend.mode_sum_grad(real.wavenumbers, real.phases, pts)
    k = real.c1 * np.exp(real.c2 * y)
    grad = (real.c2 * k)[:, None] * g
    if np.ndim(x) == 1:
        return float(k[0]), grad[0]
    return k, grad


def eval_gradk(real: FieldRealization, x):
    """Gradient of K; same point conventions as :func:`eval_k`."""
    return eval_k_and_grad(real, x)[1]


@dataclass
class EnsembleStats:
    variance: float
    mean: float
    covariance: dict
    n_samples: int
    lags: tuple = field(default_factory=tuple)


def ensemble_stats(
    spec: FieldSpec,
    n_realizations: int,
    n_points: int,
    lags=(),
    box=None,
    jobs: int = None,
) -> EnsembleStats:
    """Monte-Carlo moments of Y' over an ensemble of realizations.

    Sample points are uniform over `box` (default [0, 10*max(lambda)]^dim).
    Covariance at each lag pairs every sample point with its shift along one
    random unit direction per (realization, lag); the shifted sums reuse the
    per-mode trigonometry through :func:`_backend.mode_sum_lagged`, so lags
    are nearly free.  Realizations are evaluated on a thread pool: the
    kernels drop the GIL, and every random draw comes from a
    per-realization stream, so results do not depend on scheduling.
    """
    lags = tuple(float(l) for l in lags)
    if box is None:
        side = 10.0 * max(spec.lambdas)
        box = [(0.0, side)] * spec.dim
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])

    def one(index: int):
        real = realize(spec, index)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(index, 1)))
        pts = np.ascontiguousarray(rng.uniform(lo, hi, size=(n_points, spec.dim)))
        if spec.dim == 1:
            directions = np.ones((len(lags), 1))
        else:
            directions = rng.standard_normal((len(lags), spec.dim))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        shifts = np.asarray(lags)[:, None] * directions if lags else np.zeros((0, spec.dim))
        table_arg = TWO_PI * (shifts @ real.wavenumbers.T)
        y, ylag = _backend.mode_sum_lagged(
            real.wavenumbers, real.phases, pts, np.cos(table_arg), np.sin(table_arg)
        )
        return float(y.sum()), float(y @ y), (y @ ylag)

    if jobs is None:
        jobs = min(os.cpu_count() or 1, n_realizations)
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(n_realizations)))
    else:
        results = [one(i) for i in range(n_realizations)]

    n_total = n_realizations * n_points
    s1 = sum(r[0] for r in results)
    s2 = sum(r[1] for r in results)
    mean = s1 * spec_scale(spec) / n_total
    variance = s2 * spec_scale(spec) ** 2 / n_total - mean**2
    cov = {}
    for li, lag in enumerate(lags):
        cov[lag] = sum(r[2][li] for r in results) * spec_scale(spec) ** 2 / n_total
    return EnsembleStats(variance=variance, mean=mean, covariance=cov, n_samples=n_total, lags=lags)


def spec_scale(spec: FieldSpec) -> float:
    """The c2 amplitude sigma*sqrt(2/N) shared by every realization of a spec."""
    return math.sqrt(spec.sigma2 * 2.0 / spec.n_modes)


# ---------------------------------------------------------------------------
# Grid snapshot files
# ---------------------------------------------------------------------------

def grid_axes(bounds, shape):
    """Inclusive uniform coordinates per axis."""
    return [np.linspace(b[0], b[1], n) for b, n in zip(bounds, shape)]


def write_grid_file(path, bounds, shape, values) -> None:
    """Plain-text grid snapshot.

    Header: ``dim nx [ny [nz]] x0 x1 [y0 y1 [z0 z1]]``; then one value per
    line, 17 significant digits, C row-major order of the (nx[,ny[,nz]])
    array (last listed axis varies fastest).
    """
    shape = tuple(int(n) for n in shape)
    values = np.asarray(values, dtype=float).reshape(shape)
    dim = len(shape)
    header = [str(dim)] + [str(n) for n in shape]
    for b in bounds:
        header += [f"{b[0]:.17g}", f"{b[1]:.17g}"]
    lines = [" ".join(header)]
    lines += [f"{v:.17g}" for v in values.ravel(order="C")]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid_file(path):
    """Inverse of :func:`write_grid_file` -> (bounds, shape, values)."""
    with open(path) as fh:
        head = fh.readline().split()
        dim = int(head[0])
        shape = tuple(int(v) for v in head[1 : 1 + dim])
        rest = [float(v) for v in head[1 + dim :]]
        if len(rest) != 2 * dim:
            raise DomainError(f"malformed grid header in {path}")
        bounds = [(rest[2 * i], rest[2 * i + 1]) for i in range(dim)]
        values = np.array([float(line) for line in fh if line.strip()])
    if values.size != int(np.prod(shape)):
        raise DomainError(f"grid file {path} has {values.size} values, expected {np.prod(shape)}")
    return bounds, shape, values.reshape(shape)


def eval_k_on_grid(real: FieldRealization, bounds, shape) -> np.ndarray:
    """K sampled on the inclusive uniform tensor grid."""
    axes = grid_axes(bounds, shape)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel(order="C") for m in mesh])
    return eval_k(real, pts).reshape(tuple(shape))
