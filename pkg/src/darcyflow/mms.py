"""Manufactured solutions for exact-error verification.

Two analytic head families are supported,

    sine_of_sum:  h(x) = a0 + sin(a1*x1 + ... + ad*xd)
    sum_of_sines: h(x) = a0 + sin(a1*x1) + ... + sin(ad*xd)

with the matching source f = div(K grad h) assembled from the exact field
derivatives, and boundary data split the way every experiment uses it:
Dirichlet head values on the two x-extreme faces, axis-derivative (Neumann)
data everywhere else.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import randfield
from .errors import DomainError


class Family(enum.Enum):
    SINE_OF_SUM = "sine_of_sum"
    SUM_OF_SINES = "sum_of_sines"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown manufactured family: {value!r}") from None


# Coefficients (a0, a1, .., ad) used throughout the experiments.
CANONICAL_COEFFS = {
    (1, Family.SINE_OF_SUM): (3.0, 1.0),
    (1, Family.SUM_OF_SINES): (3.0, 1.0),
    (2, Family.SINE_OF_SUM): (1.0, 2.0, 1.0),
    (2, Family.SUM_OF_SINES): (1.0, 2.0, 1.0),
    (3, Family.SINE_OF_SUM): (1.0, 3.0, 2.0, 1.0),
    (3, Family.SUM_OF_SINES): (5.0, 3.0, 2.0, 1.0),
}

_CANONICAL_BOUNDS = {
    1: ((0.0, 25.0),),
    2: ((0.0, 20.0), (0.0, 20.0)),
    3: ((0.0, 5.0), (0.0, 2.0), (0.0, 1.0)),
}


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box; bounds is a tuple of (lo, hi) per axis."""

    bounds: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) not in (1, 2, 3):
            raise DomainError("domain must have 1-3 axes")
        if any(lo >= hi for lo, hi in bounds):
            raise DomainError("each axis needs lo < hi")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @classmethod
    def canonical(cls, dim: int) -> "Domain":
        if dim not in _CANONICAL_BOUNDS:
            raise DomainError(f"no canonical domain for dim {dim}")
        return cls(_CANONICAL_BOUNDS[dim])


@dataclass(frozen=True)
class ManufacturedCase:
    """Which analytic solution is in force: family plus coefficients a0..ad.

    Anything with the same ``dim`` / ``head`` / ``grad`` / ``curvature``
    surface can stand in for a case wherever one is consumed (the solvers
    only ever call these four).
    """

    dim: int
    family: Family
    coeffs: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        coeffs = self.coeffs
        if coeffs is None:
            coeffs = CANONICAL_COEFFS[(self.dim, self.family)]
        coeffs = tuple(float(c) for c in coeffs)
        if len(coeffs) != self.dim + 1:
            raise DomainError(f"need {self.dim + 1} coefficients, got {len(coeffs)}")
        if any(c == 0.0 for c in coeffs[1:]):
            raise DomainError("a1..ad must be non-zero")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def a0(self) -> float:
        return self.coeffs[0]

    @property
    def a(self) -> np.ndarray:
        return np.array(self.coeffs[1:])

    def head(self, pts: np.ndarray) -> np.ndarray:
        a = self.a
        if self.family is Family.SINE_OF_SUM:
            return self.a0 + np.sin(pts @ a)
        return self.a0 + np.sin(a * pts).sum(axis=1)

    def grad(self, pts: np.ndarray) -> np.ndarray:
        a = self.a
        if self.family is Family.SINE_OF_SUM:
            return a * np.cos(pts @ a)[:, None]
        return a * np.cos(a * pts)

    def curvature(self, pts: np.ndarray) -> np.ndarray:
        """Pure second derivatives d^2 h / dx_j^2, one column per axis."""
        a = self.a
        if self.family is Family.SINE_OF_SUM:
            return -(a**2) * np.sin(pts @ a)[:, None]
        return -(a**2) * np.sin(a * pts)


def _pts(case, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != case.dim:
        raise DomainError(f"points have dim {pts.shape[1]}, case has dim {case.dim}")
    return pts


def _maybe_scalar(values, x):
    return float(values[0]) if np.ndim(x) == 1 else values


def h_exact(case, x):
    """Exact hydraulic head at x ((dim,) or (n, dim))."""
    return _maybe_scalar(case.head(_pts(case, x)), x)


def grad_h_exact(case, x):
    """Exact head gradient, shape matching the input points."""
    out = case.grad(_pts(case, x))
    return out[0] if np.ndim(x) == 1 else out


def d2h_exact(case, x):
    """Pure second derivatives d^2 h / dx_j^2 per axis."""
    out = case.curvature(_pts(case, x))
    return out[0] if np.ndim(x) == 1 else out


def source_f(case: ManufacturedCase, real: randfield.FieldRealization, x):
    """Analytic source f = div(K grad h) for the manufactured head.

    Expanded as sum_j (dK/dx_j * dh/dx_j + K * d2h/dx_j^2) with K and its
    exact gradient from the field realization.
    """
    if case.dim != real.spec.dim:
        raise DomainError(f"case dim {case.dim} != field dim {real.spec.dim}")
    pts = _pts(case, x)
    k, gk = randfield.eval_k_and_grad(real, pts)
    out = (gk * case.grad(pts)).sum(axis=1) + k * case.curvature(pts).sum(axis=1)
    return _maybe_scalar(out, x)


def source_f_fd_oracle(case, real, x, step_scale: float = 1e-5):
    """Independent check of source_f: central differences of the flux.

    Applies central differences to K(x)*dh/dx_j (with analytic dh) and sums
    the divergence; the step is step_scale * min(lambda).
    """
    pts = _pts(case, x)
    step = step_scale * min(real.spec.lambdas)
    out = np.zeros(pts.shape[0])
    for j in range(case.dim):
        for sign in (1.0, -1.0):
            shifted = pts.copy()
            shifted[:, j] += sign * step
            flux = randfield.eval_k(real, shifted) * grad_h_exact(case, shifted)[:, j]
            out += sign * flux / (2.0 * step)
    return _maybe_scalar(out, x)


@dataclass(frozen=True)
class Face:
    """One boundary face: fixed axis/side, BC kind and outward normal sign."""

    axis: int
    side: str  # "lo" | "hi"
    kind: str  # "dirichlet" | "neumann"
    coord: float
    normal_sign: float


@dataclass(frozen=True)
class BoundaryData:
    """Boundary data of a case on a domain.

    Dirichlet faces carry the exact head; Neumann faces carry the axis
    partial derivative dh/dx_axis on the face (the flux form -K*dh/dn is
    assembled by consumers, and squared residuals make the normal-sign
    convention immaterial as long as both sides use the same one).
    """

    case: ManufacturedCase
    domain: Domain
    faces: tuple

    def value(self, face: Face, x):
        if face.kind == "dirichlet":
            return h_exact(self.case, x)
        g = grad_h_exact(self.case, x)
        return g[face.axis] if np.ndim(x) == 1 else g[:, face.axis]


def domain_faces(domain: Domain) -> tuple:
    """All faces of a box: Dirichlet on the x extremes, Neumann elsewhere."""
    faces = []
    for axis in range(domain.dim):
        kind = "dirichlet" if axis == 0 else "neumann"
        lo, hi = domain.bounds[axis]
        faces.append(Face(axis, "lo", kind, lo, -1.0))
        faces.append(Face(axis, "hi", kind, hi, +1.0))
    return tuple(faces)


def boundary_data(case: ManufacturedCase, domain: Domain) -> BoundaryData:
    """Dirichlet data on the x-extreme faces, Neumann data on all others."""
    if case.dim != domain.dim:
        raise DomainError("case and domain dimensions differ")
    return BoundaryData(case, domain, domain_faces(domain))
