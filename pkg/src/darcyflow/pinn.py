"""Deep collocation solver for the manufactured Darcy problem.

The loss is the unweighted sum of three mean-square terms over a fixed
collocation set: the PDE residual K*sum_j h_xjxj + sum_j K_xj h_xj - f on
interior points, the head mismatch on Dirichlet faces, and the
conductivity-weighted normal-derivative mismatch K*(dh/dn - dh_mms/dn) on
Neumann faces.  Training is full batch: Adam for a fixed number of steps,
then L-BFGS until its iteration cap or a loss-decrease tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import dcnet, metrics, mms, randfield
from .errors import DomainError, NumericError
from .optimizers import adam, lbfgs


@dataclass(frozen=True)
class FaceSamples:
    face: mms.Face
    points: np.ndarray

    def __post_init__(self):
        self.points.setflags(write=False)


@dataclass(frozen=True)
class CollocationSet:
    domain: mms.Domain
    interior: np.ndarray
    faces: tuple

    def __post_init__(self):
        self.interior.setflags(write=False)


def sample_collocation(domain: mms.Domain, n_interior: int, n_boundary_per_face: int, rng) -> CollocationSet:
    """Uniform interior points plus per-face boundary points.

    Interior points are strictly inside the box; boundary points sit exactly
    on their face.  In 1D each face is a single endpoint.
    """
    if n_interior < 1 or n_boundary_per_face < 1:
        raise DomainError("collocation counts must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    lo, hi = domain.lo, domain.hi
    interior = rng.uniform(lo, hi, size=(n_interior, domain.dim))
    for _ in range(100):
        on_edge = np.any((interior <= lo) | (interior >= hi), axis=1)
        if not on_edge.any():
            break
        interior[on_edge] = rng.uniform(lo, hi, size=(int(on_edge.sum()), domain.dim))
    faces = []
    for face in mms.domain_faces(domain):
        n_face = 1 if domain.dim == 1 else n_boundary_per_face
        pts = rng.uniform(lo, hi, size=(n_face, domain.dim))
        pts[:, face.axis] = face.coord
        faces.append(FaceSamples(face, pts))
    return CollocationSet(domain, interior, tuple(faces))


class LossAssembler:
    """Fixed-batch loss with precomputed field and manufactured-solution data.

    All network-independent quantities (K and its gradient, the source term,
    boundary targets) are evaluated once at construction; each training
    iteration then costs one jet-forward and one backward pass.
    """

    def __init__(self, net: dcnet.Network, colloc: CollocationSet, real, case: mms.ManufacturedCase):
        if case.dim != net.config.input_dim or case.dim != colloc.domain.dim:
            raise DomainError("case, network and collocation dimensions must agree")
        if real is not None and real.spec.dim != case.dim:
            raise DomainError("field realization dimension mismatch")
        self.case = case
        blocks = [colloc.interior]
        self.n_int = colloc.interior.shape[0]
        dir_pts, neu_pts, neu_axes = [], [], []
        for fs in colloc.faces:
            if fs.face.kind == "dirichlet":
                dir_pts.append(fs.points)
            else:
                neu_pts.append(fs.points)
                neu_axes.append(np.full(fs.points.shape[0], fs.face.axis, dtype=int))
        self.dir_pts = np.vstack(dir_pts) if dir_pts else np.zeros((0, case.dim))
        self.neu_pts = np.vstack(neu_pts) if neu_pts else np.zeros((0, case.dim))
        self.neu_axis = np.concatenate(neu_axes) if neu_axes else np.zeros(0, dtype=int)
        self.points = np.vstack([colloc.interior, self.dir_pts, self.neu_pts])
        self.n_dir = self.dir_pts.shape[0]
        self.n_neu = self.neu_pts.shape[0]

        interior = np.asarray(colloc.interior, dtype=float)
        self.k_int, self.gk_int = randfield.eval_k_and_grad(real, interior)
        self.f_int = mms.source_f(case, real, interior)
        self.dir_target = mms.h_exact(case, self.dir_pts) if self.n_dir else np.zeros(0)
        if self.n_neu:
            g = mms.grad_h_exact(case, self.neu_pts)
            self.neu_target = g[np.arange(self.n_neu), self.neu_axis]
            self.neu_k = randfield.eval_k(real, self.neu_pts)
        else:
            self.neu_target = np.zeros(0)
            self.neu_k = np.zeros(0)

    def _residuals(self, h, g, s):
        i = self.n_int
        d = i + self.n_dir
        r_pde = self.k_int * s[:i].sum(axis=1) + (self.gk_int * g[:i]).sum(axis=1) - self.f_int
        r_dir = h[i:d] - self.dir_target
        if self.n_neu:
            g_n = g[d:][np.arange(self.n_neu), self.neu_axis]
            r_neu = self.neu_k * (g_n - self.neu_target)
        else:
            r_neu = np.zeros(0)
        return r_pde, r_dir, r_neu

    @staticmethod
    def _mse(r):
        return float(r @ r / r.size) if r.size else 0.0

    def loss(self, h, g, s):
        r_pde, r_dir, r_neu = self._residuals(h, g, s)
        if not np.all(np.isfinite(r_pde)):
            bad = int(np.argmax(~np.isfinite(r_pde)))
            raise NumericError(f"non-finite PDE residual at point {self.points[bad]}")
        comps = {
            "mse_pde": self._mse(r_pde),
            "mse_dirichlet": self._mse(r_dir),
            "mse_neumann": self._mse(r_neu),
        }
        return comps["mse_pde"] + comps["mse_dirichlet"] + comps["mse_neumann"], comps

    def cotangents(self, h, g, s):
        value, comps = self.loss(h, g, s)
        r_pde, r_dir, r_neu = self._residuals(h, g, s)
        i = self.n_int
        d = i + self.n_dir
        hbar = np.zeros_like(h)
        gbar = np.zeros_like(g)
        sbar = np.zeros_like(s)
        w = 2.0 * r_pde / max(self.n_int, 1)
        sbar[:i] = (w * self.k_int)[:, None]
        gbar[:i] = w[:, None] * self.gk_int
        if self.n_dir:
            hbar[i:d] = 2.0 * r_dir / self.n_dir
        if self.n_neu:
            rows = np.arange(self.n_neu)
            gbar[d + rows, self.neu_axis] = 2.0 * r_neu * self.neu_k / self.n_neu
        return value, hbar, gbar, sbar, comps


def assemble_loss(net, theta, colloc, real, case):
    """Scalar collocation loss at theta (see :class:`LossAssembler`)."""
    return assemble_loss_components(net, theta, colloc, real, case)[0]


def assemble_loss_components(net, theta, colloc, real, case):
    asm = LossAssembler(net, colloc, real, case)
    h, g, s = net.input_jet(theta, asm.points)
    return asm.loss(h, g, s)


@dataclass(frozen=True)
class TrainConfig:
    adam_iters: int = 2000
    adam_lr: float = 1e-3
    lbfgs_max_iters: int = 5000
    maxls: int = 50
    tol: float = 1e-9
    n_interior: int = 1000
    n_boundary_per_face: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if min(self.adam_iters, self.lbfgs_max_iters) < 0 or self.maxls < 1:
            raise DomainError("iteration counts must be non-negative, maxls >= 1")
        if self.tol <= 0 or self.adam_lr <= 0:
            raise DomainError("tolerance and learning rate must be positive")
        if self.n_interior < 1 or self.n_boundary_per_face < 1:
            raise DomainError("collocation counts must be positive")

    def finetuned(self, adam_iters=200, adam_lr=2e-4) -> "TrainConfig":
        """Reduced-budget, lower-rate config for transfer-learning runs."""
        return replace(self, adam_iters=adam_iters, adam_lr=adam_lr)


@dataclass
class TrainReport:
    losses: list
    components: list
    phases: list  # [(name, iteration count), ...] in execution order
    initial_loss: float
    final_loss: float
    theta: np.ndarray
    wall_time: float
    tl: bool = False
    lbfgs_status: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.losses)

    @property
    def adam_iters(self) -> int:
        return dict(self.phases).get("adam", 0)

    @property
    def lbfgs_iters(self) -> int:
        return dict(self.phases).get("lbfgs", 0)

    def iters_to_reach(self, threshold: float):
        """1-based iteration index at which the loss first drops to threshold."""
        for i, v in enumerate(self.losses):
            if v <= threshold:
                return i + 1
        return None

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# schema: darcyflow.trace.v1\n")
            fh.write("iter,phase,loss,mse_pde,mse_dirichlet,mse_neumann\n")
            idx = 0
            for phase, count in self.phases:
                for _ in range(count):
                    c = self.components[idx]
                    fh.write(
                        f"{idx + 1},{phase},{self.losses[idx]:.17g},{c['mse_pde']:.17g},"
                        f"{c['mse_dirichlet']:.17g},{c['mse_neumann']:.17g}\n"
                    )
                    idx += 1


def train(net, theta0, colloc, real, case, tcfg: TrainConfig, tl: bool = False) -> TrainReport:
    """Adam then L-BFGS on the collocation loss; returns the best iterate."""
    asm = LossAssembler(net, colloc, real, case)

    def fun_grad(theta):
        return net.loss_gradient(theta, asm)

    start = time.perf_counter()
    initial_loss = fun_grad(np.asarray(theta0, dtype=float))[0]
    theta, adam_trace = adam(
        fun_grad,
        theta0,
        tcfg.adam_iters,
        lr=tcfg.adam_lr,
        beta1=tcfg.beta1,
        beta2=tcfg.beta2,
        eps=tcfg.eps,
    )
    theta, final_loss, lbfgs_trace = lbfgs(
        fun_grad, theta, tcfg.lbfgs_max_iters, maxls=tcfg.maxls, tol=tcfg.tol
    )
    wall = time.perf_counter() - start
    losses = adam_trace.losses + lbfgs_trace.losses
    comps = adam_trace.extras + lbfgs_trace.extras
    phases = [("adam", len(adam_trace.losses)), ("lbfgs", len(lbfgs_trace.losses))]
    return TrainReport(
        losses=losses,
        components=comps,
        phases=phases,
        initial_loss=float(initial_loss),
        final_loss=float(final_loss),
        theta=theta,
        wall_time=wall,
        tl=tl,
        lbfgs_status=lbfgs_trace.status,
    )


def warm_start(net, pretrained_theta, colloc, real, case, tcfg_ft: TrainConfig) -> TrainReport:
    """Fine-tune from a previously trained parameter vector on a new field."""
    pretrained_theta = np.asarray(pretrained_theta, dtype=float)
    if pretrained_theta.shape != (net.n_params,):
        raise DomainError(
            f"pretrained vector has {pretrained_theta.size} entries, layout needs {net.n_params}"
        )
    return train(net, pretrained_theta, colloc, real, case, tcfg_ft, tl=True)


def predict_head(net, theta, x):
    return net.forward(theta, x)


def predict_velocity(net, theta, real, x):
    """Darcy velocity q = -K grad(h) from the trained network."""
    _, g, _ = net.input_jet(theta, np.atleast_2d(np.asarray(x, dtype=float)))
    k = randfield.eval_k(real, np.atleast_2d(np.asarray(x, dtype=float)))
    q = -k[:, None] * g
    return q[0] if np.ndim(x) == 1 else q


def mms_velocity(real, case, x):
    """Reference velocity -K grad(h_mms) on the same points."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    q = -randfield.eval_k(real, pts)[:, None] * mms.grad_h_exact(case, pts)
    return q[0] if np.ndim(x) == 1 else q


_EVAL_SHAPES = {1: (1000,), 2: (100, 100), 3: (50, 20, 10)}


def default_eval_grid(domain: mms.Domain):
    """Uniform tensor evaluation grid -> (points (n, d), shape)."""
    shape = _EVAL_SHAPES[domain.dim]
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(domain.bounds, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel(order="C") for m in mesh]), shape


def relative_error(net, theta, case, eval_points) -> float:
    """delta_h of the network head against the manufactured head."""
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if pts.size == 0:
        raise DomainError("evaluation grid is empty")
    return metrics.relative_error(net.forward(theta, pts), mms.h_exact(case, pts))


def velocity_relative_error(net, theta, real, case, eval_points) -> float:
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    return metrics.relative_error(
        predict_velocity(net, theta, real, pts).ravel(), mms_velocity(real, case, pts).ravel()
    )
