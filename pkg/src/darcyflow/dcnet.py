"""Dense feed-forward network with input jets and parameter gradients.

The solver needs three things from the network: values h(x), first and pure
second input derivatives (the "jet"), and the exact gradient of any scalar
assembled from those quantities with respect to every parameter.  All three
come from analytic layer recurrences: a forward pass propagates

    A   = act(Z),  Z = A_in W + b          (values)
    G_j = act'(Z) * P_j,  P_j = G_in_j W    (d h / d x_j)
    Q_j = act''(Z) * P_j^2 + act'(Z) * R_j, R_j = Q_in_j W   (d2 h / d x_j^2)

and a reverse pass backpropagates cotangents of (h, G, Q) through the same
relations, which needs the third activation derivative.  Inputs are mapped
affinely onto [-1, 1]^d when a domain is attached; the map is folded into
the first-derivative seeds so every returned derivative is with respect to
physical coordinates.

Everything is float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

_CHECKPOINT_MAGIC = b"DFLOWNET"
_CHECKPOINT_VERSION = 1


def _tanh_jets(z):
    t = np.tanh(z)
    d1 = 1.0 - t * t
    d2 = -2.0 * t * d1
    d3 = d1 * (6.0 * t * t - 2.0)
    return t, d1, d2, d3


def _identity_jets(z):
    one = np.ones_like(z)
    zero = np.zeros_like(z)
    return z, one, zero, zero


# name -> (checkpoint id, jet function); the activation must be C^3 smooth.
ACTIVATIONS = {
    "tanh": (0, _tanh_jets),
    "identity": (1, _identity_jets),
}
_ACTIVATION_BY_ID = {v[0]: k for k, v in ACTIVATIONS.items()}


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    layers: int  # hidden layer count
    neurons: int  # width of every hidden layer
    activation: str = "tanh"
    output_dim: int = 1

    def __post_init__(self):
        if self.input_dim not in (1, 2, 3):
            raise DomainError("input_dim must be 1, 2 or 3")
        if self.layers < 1 or self.neurons < 1:
            raise DomainError("need at least one hidden layer and one neuron")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if self.output_dim != 1:
            raise DomainError("only scalar outputs are supported")


class ParamLayout:
    """Flat <-> per-layer views of the parameter vector."""

    def __init__(self, config: NetworkConfig):
        widths = [config.input_dim] + [config.neurons] * config.layers + [config.output_dim]
        self.shapes = [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
        self.offsets = []
        off = 0
        for fan_in, fan_out in self.shapes:
            self.offsets.append(off)
            off += fan_in * fan_out + fan_out
        self.size = off

    def weight(self, theta: np.ndarray, layer: int) -> np.ndarray:
        fan_in, fan_out = self.shapes[layer]
        off = self.offsets[layer]
        return theta[off : off + fan_in * fan_out].reshape(fan_in, fan_out)

    def bias(self, theta: np.ndarray, layer: int) -> np.ndarray:
        fan_in, fan_out = self.shapes[layer]
        off = self.offsets[layer] + fan_in * fan_out
        return theta[off : off + fan_out]

    def split(self, theta: np.ndarray):
        return [(self.weight(theta, l), self.bias(theta, l)) for l in range(len(self.shapes))]

    def pack(self, mats) -> np.ndarray:
        theta = np.empty(self.size)
        for l, (w, b) in enumerate(mats):
            self.weight(theta, l)[:] = w
            self.bias(theta, l)[:] = b
        return theta


class Network:
    """A configured network bound to an (optional) physical domain.

    The parameter vector is an ordinary float64 array laid out by
    ``self.layout``; methods never mutate it.
    """

    def __init__(self, config: NetworkConfig, domain=None):
        self.config = config
        self.layout = ParamLayout(config)
        self.n_params = self.layout.size
        self._act = ACTIVATIONS[config.activation][1]
        if domain is None:
            self.in_scale = np.ones(config.input_dim)
            self.in_shift = np.zeros(config.input_dim)
        else:
            if domain.dim != config.input_dim:
                raise DomainError("domain dimension != network input_dim")
            lo, hi = domain.lo, domain.hi
            self.in_scale = 2.0 / (hi - lo)
            self.in_shift = -(hi + lo) / (hi - lo)

    # -- parameters ---------------------------------------------------

    def init_params(self, rng) -> np.ndarray:
        """Glorot-uniform weights, zero biases, deterministic per seed."""
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        theta = np.zeros(self.n_params)
        for l, (fan_in, fan_out) in enumerate(self.layout.shapes):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.layout.weight(theta, l)[:] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        return theta

    # -- evaluation ---------------------------------------------------

    def _check(self, theta, pts):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise DomainError(f"parameter vector must have length {self.n_params}")
        if not np.all(np.isfinite(theta)):
            raise NumericError("non-finite network parameter")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.config.input_dim:
            raise DomainError(f"points have dim {pts.shape[1]}, network expects {self.config.input_dim}")
        if not np.all(np.isfinite(pts)):
            raise NumericError("non-finite network input")
        return theta, pts

    def forward(self, theta, x):
        """Head values, shape (n,) (or a scalar for a single point)."""
        theta, pts = self._check(theta, x)
        a = pts * self.in_scale + self.in_shift
        mats = self.layout.split(theta)
        for w, b in mats[:-1]:
            a = self._act(a @ w + b)[0]
        w, b = mats[-1]
        out = (a @ w)[:, 0] + b[0]
        return float(out[0]) if np.ndim(x) == 1 else out

    def input_jet(self, theta, x):
        """(h, dh/dx_j, d2h/dx_j^2) with derivative arrays of shape (n, d)."""
        h, g, s, _ = self._jet_forward(*self._check(theta, x), want_cache=False)
        if np.ndim(x) == 1:
            return float(h[0]), g[0], s[0]
        return h, g, s

    def _jet_forward(self, theta, pts, want_cache: bool):
        d = self.config.input_dim
        n = pts.shape[0]
        mats = self.layout.split(theta)
        a = pts * self.in_scale + self.in_shift
        # First-derivative seeds carry the normalization scale, so every
        # propagated derivative is with respect to physical coordinates.
        g = np.zeros((d, n, d))
        for j in range(d):
            g[j, :, j] = self.in_scale[j]
        q = np.zeros((d, n, d))
        cache = [] if want_cache else None
        for w, b in mats[:-1]:
            z = a @ w + b
            p = g @ w
            r = q @ w
            act, d1, d2, d3 = self._act(z)
            if want_cache:
                cache.append((a, g, q, p, r, d1, d2, d3))
            a = act
            g = d1 * p
            q = d2 * p * p + d1 * r
        w, b = mats[-1]
        h = (a @ w)[:, 0] + b[0]
        gout = (g @ w)[..., 0]  # (d, n)
        sout = (q @ w)[..., 0]
        if want_cache:
            cache.append((a, g, q))
        return h, np.moveaxis(gout, 0, 1), np.moveaxis(sout, 0, 1), cache

    def loss_gradient(self, theta, assembler):
        """Value and exact parameter gradient of an assembled scalar.

        `assembler` exposes `points` (the fixed batch) and a method
        ``cotangents(h, g, s) -> (loss, hbar, gbar, sbar, extras)`` where the
        cotangent arrays have the shapes of (h, g, s).  Returns
        (loss, grad, extras).
        """
        theta, pts = self._check(theta, assembler.points)
        h, g, s, cache = self._jet_forward(theta, pts, want_cache=True)
        loss, hbar, gbar, sbar, extras = assembler.cotangents(h, g, s)
        grad = self._jet_backward(theta, cache, hbar, np.moveaxis(gbar, 1, 0), np.moveaxis(sbar, 1, 0))
        return loss, grad, extras

    def _jet_backward(self, theta, cache, hbar, gbar, sbar):
        mats = self.layout.split(theta)
        grad = np.zeros(self.n_params)
        a_last, g_last, q_last = cache[-1]
        w_out, _ = mats[-1]
        wcol = w_out[:, 0]
        gw = self.layout.weight(grad, len(mats) - 1)
        gw[:, 0] = a_last.T @ hbar
        gw[:, 0] += np.tensordot(g_last, gbar, axes=([0, 1], [0, 1]))
        gw[:, 0] += np.tensordot(q_last, sbar, axes=([0, 1], [0, 1]))
        self.layout.bias(grad, len(mats) - 1)[0] = hbar.sum()
        abar = hbar[:, None] * wcol
        gbar_l = gbar[..., None] * wcol
        qbar_l = sbar[..., None] * wcol
        for l in range(len(mats) - 2, -1, -1):
            a_in, g_in, q_in, p, r, d1, d2, d3 = cache[l]
            w, _ = mats[l]
            zbar = abar * d1
            zbar += (gbar_l * d2 * p).sum(axis=0)
            zbar += (qbar_l * (d3 * p * p + d2 * r)).sum(axis=0)
            pbar = gbar_l * d1 + 2.0 * qbar_l * d2 * p
            rbar = qbar_l * d1
            gw = self.layout.weight(grad, l)
            gw += a_in.T @ zbar
            gw += (np.swapaxes(g_in, 1, 2) @ pbar).sum(axis=0)
            gw += (np.swapaxes(q_in, 1, 2) @ rbar).sum(axis=0)
            self.layout.bias(grad, l)[:] = zbar.sum(axis=0)
            if l > 0:
                abar = zbar @ w.T
                gbar_l = pbar @ w.T
                qbar_l = rbar @ w.T
        return grad


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, config: NetworkConfig, theta: np.ndarray) -> None:
    """Binary checkpoint; round-trips bit-exactly.

    Layout: magic, u32 version, u32 input_dim, u32 layers, u32 neurons,
    u32 activation id, then the parameter vector as little-endian float64.
    """
    theta = np.asarray(theta, dtype=float)
    act_id = ACTIVATIONS[config.activation][0]
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(
            struct.pack(
                "<5I", _CHECKPOINT_VERSION, config.input_dim, config.layers, config.neurons, act_id
            )
        )
        fh.write(theta.astype("<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint -> (NetworkConfig, theta)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise DomainError(f"{path} is not a network checkpoint")
        version, input_dim, layers, neurons, act_id = struct.unpack("<5I", fh.read(20))
        if version != _CHECKPOINT_VERSION:
            raise DomainError(f"unsupported checkpoint version {version}")
        if act_id not in _ACTIVATION_BY_ID:
            raise DomainError(f"unknown activation id {act_id}")
        config = NetworkConfig(input_dim, layers, neurons, activation=_ACTIVATION_BY_ID[act_id])
        theta = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    expected = ParamLayout(config).size
    if theta.shape != (expected,):
        raise DomainError(f"checkpoint has {theta.size} parameters, expected {expected}")
    return config, theta
