"""Small multilayer perceptrons over flat parameter vectors.

Parameters are stored layer by layer as ``W`` (out x in, row major) followed by
``b`` (out). A ``gaussian_policy`` head appends one state-independent
log-standard-deviation entry per action dimension.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import GaussianPolicyOut

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

HEADS = ("gaussian_policy", "scalar_value", "categorical_policy")

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0.0).astype(z.dtype)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
}


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    activation: str = "tanh"
    output_head: str = "scalar_value"
    log_std_bounds: tuple[float, float] = field(default=(LOG_STD_MIN, LOG_STD_MAX))

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ShapeError(f"layer_sizes must have >= 2 positive entries, got {sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_head not in HEADS:
            raise ValueError(f"unknown output head {self.output_head!r}")
        if self.output_head == "scalar_value" and sizes[-1] != 1:
            raise ShapeError("scalar_value head needs a single output unit")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_net_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i + 1] * s[i] + s[i + 1] for i in range(len(s) - 1))

    @property
    def n_params(self) -> int:
        extra = self.output_dim if self.output_head == "gaussian_policy" else 0
        return self.n_net_params + extra

    @classmethod
    def policy(cls, obs_dim, act_dim, hidden=(32, 32), activation="tanh", discrete=False):
        head = "categorical_policy" if discrete else "gaussian_policy"
        return cls((obs_dim, *hidden, act_dim), activation, head)

    @classmethod
    def value(cls, obs_dim, hidden=(32, 32), activation="tanh"):
        return cls((obs_dim, *hidden, 1), activation, "scalar_value")


def unpack(spec: MlpSpec, params: np.ndarray):
    """Return ``([(W, b), ...], log_std_or_None)`` as views into ``params``."""
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or params.size != spec.n_params:
        raise ShapeError(f"expected {spec.n_params} parameters, got shape {params.shape}")
    layers = []
    off = 0
    s = spec.layer_sizes
    for i in range(len(s) - 1):
        n_in, n_out = s[i], s[i + 1]
        W = params[off:off + n_in * n_out].reshape(n_out, n_in)
        off += n_in * n_out
        b = params[off:off + n_out]
        off += n_out
        layers.append((W, b))
    log_std = params[off:] if spec.output_head == "gaussian_policy" else None
    return layers, log_std


def init_params(spec: MlpSpec, rng: np.random.Generator, output_scale=1.0, log_std_init=0.0):
    """Uniform fan-in initialisation: ``W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))``, ``b = 0``."""
    chunks = []
    s = spec.layer_sizes
    for i in range(len(s) - 1):
        bound = 1.0 / np.sqrt(s[i])
        W = rng.uniform(-bound, bound, size=(s[i + 1], s[i]))
        if i == len(s) - 2:
            W = W * output_scale
        chunks += [W.ravel(), np.zeros(s[i + 1])]
    if spec.output_head == "gaussian_policy":
        chunks.append(np.full(spec.output_dim, float(log_std_init)))
    return np.concatenate(chunks)


def _as_batch(spec, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"expected input of width {spec.input_dim}, got shape {x.shape}")
    return x, single


def _forward_cache(spec, layers, x):
    act, _ = _ACTIVATIONS[spec.activation]
    zs, hs = [], [x]
    h = x
    for i, (W, b) in enumerate(layers):
        z = h @ W.T + b
        h = z if i == len(layers) - 1 else act(z)
        zs.append(z)
        hs.append(h)
    return zs, hs


def _clamped_log_std(spec, log_std):
    lo, hi = spec.log_std_bounds
    return np.clip(log_std, lo, hi)


def mlp_forward(spec: MlpSpec, params, x):
    """Evaluate the network on a single input or a batch (rows).

    Returns a ``GaussianPolicyOut`` for gaussian heads, an ``(n,)`` array of
    values for scalar heads, and ``(n, A)`` logits for categorical heads. A 1-D
    input gives unbatched output.
    """
    layers, log_std = unpack(spec, params)
    x, single = _as_batch(spec, x)
    _, hs = _forward_cache(spec, layers, x)
    out = hs[-1]
    if spec.output_head == "scalar_value":
        out = out[:, 0]
        return float(out[0]) if single else out
    if spec.output_head == "gaussian_policy":
        ls = _clamped_log_std(spec, log_std)
        return GaussianPolicyOut(out[0] if single else out, ls.copy())
    return out[0] if single else out


def raw_forward(spec: MlpSpec, params, x):
    """Network output before any head processing, always batched ``(n, out)``."""
    layers, _ = unpack(spec, params)
    x, _ = _as_batch(spec, x)
    return _forward_cache(spec, layers, x)[1][-1]


def mlp_backward(spec: MlpSpec, params, x, output_gradient):
    """Vector-Jacobian product: gradient of ``<output_gradient, output>`` w.r.t. params.

    ``output_gradient`` has the shape of ``mlp_forward``'s output; for gaussian
    heads pass a ``GaussianPolicyOut`` holding ``d/dmean`` (n, d) and
    ``d/dlog_std`` (d,) already summed over the batch.
    """
    layers, log_std = unpack(spec, params)
    x, single = _as_batch(spec, x)
    n = x.shape[0]
    grad_log_std = None
    if spec.output_head == "gaussian_policy":
        g_out = np.asarray(output_gradient.mean, dtype=float).reshape(n, -1)
        lo, hi = spec.log_std_bounds
        inside = (log_std >= lo) & (log_std <= hi)
        grad_log_std = np.asarray(output_gradient.log_std, dtype=float).reshape(-1) * inside
    elif spec.output_head == "scalar_value":
        g_out = np.asarray(output_gradient, dtype=float).reshape(n, 1)
    else:
        g_out = np.asarray(output_gradient, dtype=float).reshape(n, -1)
    if g_out.shape[1] != spec.output_dim:
        raise ShapeError(f"output gradient width {g_out.shape[1]} != {spec.output_dim}")

    _, dact = _ACTIVATIONS[spec.activation]
    zs, hs = _forward_cache(spec, layers, x)
    grads = []
    delta = g_out
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads.append((delta.T @ hs[i], delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ W) * dact(zs[i - 1], hs[i])
    chunks = []
    for gW, gb in reversed(grads):
        chunks += [gW.ravel(), gb]
    if grad_log_std is not None:
        chunks.append(grad_log_std)
    return np.concatenate(chunks)


def mlp_jvp(spec: MlpSpec, params, x, v):
    """Forward-mode product ``J v`` of the raw network output, shape ``(n, out)``.

    The gaussian log-std block of ``v`` is not part of the network and is ignored.
    """
    layers, _ = unpack(spec, params)
    dlayers, _ = unpack(spec, v)
    x, _ = _as_batch(spec, x)
    _, dact = _ACTIVATIONS[spec.activation]
    zs, hs = _forward_cache(spec, layers, x)
    dh = np.zeros_like(x)
    for i, ((W, _), (dW, db)) in enumerate(zip(layers, dlayers)):
        dz = dh @ W.T + hs[i] @ dW.T + db
        dh = dz if i == len(layers) - 1 else dz * dact(zs[i], hs[i + 1])
    return dh
