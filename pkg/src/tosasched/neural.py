"""Recurrent Q-function approximator built from first principles.

A stack of GRU layers reads a window of observation vectors; a dense
head maps the final hidden state to Q-values for {drop, transmit}.
Gradients come from handwritten backpropagation through time and are
verified against finite differences in the test suite, so everything
stays in 64-bit floats.

The three gates of each layer share stacked weight matrices (rows
ordered reset, update, candidate) so a whole timestep costs two matrix
products instead of six.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_ACTIONS = 2

_CHECKPOINT_MAGIC = "tosasched-qnet-v1"


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Flooring at -709 keeps exp() finite; the sigmoid saturates in
    # float64 long before that, so floored and exact results coincide.
    # (exp(-x) underflowing to 0 on the other tail is already exact.)
    return 1.0 / (1.0 + np.exp(-np.maximum(x, -709.0)))


@dataclass
class QNetworkParams:
    """All weights of the Q-network, as named arrays with explicit shapes.

    Per layer i: ``l{i}.w`` (3*n_h x in) input weights, ``l{i}.u``
    (3*n_h x n_h) recurrent weights, ``l{i}.b`` (3*n_h) biases, rows
    stacked in gate order reset/update/candidate. Head: ``head.w``
    (2 x n_h), ``head.b`` (2).
    """

    n_in: int
    n_h: int
    n_l: int
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def named_arrays(self):
        return self.arrays.items()

    def n_parameters(self) -> int:
        return sum(a.size for a in self.arrays.values())


def init_params(n_in: int, n_h: int, n_l: int, rng: np.random.Generator) -> QNetworkParams:
    """Uniform +-sqrt(1/fan_in) weights, zero biases."""
    if n_in < 1 or n_h < 1 or n_l < 1:
        raise ValueError("n_in, n_h, n_l must all be >= 1")
    arrays: dict[str, np.ndarray] = {}
    for layer in range(n_l):
        fan_in = n_in if layer == 0 else n_h
        lim_w = math.sqrt(1 / fan_in)
        lim_u = math.sqrt(1 / n_h)
        arrays[f"l{layer}.w"] = rng.uniform(-lim_w, lim_w, size=(3 * n_h, fan_in))
        arrays[f"l{layer}.u"] = rng.uniform(-lim_u, lim_u, size=(3 * n_h, n_h))
        arrays[f"l{layer}.b"] = np.zeros(3 * n_h)
    arrays["head.w"] = rng.uniform(-math.sqrt(1 / n_h), math.sqrt(1 / n_h), size=(N_ACTIONS, n_h))
    arrays["head.b"] = np.zeros(N_ACTIONS)
    return QNetworkParams(n_in=n_in, n_h=n_h, n_l=n_l, arrays=arrays)


def zeros_like_params(params: QNetworkParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.arrays.items()}


def clone_target(params: QNetworkParams) -> QNetworkParams:
    """Deep copy for the target network; mutating either side never affects the other."""
    return QNetworkParams(params.n_in, params.n_h, params.n_l, {k: v.copy() for k, v in params.arrays.items()})


def _as_batch(window: np.ndarray, n_in: int) -> tuple[np.ndarray, bool]:
    w = np.asarray(window, dtype=np.float64)
    if w.ndim == 2:
        w = w[None, :, :]
        squeeze = True
    elif w.ndim == 3:
        squeeze = False
    else:
        raise ValueError(f"window must be (T, n_in) or (B, T, n_in), got shape {w.shape}")
    if w.shape[-1] != n_in or w.shape[-2] < 1:
        raise ValueError(f"window shape {w.shape} does not match n_in={n_in}")
    return w, squeeze


def _layer_forward(a: dict, layer: int, inp_all: np.ndarray, n_h: int, keep_cache: bool):
    """Run one GRU layer over the whole (B, T, in) sequence.

    The input projection for every timestep is a single matrix product;
    only the recurrent product stays inside the time loop.
    """
    batch, steps = inp_all.shape[0], inp_all.shape[1]
    p = f"l{layer}."
    u = a[p + "u"]
    gx = (inp_all.reshape(batch * steps, -1) @ a[p + "w"].T + a[p + "b"]).reshape(batch, steps, 3 * n_h)
    h = np.zeros((batch, n_h))
    out = np.empty((batch, steps, n_h))
    cache = None
    if keep_cache:
        cache = {name: np.empty((batch, steps, n_h)) for name in ("h_prev", "r", "z", "n", "hu")}
    for t in range(steps):
        gxt = gx[:, t]
        gh = h @ u.T
        rz = _sigmoid(gxt[:, : 2 * n_h] + gh[:, : 2 * n_h])
        r = rz[:, :n_h]
        z = rz[:, n_h:]
        hu = gh[:, 2 * n_h :]
        n = np.tanh(gxt[:, 2 * n_h :] + r * hu)
        if cache is not None:
            cache["h_prev"][:, t] = h
            cache["r"][:, t] = r
            cache["z"][:, t] = z
            cache["n"][:, t] = n
            cache["hu"][:, t] = hu
        h = n + z * (h - n)
        out[:, t] = h
    return out, h, cache


def _run_stack(params: QNetworkParams, x: np.ndarray, keep_caches: bool):
    a = params.arrays
    caches: list[tuple[np.ndarray, dict]] | None = [] if keep_caches else None
    inp_all = x
    h_final = np.zeros((x.shape[0], params.n_h))
    for layer in range(params.n_l):
        out, h_final, cache = _layer_forward(a, layer, inp_all, params.n_h, keep_caches)
        if caches is not None:
            caches.append((inp_all, cache))
        inp_all = out
    q = h_final @ a["head.w"].T + a["head.b"]
    return q, h_final, caches


def forward(params: QNetworkParams, window: np.ndarray) -> np.ndarray:
    """Q-values for a window of observation vectors.

    Accepts one window (T, n_in) -> (2,) or a batch (B, T, n_in) -> (B, 2).
    Deterministic: no dropout, no internal randomness.
    """
    x, squeeze = _as_batch(window, params.n_in)
    q, _, _ = _run_stack(params, x, keep_caches=False)
    return q[0] if squeeze else q


def backward(
    params: QNetworkParams,
    window: np.ndarray,
    action_index,
    td_target,
    return_loss: bool = False,
):
    """Gradient of the mean over the batch of 0.5*(td_target - Q(window, action))^2.

    Backpropagates through the head and through time across every GRU
    layer. Only the selected action's Q contributes, so the other head
    row receives zero gradient from the head itself.
    """
    x, _ = _as_batch(window, params.n_in)
    batch, steps = x.shape[0], x.shape[1]
    n_h = params.n_h
    actions = np.atleast_1d(np.asarray(action_index, dtype=np.intp))
    targets = np.atleast_1d(np.asarray(td_target, dtype=np.float64))
    if actions.shape != (batch,) or targets.shape != (batch,):
        raise ValueError("action_index and td_target must match the batch size")

    a = params.arrays
    q, h_last, caches = _run_stack(params, x, keep_caches=True)
    assert caches is not None
    rows = np.arange(batch)
    residual = q[rows, actions] - targets
    loss = 0.5 * float(np.mean(residual**2))

    grads = zeros_like_params(params)
    dq = np.zeros_like(q)
    dq[rows, actions] = residual / batch
    grads["head.w"] += dq.T @ h_last
    grads["head.b"] += dq.sum(axis=0)

    # dext: dLoss/dh_t of the layer being processed, excluding the
    # recurrent carry; the head feeds the top layer's final step only.
    dext = np.zeros((batch, steps, n_h))
    dext[:, -1] = dq @ a["head.w"]
    for layer in range(params.n_l - 1, -1, -1):
        p = f"l{layer}."
        inp_all, cache = caches[layer]
        h_prev, r, z, n, hu = (cache[k] for k in ("h_prev", "r", "z", "n", "hu"))
        da_all = np.empty((batch, steps, 3 * n_h))
        da_u_all = np.empty((batch, steps, 3 * n_h))
        carry = np.zeros((batch, n_h))
        for t in range(steps - 1, -1, -1):
            rt, zt, nt, hut = r[:, t], z[:, t], n[:, t], hu[:, t]
            dh = carry + dext[:, t]
            da_n = dh * (1.0 - zt) * (1.0 - nt**2)
            da_z = dh * (h_prev[:, t] - nt) * zt * (1.0 - zt)
            dr = da_n * hut
            da_r = dr * rt * (1.0 - rt)
            da_t = da_all[:, t]
            da_t[:, :n_h] = da_r
            da_t[:, n_h : 2 * n_h] = da_z
            da_t[:, 2 * n_h :] = da_n
            da_u_t = da_u_all[:, t]
            da_u_t[:, : 2 * n_h] = da_t[:, : 2 * n_h]
            da_u_t[:, 2 * n_h :] = da_n * rt
            carry = dh * zt + da_u_t @ a[p + "u"]
        flat = da_all.reshape(batch * steps, 3 * n_h)
        grads[p + "w"] += flat.T @ inp_all.reshape(batch * steps, -1)
        grads[p + "u"] += da_u_all.reshape(batch * steps, 3 * n_h).T @ h_prev.reshape(batch * steps, n_h)
        grads[p + "b"] += flat.sum(axis=0)
        if layer > 0:
            dext = (flat @ a[p + "w"]).reshape(batch, steps, n_h)
    if return_loss:
        return grads, loss
    return grads


@dataclass
class OptimizerState:
    """RMSProp state: one second-moment accumulator per parameter array."""

    learning_rate: float = 1.0e-5
    rho: float = 0.99
    epsilon: float = 1.0e-8
    acc: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not (0 <= self.rho < 1):
            raise ValueError("rho must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


def rmsprop_step(params: QNetworkParams, state: OptimizerState, grads: dict[str, np.ndarray]) -> QNetworkParams:
    """One RMSProp update, in place: acc <- rho*acc + (1-rho)*g^2, then scaled descent."""
    for key, theta in params.named_arrays():
        g = grads[key]
        acc = state.acc.get(key)
        if acc is None:
            acc = np.zeros_like(theta)
            state.acc[key] = acc
        acc *= state.rho
        acc += (1.0 - state.rho) * g**2
        theta -= state.learning_rate * g / (np.sqrt(acc) + state.epsilon)
    return params


# -- checkpointing -----------------------------------------------------------


def save_params(params: QNetworkParams, path: str | Path) -> None:
    """Versioned text checkpoint: shape header plus row-major repr floats.

    repr round-trips doubles exactly, so save/load is lossless and the
    files are diff-able.
    """
    lines = [_CHECKPOINT_MAGIC, f"n_in {params.n_in}", f"n_h {params.n_h}", f"n_l {params.n_l}"]
    for name, arr in params.named_arrays():
        shape = " ".join(str(s) for s in arr.shape)
        lines.append(f"array {name} {shape}")
        lines.append(" ".join(repr(float(v)) for v in arr.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: str | Path) -> QNetworkParams:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a {_CHECKPOINT_MAGIC} checkpoint")
    meta = {}
    for i in (1, 2, 3):
        key, value = lines[i].split()
        meta[key] = int(value)
    arrays: dict[str, np.ndarray] = {}
    i = 4
    while i < len(lines):
        if not lines[i]:
            i += 1
            continue
        tag, name, *shape = lines[i].split()
        if tag != "array":
            raise ValueError(f"{path}: malformed checkpoint near line {i + 1}")
        values = np.array([float(v) for v in lines[i + 1].split()])
        arrays[name] = values.reshape([int(s) for s in shape])
        i += 2
    return QNetworkParams(n_in=meta["n_in"], n_h=meta["n_h"], n_l=meta["n_l"], arrays=arrays)
