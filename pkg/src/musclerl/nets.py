"""Self-contained recurrent function approximator with exact gradients.

One network is ReLU(FC) -> GRU -> FC over a sequence, in float64 throughout:

    a_t = relu(x_t W_in + b_in)
    z_t = sigmoid(a_t Wg[:, :H]   + h_{t-1} Ug[:, :H]   + bg[:H])
    r_t = sigmoid(a_t Wg[:, H:2H] + h_{t-1} Ug[:, H:2H] + bg[H:2H])
    c_t = tanh   (a_t Wg[:, 2H:]  + (r_t * h_{t-1}) Ug[:, 2H:] + bg[2H:])
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t          (z = 1 fully rewrites h)
    y_t = h_t W_out + b_out

Parameters live in one flat float64 vector with named views, so the Adam
step and checkpointing are single-array operations and two identical runs
stay bitwise identical. backward() is exact reverse-mode through the whole
sequence and also returns input gradients (the actor update needs d loss /
d action through the critics).

The compute kernel carries a leading stack axis S so the twin critics run
as one broadcasted pass: sequences are (S, T, B, dim) internally, and the
public single-net API wraps S = 1. Stacking changes call counts, not the
per-element operations, so results are bitwise identical either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .randomize import SeededRng

LOG_SD_MIN = -20.0
LOG_SD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NetworkShape:
    input_dim: int
    gru_hidden: int
    output_dim: int
    head: str = "linear"  # "linear" | "squashed_gaussian"

    def __post_init__(self):
        if min(self.input_dim, self.gru_hidden, self.output_dim) < 1:
            raise ValueError("network dimensions must be >= 1")
        if self.head not in ("linear", "squashed_gaussian"):
            raise ValueError(f"unknown head kind {self.head!r}")


def _layout(shape: NetworkShape):
    i, h, o = shape.input_dim, shape.gru_hidden, shape.output_dim
    specs = [
        ("W_in", (i, h)),
        ("b_in", (h,)),
        ("Wg", (h, 3 * h)),
        ("Ug", (h, 3 * h)),
        ("bg", (3 * h,)),
        ("W_out", (h, o)),
        ("b_out", (o,)),
    ]
    offsets, off = {}, 0
    for name, shp in specs:
        n = int(np.prod(shp))
        offsets[name] = (off, shp)
        off += n
    return offsets, off


def param_count(shape: NetworkShape) -> int:
    return _layout(shape)[1]


class GruNet:
    """Parameter container: flat vector plus named views into it."""

    def __init__(self, shape: NetworkShape, flat: np.ndarray | None = None):
        self.shape = shape
        self.offsets, self.size = _layout(shape)
        if flat is None:
            flat = np.zeros(self.size)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (self.size,):
            raise ValueError(f"expected flat parameter vector of length {self.size}")
        self.flat = flat
        self.v = {
            name: self.flat[off : off + int(np.prod(shp))].reshape(shp)
            for name, (off, shp) in self.offsets.items()
        }

    def copy(self) -> "GruNet":
        return GruNet(self.shape, self.flat.copy())


def init_params(shape: NetworkShape, rng: SeededRng) -> GruNet:
    """Uniform +-1/sqrt(fan_in) for the dense layers and GRU weights, zero biases."""
    net = GruNet(shape)
    i, h = shape.input_dim, shape.gru_hidden
    net.v["W_in"][:] = rng.uniform(-1, 1, size=net.v["W_in"].shape) / math.sqrt(i)
    net.v["Wg"][:] = rng.uniform(-1, 1, size=net.v["Wg"].shape) / math.sqrt(h)
    net.v["Ug"][:] = rng.uniform(-1, 1, size=net.v["Ug"].shape) / math.sqrt(h)
    net.v["W_out"][:] = rng.uniform(-1, 1, size=net.v["W_out"].shape) / math.sqrt(h)
    return net


class StackedNets:
    """Copies of S same-shape networks stacked for one broadcasted pass."""

    def __init__(self, nets: list[GruNet]):
        shape = nets[0].shape
        for n in nets:
            if n.shape != shape:
                raise ValueError("stacked networks must share one shape")
        self.shape = shape
        self.S = len(nets)
        H = shape.gru_hidden
        self.W_in = np.stack([n.v["W_in"] for n in nets])
        self.b_in = np.stack([n.v["b_in"] for n in nets])[:, None, :]
        self.Wg = np.stack([n.v["Wg"] for n in nets])
        self.Ug_zr = np.stack([np.ascontiguousarray(n.v["Ug"][:, : 2 * H]) for n in nets])
        self.Ug_c = np.stack([np.ascontiguousarray(n.v["Ug"][:, 2 * H :]) for n in nets])
        self.UzrT = np.ascontiguousarray(self.Ug_zr.transpose(0, 2, 1))
        self.UcT = np.ascontiguousarray(self.Ug_c.transpose(0, 2, 1))
        self.WgT = np.ascontiguousarray(self.Wg.transpose(0, 2, 1))
        self.W_inT = np.ascontiguousarray(self.W_in.transpose(0, 2, 1))
        self.bg = np.stack([n.v["bg"] for n in nets])[:, None, :]
        self.W_out = np.stack([n.v["W_out"] for n in nets])
        self.W_outT = np.ascontiguousarray(self.W_out.transpose(0, 2, 1))
        self.b_out = np.stack([n.v["b_out"] for n in nets])[:, None, :]


class StackCache:
    """Reusable forward activations for one (T, S, B) signature.

    Sequence arrays are laid out (S, T, B, dim): contiguous per stack slot,
    so parameter-gradient contractions are plain reshapes. The per-step loop
    works on contiguous (S, B, dim) scratch and copies one slice per array
    per step; reusing the cache across updates avoids re-touching tens of
    megabytes of fresh pages every call.
    """

    def __init__(self, sp: StackedNets, T: int, B: int):
        S, H = sp.S, sp.shape.gru_hidden
        self.sig = (sp.shape, T, S, B)
        self.nets = sp
        self.T, self.S, self.B = T, S, B
        self.x: np.ndarray | None = None  # (S_x, T, B, I) with S_x in {1, S}
        self.pre = np.empty((S, T, B, H))
        self.relu_mask = np.empty((S, T, B, H), dtype=bool)
        self.a = np.empty((S, T, B, H))
        self.zr = np.empty((S, T, B, 2 * H))
        self.c = np.empty((S, T, B, H))
        self.rh = np.empty((S, T, B, H))
        self.h_states = np.empty((S, T + 1, B, H))  # row 0 is h0
        self.h_out = np.empty((S, T, B, H))         # contiguous copy of rows 1..T
        self.gx = np.empty((S, T, B, 3 * H))
        self.dgx = np.empty((S, T, B, 3 * H))
        self.y = np.empty((S, T, B, sp.shape.output_dim))
        # step-loop scratch
        self._zr = np.empty((S, B, 2 * H))
        self._sig = np.empty((S, B, 2 * H))
        self._rh = np.empty((S, B, H))
        self._c = np.empty((S, B, H))
        self._h = np.empty((S, B, H))
        self._h2 = np.empty((S, B, H))
        self._t1 = np.empty((S, B, H))
        self._t2 = np.empty((S, B, H))
        self._t3 = np.empty((S, B, H))


def make_cache(sp: StackedNets, T: int, B: int, old: "StackCache | None" = None) -> StackCache:
    if old is not None and old.sig == (sp.shape, T, sp.S, B):
        old.nets = sp
        return old
    return StackCache(sp, T, B)


def forward_stacked(sp: StackedNets, x: np.ndarray, h0: np.ndarray | None = None,
                    need_cache: bool = True, cache: StackCache | None = None):
    """Run S stacked nets over x = (S_x, T, B, input_dim), S_x in {1, S}.

    A shared input (S_x = 1) broadcasts across the stack without copying.
    Returns (y (S, T, B, out), h_T (S, B, H), cache or None); passing cache
    reuses its buffers when the signature matches.
    """
    S_x, T, B, I = x.shape
    S = sp.S
    if S_x not in (1, S) or I != sp.shape.input_dim or T < 1:
        raise ValueError(
            f"input shape {x.shape} does not match stack (S={sp.S}, in={sp.shape.input_dim})"
        )
    H = sp.shape.gru_hidden
    ws = make_cache(sp, T, B, cache)
    ws.x = x

    # input-side projections for the whole sequence, flattened over (T, B)
    x_flat = x.reshape(S_x, T * B, I) if x.flags["C_CONTIGUOUS"] else \
        np.ascontiguousarray(x).reshape(S_x, T * B, I)
    pre_flat = ws.pre.reshape(S, T * B, H)
    np.matmul(x_flat, sp.W_in, out=pre_flat)
    ws.pre += sp.b_in[:, None]
    np.greater(ws.pre, 0.0, out=ws.relu_mask)
    np.multiply(ws.pre, ws.relu_mask, out=ws.a)
    np.matmul(ws.a.reshape(S, T * B, H), sp.Wg, out=ws.gx.reshape(S, T * B, 3 * H))
    ws.gx += sp.bg[:, None]

    h = ws._h
    if h0 is None:
        h[:] = 0.0
    else:
        h[:] = np.asarray(h0, dtype=np.float64).reshape(S, B, H)
    ws.h_states[:, 0] = h
    zr, rh, c, hn = ws._zr, ws._rh, ws._c, ws._h2
    gx = ws.gx
    for t in range(T):
        np.matmul(h, sp.Ug_zr, out=zr)
        zr += gx[:, t, :, : 2 * H]
        # sigmoid(v) = (tanh(v/2) + 1) / 2, one fused block for both gates
        zr *= 0.5
        np.tanh(zr, out=zr)
        zr += 1.0
        zr *= 0.5
        np.multiply(zr[:, :, H:], h, out=rh)
        np.matmul(rh, sp.Ug_c, out=c)
        c += gx[:, t, :, 2 * H :]
        np.tanh(c, out=c)
        # h <- h + z * (c - h)
        np.subtract(c, h, out=hn)
        hn *= zr[:, :, :H]
        hn += h
        ws.zr[:, t] = zr
        ws.rh[:, t] = rh
        ws.c[:, t] = c
        ws.h_states[:, t + 1] = hn
        h, hn = hn, h
    np.copyto(ws.h_out, ws.h_states[:, 1:])
    np.matmul(ws.h_out.reshape(S, T * B, H), sp.W_out,
              out=ws.y.reshape(S, T * B, sp.shape.output_dim))
    ws.y += sp.b_out[:, None]
    return ws.y, h.copy(), (ws if need_cache else None)


def backward_stacked(cache: StackCache, dy: np.ndarray, dh_final: np.ndarray | None = None,
                     need_param_grads: bool = True):
    """Reverse-mode through forward_stacked.

    dy is (S, T, B, output_dim). Returns (param_grads dict of stacked arrays
    or None, dx (S, T, B, input_dim), dh0 (S, B, H)).
    """
    sp = cache.nets
    if cache.x is None:
        raise ValueError("cache has not been through a forward pass")
    T, S, B, H = cache.T, cache.S, cache.B, sp.shape.gru_hidden
    O = sp.shape.output_dim
    if dy.shape != (S, T, B, O):
        raise ValueError(f"dy shape {dy.shape} does not match outputs {(S, T, B, O)}")

    dy_flat = dy.reshape(S, T * B, O) if dy.flags["C_CONTIGUOUS"] else \
        np.ascontiguousarray(dy).reshape(S, T * B, O)
    dh_out = (dy_flat @ sp.W_outT).reshape(S, T, B, H)
    dgx = cache.dgx
    dh = cache._h
    if dh_final is None:
        dh[:] = 0.0
    else:
        dh[:] = np.asarray(dh_final, dtype=np.float64).reshape(S, B, H)
    dh_prev = cache._h2
    buf_zr, sig, tmp, tmp2, drh = cache._zr, cache._sig, cache._t1, cache._t2, cache._t3
    for t in range(T - 1, -1, -1):
        dh += dh_out[:, t]
        zr = cache.zr[:, t]
        z = zr[:, :, :H]
        r = zr[:, :, H:]
        c = cache.c[:, t]
        h_prev = cache.h_states[:, t]
        dz = buf_zr[:, :, :H]
        np.subtract(c, h_prev, out=dz)
        dz *= dh
        # dsc = dh * z * (1 - c^2) into the candidate block of dgx
        np.multiply(c, c, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        np.multiply(dh, z, out=tmp2)
        tmp2 *= tmp
        dgx[:, t, :, 2 * H :] = tmp2
        np.matmul(tmp2, sp.UcT, out=drh)
        dr = buf_zr[:, :, H:]
        np.multiply(drh, h_prev, out=dr)
        # dh_prev = dh*(1-z) + drh*r
        np.subtract(1.0, z, out=tmp)
        np.multiply(dh, tmp, out=dh_prev)
        np.multiply(drh, r, out=tmp)
        dh_prev += tmp
        # joint sigmoid derivative for [z | r]: upstream * zr * (1 - zr)
        np.subtract(1.0, zr, out=sig)
        sig *= zr
        buf_zr *= sig
        dgx[:, t, :, : 2 * H] = buf_zr
        np.matmul(buf_zr, sp.UzrT, out=sig[:, :, :H])
        dh_prev += sig[:, :, :H]
        dh, dh_prev = dh_prev, dh
    dh0 = dh.copy()

    dgx_flat = dgx.reshape(S, T * B, 3 * H)
    da = dgx_flat @ sp.WgT
    da = da.reshape(S, T, B, H)
    dpre = da
    dpre *= cache.relu_mask
    dx = (dpre.reshape(S, T * B, H) @ sp.W_inT).reshape(S, T, B, sp.shape.input_dim)

    grads = None
    if need_param_grads:
        I = sp.shape.input_dim
        S_x = cache.x.shape[0]
        f_x = cache.x.reshape(S_x, T * B, I) if cache.x.flags["C_CONTIGUOUS"] else \
            np.ascontiguousarray(cache.x).reshape(S_x, T * B, I)
        f_a = cache.a.reshape(S, T * B, H)
        f_h = cache.h_out.reshape(S, T * B, H)
        f_hprev = np.ascontiguousarray(cache.h_states[:, :T]).reshape(S, T * B, H)
        f_rh = cache.rh.reshape(S, T * B, H)
        f_dpre = dpre.reshape(S, T * B, H)
        g_Ug = np.empty((S, H, 3 * H))
        np.matmul(f_hprev.transpose(0, 2, 1), dgx_flat[:, :, : 2 * H], out=g_Ug[:, :, : 2 * H])
        np.matmul(f_rh.transpose(0, 2, 1), dgx_flat[:, :, 2 * H :], out=g_Ug[:, :, 2 * H :])
        grads = {
            "W_in": f_x.transpose(0, 2, 1) @ f_dpre,
            "b_in": f_dpre.sum(axis=1),
            "Wg": f_a.transpose(0, 2, 1) @ dgx_flat,
            "bg": dgx_flat.sum(axis=1),
            "Ug": g_Ug,
            "W_out": f_h.transpose(0, 2, 1) @ dy_flat,
            "b_out": dy_flat.sum(axis=1),
        }
    return grads, dx, dh0


def grads_to_flat(shape: NetworkShape, grads: dict, s: int) -> np.ndarray:
    """Extract slot s of stacked gradients as one flat vector."""
    g = GruNet(shape)
    for name in g.v:
        g.v[name][:] = grads[name][s]
    return g.flat


# -- single-net wrappers -------------------------------------------------------


def forward(net: GruNet, x: np.ndarray, h0: np.ndarray | None = None, need_cache: bool = True):
    """Run one net over a (T, B, input_dim) sequence.

    Returns (outputs (T, B, output_dim), h_T (B, H), cache or None).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] < 1:
        raise ValueError(f"expected nonempty (T, B, input) sequence, got shape {x.shape}")
    if x.shape[2] != net.shape.input_dim:
        raise ValueError(f"input dim {x.shape[2]} != {net.shape.input_dim}")
    sp = StackedNets([net])
    h0s = None if h0 is None else np.asarray(h0, dtype=np.float64)[None]
    y, hT, cache = forward_stacked(sp, x[None], h0s, need_cache)
    return y[0], hT[0], cache


def backward(cache: StackCache, dy: np.ndarray, dh_final: np.ndarray | None = None,
             need_param_grads: bool = True):
    """Exact reverse-mode gradients for a single-net forward.

    dy is (T, B, output_dim); optional dh_final seeds the gradient of h_T.
    Returns (flat param gradient or None, dx (T, B, input_dim), dh0 (B, H)).
    """
    dy = np.asarray(dy, dtype=np.float64)
    dhf = None if dh_final is None else np.asarray(dh_final, dtype=np.float64)[None]
    grads, dx, dh0 = backward_stacked(cache, dy[None], dhf, need_param_grads)
    flat = grads_to_flat(cache.nets.shape, grads, 0) if need_param_grads else None
    return flat, dx[0], dh0[0]


# -- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    """Bias-corrected Adam moments for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    skipped: int = 0

    @classmethod
    def for_params(cls, params: np.ndarray, lr: float = 3e-4) -> "AdamState":
        return cls(m=np.zeros_like(params), v=np.zeros_like(params), lr=lr)


def adam_update(params: np.ndarray, grads: np.ndarray, state: AdamState):
    """One Adam step, in place; non-finite gradients are counted and skipped."""
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise ValueError("parameter/gradient/moment shapes do not match")
    if not np.all(np.isfinite(grads)):
        state.skipped += 1
        state.t += 1
        return params, state
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (grads * grads)
    mhat = state.m / (1.0 - state.beta1 ** state.t)
    vhat = state.v / (1.0 - state.beta2 ** state.t)
    np.sqrt(vhat, out=vhat)
    vhat += state.eps
    mhat /= vhat
    mhat *= state.lr
    params -= mhat
    return params, state


# -- squashed-Gaussian head ---------------------------------------------------


def split_head(outputs: np.ndarray):
    """Split raw head outputs into (mu, log_sd clipped, clip mask)."""
    A = outputs.shape[-1] // 2
    mu = outputs[..., :A]
    raw = outputs[..., A:]
    log_sd = np.clip(raw, LOG_SD_MIN, LOG_SD_MAX)
    mask = (raw > LOG_SD_MIN) & (raw < LOG_SD_MAX)
    return mu, log_sd, mask


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def log1m_tanh_sq(u):
    """log(1 - tanh(u)^2), stable for large |u|."""
    return 2.0 * (math.log(2.0) - u - _softplus(-2.0 * u))


def squash_sample(mu, log_sd, noise, center, half):
    """Reparameterized sample of the tanh-squashed Gaussian on a box.

    action = center + half * tanh(mu + sd * noise); log_prob includes the
    change-of-variables correction. Returns (action, log_prob, u) with
    log_prob summed over action dimensions.
    """
    sd = np.exp(log_sd)
    u = mu + sd * noise
    th = np.tanh(u)
    action = center + half * th
    log_prob = (
        -0.5 * noise * noise - log_sd - _HALF_LOG_2PI
        - np.log(half) - log1m_tanh_sq(u)
    ).sum(axis=-1)
    return action, log_prob, u


def squash_mean(mu, center, half):
    """Deterministic (evaluation) action: the squashed mean."""
    return center + half * np.tanh(mu)


def log_prob_grads(noise, u, sd):
    """d log_prob / d mu and d log_prob / d log_sd under reparameterization.

    With u = mu + sd * noise and noise held fixed, the Gaussian term loses
    its mu dependence and only the tanh correction varies:
        d/d mu     = 2 tanh(u)
        d/d log_sd = -1 + 2 tanh(u) * sd * noise
    """
    th = np.tanh(u)
    dmu = 2.0 * th
    dlog_sd = -1.0 + 2.0 * th * sd * noise
    return dmu, dlog_sd


def action_grads(noise, u, sd, half):
    """d action / d mu and d action / d log_sd under reparameterization."""
    sech2 = 1.0 - np.tanh(u) ** 2
    dmu = half * sech2
    dlog_sd = half * sech2 * sd * noise
    return dmu, dlog_sd
