"""Recurrent cells and layers with analytic forward/backward passes.

Everything here is batch-agnostic: inputs may be single vectors (T, D) /
(D,) or carry one leading batch axis (B, T, D) / (B, D). Weight layouts
follow x @ W.T, i.e. a gate weight is (H, D) for inputs and (H, H) for the
recurrent connection.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .numerics import SeededRng, softmax_rows

INIT_SCALE = 0.08


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def _acc_outer(acc, da, x):
    # acc (H, D) += sum over batch of outer(da, x)
    if da.ndim == 1:
        acc += np.outer(da, x)
    else:
        acc += da.reshape(-1, da.shape[-1]).T @ x.reshape(-1, x.shape[-1])


def _sum_rows(da):
    return da if da.ndim == 1 else da.reshape(-1, da.shape[-1]).sum(axis=0)


def _params_dataclass(cls):
    """Attach arrays()/from_arrays() based on declared ndarray fields."""
    array_names = [f.name for f in fields(cls) if f.type == "np.ndarray"]
    cls.ARRAY_FIELDS = tuple(array_names)

    def arrays(self):
        return {name: getattr(self, name) for name in self.ARRAY_FIELDS}

    cls.arrays = arrays
    return cls


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------


@_params_dataclass
@dataclass
class LstmParams:
    input_dim: int
    hidden_dim: int
    w_xi: np.ndarray
    w_xf: np.ndarray
    w_xo: np.ndarray
    w_xg: np.ndarray
    w_hi: np.ndarray
    w_hf: np.ndarray
    w_ho: np.ndarray
    w_hg: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray


def init_lstm(input_dim: int, hidden_dim: int, rng: SeededRng) -> LstmParams:
    """Uniform(-0.08, 0.08) weights, zero biases except forget bias = 1."""
    d, h = input_dim, hidden_dim
    w = lambda r, c: rng.uniform(-INIT_SCALE, INIT_SCALE, (r, c))
    return LstmParams(
        input_dim=d,
        hidden_dim=h,
        w_xi=w(h, d), w_xf=w(h, d), w_xo=w(h, d), w_xg=w(h, d),
        w_hi=w(h, h), w_hf=w(h, h), w_ho=w(h, h), w_hg=w(h, h),
        b_i=np.zeros(h), b_f=np.ones(h), b_o=np.zeros(h), b_g=np.zeros(h),
    )


@dataclass
class StepTrace:
    """All intermediate values of one LSTM step, kept for the backward pass.

    Gate vectors i, f, o lie strictly in (0, 1) and g in (-1, 1); the cell
    update c = f * c_prev + i * g holds exactly as computed.
    """

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    h: np.ndarray
    tanh_c: np.ndarray


def lstm_step(p: LstmParams, x, h_prev, c_prev) -> StepTrace:
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    if x.shape[-1] != p.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} != {p.input_dim}")
    if h_prev.shape[-1] != p.hidden_dim or c_prev.shape[-1] != p.hidden_dim:
        raise ValueError("state dim mismatch")
    i = _sigmoid(x @ p.w_xi.T + h_prev @ p.w_hi.T + p.b_i)
    f = _sigmoid(x @ p.w_xf.T + h_prev @ p.w_hf.T + p.b_f)
    o = _sigmoid(x @ p.w_xo.T + h_prev @ p.w_ho.T + p.b_o)
    g = np.tanh(x @ p.w_xg.T + h_prev @ p.w_hg.T + p.b_g)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return StepTrace(x, h_prev, c_prev, i, f, o, g, c, h, tanh_c)


def _lstm_step_grads(p, t: StepTrace, dh, dc_in, grads):
    """Accumulate one step's parameter grads; return (dx, dh_prev, dc_prev)."""
    do = dh * t.tanh_c
    dc = dc_in + dh * t.o * (1.0 - t.tanh_c ** 2)
    di = dc * t.g
    dg = dc * t.i
    df = dc * t.c_prev
    dc_prev = dc * t.f
    da_i = di * t.i * (1.0 - t.i)
    da_f = df * t.f * (1.0 - t.f)
    da_o = do * t.o * (1.0 - t.o)
    da_g = dg * (1.0 - t.g ** 2)
    _acc_outer(grads["w_xi"], da_i, t.x)
    _acc_outer(grads["w_xf"], da_f, t.x)
    _acc_outer(grads["w_xo"], da_o, t.x)
    _acc_outer(grads["w_xg"], da_g, t.x)
    _acc_outer(grads["w_hi"], da_i, t.h_prev)
    _acc_outer(grads["w_hf"], da_f, t.h_prev)
    _acc_outer(grads["w_ho"], da_o, t.h_prev)
    _acc_outer(grads["w_hg"], da_g, t.h_prev)
    grads["b_i"] += _sum_rows(da_i)
    grads["b_f"] += _sum_rows(da_f)
    grads["b_o"] += _sum_rows(da_o)
    grads["b_g"] += _sum_rows(da_g)
    dx = da_i @ p.w_xi + da_f @ p.w_xf + da_o @ p.w_xo + da_g @ p.w_xg
    dh_prev = da_i @ p.w_hi + da_f @ p.w_hf + da_o @ p.w_ho + da_g @ p.w_hg
    return dx, dh_prev, dc_prev


def lstm_step_backward(p: LstmParams, trace: StepTrace, dh, dc=None):
    """Single-step backward. Returns (grads dict, dx, dh_prev, dc_prev)."""
    grads = zero_grads(p)
    if dc is None:
        dc = np.zeros_like(trace.c)
    dx, dh_prev, dc_prev = _lstm_step_grads(p, trace, dh, dc, grads)
    return grads, dx, dh_prev, dc_prev


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------


@_params_dataclass
@dataclass
class GruParams:
    input_dim: int
    hidden_dim: int
    w_xr: np.ndarray
    w_xz: np.ndarray
    w_xn: np.ndarray
    w_hr: np.ndarray
    w_hz: np.ndarray
    w_hn: np.ndarray
    b_r: np.ndarray
    b_z: np.ndarray
    b_n: np.ndarray


def init_gru(input_dim: int, hidden_dim: int, rng: SeededRng) -> GruParams:
    d, h = input_dim, hidden_dim
    w = lambda r, c: rng.uniform(-INIT_SCALE, INIT_SCALE, (r, c))
    return GruParams(
        input_dim=d,
        hidden_dim=h,
        w_xr=w(h, d), w_xz=w(h, d), w_xn=w(h, d),
        w_hr=w(h, h), w_hz=w(h, h), w_hn=w(h, h),
        b_r=np.zeros(h), b_z=np.zeros(h), b_n=np.zeros(h),
    )


@dataclass
class GruTrace:
    x: np.ndarray
    h_prev: np.ndarray
    r: np.ndarray
    z: np.ndarray
    n: np.ndarray
    rh: np.ndarray
    h: np.ndarray


def gru_step(p: GruParams, x, h_prev) -> GruTrace:
    """Reset/update recurrence; h = z * h_prev + (1 - z) * candidate.

    The update gate saturating at 1 therefore carries the previous state
    through unchanged. The reset gate is applied to h_prev inside the
    candidate.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.shape[-1] != p.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} != {p.input_dim}")
    if h_prev.shape[-1] != p.hidden_dim:
        raise ValueError("state dim mismatch")
    r = _sigmoid(x @ p.w_xr.T + h_prev @ p.w_hr.T + p.b_r)
    z = _sigmoid(x @ p.w_xz.T + h_prev @ p.w_hz.T + p.b_z)
    rh = r * h_prev
    n = np.tanh(x @ p.w_xn.T + rh @ p.w_hn.T + p.b_n)
    h = z * h_prev + (1.0 - z) * n
    return GruTrace(x, h_prev, r, z, n, rh, h)


def _gru_step_grads(p, t: GruTrace, dh, grads):
    dz = dh * (t.h_prev - t.n)
    dn = dh * (1.0 - t.z)
    dh_prev = dh * t.z
    da_n = dn * (1.0 - t.n ** 2)
    _acc_outer(grads["w_xn"], da_n, t.x)
    _acc_outer(grads["w_hn"], da_n, t.rh)
    grads["b_n"] += _sum_rows(da_n)
    drh = da_n @ p.w_hn
    dr = drh * t.h_prev
    dh_prev = dh_prev + drh * t.r
    da_r = dr * t.r * (1.0 - t.r)
    da_z = dz * t.z * (1.0 - t.z)
    _acc_outer(grads["w_xr"], da_r, t.x)
    _acc_outer(grads["w_hr"], da_r, t.h_prev)
    grads["b_r"] += _sum_rows(da_r)
    _acc_outer(grads["w_xz"], da_z, t.x)
    _acc_outer(grads["w_hz"], da_z, t.h_prev)
    grads["b_z"] += _sum_rows(da_z)
    dx = da_r @ p.w_xr + da_z @ p.w_xz + da_n @ p.w_xn
    dh_prev = dh_prev + da_r @ p.w_hr + da_z @ p.w_hz
    return dx, dh_prev


def gru_step_backward(p: GruParams, trace: GruTrace, dh):
    grads = zero_grads(p)
    dx, dh_prev = _gru_step_grads(p, trace, dh, grads)
    return grads, dx, dh_prev


# ---------------------------------------------------------------------------
# Shared unrolling over either cell type
# ---------------------------------------------------------------------------


def make_cell(kind: str, input_dim: int, hidden_dim: int, rng: SeededRng):
    if kind == "LSTM":
        return init_lstm(input_dim, hidden_dim, rng)
    if kind == "GRU":
        return init_gru(input_dim, hidden_dim, rng)
    raise ValueError(f"unknown cell kind '{kind}'")


def zero_grads(p) -> dict:
    return {name: np.zeros_like(arr) for name, arr in p.arrays().items()}


def unroll(p, xs) -> list:
    """Run a cell over xs of shape (..., T, D); returns per-step traces."""
    xs = np.asarray(xs, dtype=np.float64)
    T = xs.shape[-2]
    if T == 0:
        raise ValueError("cannot unroll an empty sequence")
    lead = xs.shape[:-2]
    h = np.zeros(lead + (p.hidden_dim,))
    traces = []
    if isinstance(p, LstmParams):
        c = np.zeros_like(h)
        for t in range(T):
            tr = lstm_step(p, xs[..., t, :], h, c)
            traces.append(tr)
            h, c = tr.h, tr.c
    else:
        for t in range(T):
            tr = gru_step(p, xs[..., t, :], h)
            traces.append(tr)
            h = tr.h
    return traces


def states_of(traces) -> np.ndarray:
    """Stack per-step hidden states along a new time axis (..., T, H)."""
    return np.stack([t.h for t in traces], axis=-2)


def unroll_backward(p, traces, dhs):
    """Backprop through time. dhs has shape (..., T, H), one slot per step.

    Returns (grads dict keyed like p.arrays(), dxs of input shape).
    """
    T = len(traces)
    grads = zero_grads(p)
    dxs = np.zeros(traces[0].x.shape[:-1] + (T, p.input_dim))
    dh_carry = np.zeros_like(traces[0].h)
    if isinstance(p, LstmParams):
        dc_carry = np.zeros_like(traces[0].c)
        for t in range(T - 1, -1, -1):
            dh = dhs[..., t, :] + dh_carry
            dx, dh_carry, dc_carry = _lstm_step_grads(p, traces[t], dh, dc_carry, grads)
            dxs[..., t, :] = dx
    else:
        for t in range(T - 1, -1, -1):
            dh = dhs[..., t, :] + dh_carry
            dx, dh_carry = _gru_step_grads(p, traces[t], dh, grads)
            dxs[..., t, :] = dx
    return grads, dxs


# ---------------------------------------------------------------------------
# Bidirectional encoder
# ---------------------------------------------------------------------------


@dataclass
class BidirResult:
    """Forward/backward traversal with per-step concatenated states.

    outputs[t] = concat(h_fw[t], h_bw[t]) where the backward pass consumed
    the reversed sequence and was re-aligned to original time order.
    fw_last / bw_first are the two seq2one summary states: the forward state
    after the last token and the backward state aligned at the first token.
    """

    outputs: np.ndarray
    fw_last: np.ndarray
    bw_first: np.ndarray
    fw_traces: list
    bw_traces: list


def bidir_unroll(fw_params, bw_params, xs) -> BidirResult:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.shape[-2] == 0:
        raise ValueError("cannot unroll an empty sequence")
    fw_traces = unroll(fw_params, xs)
    bw_traces = unroll(bw_params, np.flip(xs, axis=-2))
    fw_states = states_of(fw_traces)
    bw_states = np.flip(states_of(bw_traces), axis=-2)
    outputs = np.concatenate([fw_states, bw_states], axis=-1)
    return BidirResult(
        outputs=outputs,
        fw_last=fw_traces[-1].h,
        bw_first=bw_traces[-1].h,
        fw_traces=fw_traces,
        bw_traces=bw_traces,
    )


def bidir_backward(fw_params, bw_params, res: BidirResult, doutputs):
    """Backprop through both directions given grads on concatenated states."""
    h = fw_params.hidden_dim
    dfw = doutputs[..., :h]
    dbw = np.flip(doutputs[..., h:], axis=-2)
    fw_grads, dxs_fw = unroll_backward(fw_params, res.fw_traces, dfw)
    bw_grads, dxs_bw = unroll_backward(bw_params, res.bw_traces, dbw)
    return fw_grads, bw_grads, dxs_fw + np.flip(dxs_bw, axis=-2)


# ---------------------------------------------------------------------------
# Attention pooling
# ---------------------------------------------------------------------------


@_params_dataclass
@dataclass
class AttentionParams:
    """Score head: score_t = u . tanh(P s_t + b).

    When learned_context is False (plain variant) u stays at its fixed
    uniform value 1/A and receives no gradient; with learned_context it is
    a trained query vector.
    """

    state_dim: int
    attn_dim: int
    learned_context: bool
    proj: np.ndarray
    bias: np.ndarray
    context: np.ndarray


def init_attention(state_dim: int, attn_dim: int, learned_context: bool,
                   rng: SeededRng) -> AttentionParams:
    proj = rng.uniform(-INIT_SCALE, INIT_SCALE, (attn_dim, state_dim))
    if learned_context:
        context = rng.uniform(-INIT_SCALE, INIT_SCALE, attn_dim)
    else:
        context = np.full(attn_dim, 1.0 / attn_dim)
    return AttentionParams(
        state_dim=state_dim,
        attn_dim=attn_dim,
        learned_context=learned_context,
        proj=proj,
        bias=np.zeros(attn_dim),
        context=context,
    )


@dataclass
class AttentionTrace:
    states: np.ndarray
    act: np.ndarray
    weights: np.ndarray


def attention_forward(states, p: AttentionParams):
    states = np.asarray(states, dtype=np.float64)
    if states.shape[-2] == 0:
        raise ValueError("attention over an empty state sequence")
    act = np.tanh(states @ p.proj.T + p.bias)        # (..., T, A)
    scores = act @ p.context                         # (..., T)
    weights = softmax_rows(scores)
    pooled = np.einsum("...t,...ts->...s", weights, states)
    return pooled, weights, AttentionTrace(states, act, weights)


def attention_pool(states, p: AttentionParams):
    """Pool a state sequence into one vector; returns (pooled, weights)."""
    pooled, weights, _ = attention_forward(states, p)
    return pooled, weights


def attention_backward(p: AttentionParams, trace: AttentionTrace, dpooled):
    """Returns (grads dict, dstates). Context grad only when learned."""
    w = trace.weights
    states = trace.states
    dw = np.einsum("...s,...ts->...t", dpooled, states)
    dstates = np.einsum("...t,...s->...ts", w, dpooled)
    dscores = w * (dw - np.sum(w * dw, axis=-1, keepdims=True))
    dact = dscores[..., None] * p.context
    dpre = dact * (1.0 - trace.act ** 2)
    dpre2 = dpre.reshape(-1, p.attn_dim)
    grads = {
        "proj": dpre2.T @ states.reshape(-1, p.state_dim),
        "bias": dpre2.sum(axis=0),
    }
    if p.learned_context:
        grads["context"] = dscores.reshape(-1) @ trace.act.reshape(-1, p.attn_dim)
    dstates += dpre @ p.proj
    return grads, dstates


# ---------------------------------------------------------------------------
# Affine heads and dropout
# ---------------------------------------------------------------------------


@_params_dataclass
@dataclass
class AffineParams:
    w: np.ndarray
    b: np.ndarray


def init_affine(in_dim: int, out_dim: int, rng: SeededRng) -> AffineParams:
    return AffineParams(
        w=rng.uniform(-INIT_SCALE, INIT_SCALE, (out_dim, in_dim)),
        b=np.zeros(out_dim),
    )


def affine(p: AffineParams, x):
    return x @ p.w.T + p.b


def affine_backward(p: AffineParams, x, dout):
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    grads = {"w": d2.T @ x2, "b": d2.sum(axis=0)}
    return grads, dout @ p.w


def dropout_forward(v, rate: float, training: bool, rng: SeededRng):
    """Inverted dropout. Returns (output, scale-mask or None)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    v = np.asarray(v, dtype=np.float64)
    if not training or rate == 0.0:
        return v, None
    keep = rng.uniform(0.0, 1.0, v.shape) >= rate
    mask = keep / (1.0 - rate)
    return v * mask, mask


def dropout_apply(v, rate: float, training: bool, rng: SeededRng):
    """Zero entries with probability rate and rescale survivors (training);
    identity at inference."""
    out, _ = dropout_forward(v, rate, training, rng)
    return out
