"""Single-letter capacity optimizations for state-dependent channels.

Covers the auxiliary-symbol capacity max I(U;Y) - I(U;S) over P(u|s) and
deterministic input maps, the stateless Blahut-Arimoto specialization,
state-known-at-both-ends capacity, running-average (Cesaro) capacities
of non-stationary memoryless sequences, and the closed-form value of the
dyadic odd/even alternating sequence family.

The objective is a difference of concave functionals, hence nonconcave;
the optimizer is multi-start projected-gradient ascent over the simplex
product, certified against oracles on small instances rather than by
convexity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .info import mutual_information, conditional_mutual_information
from .prob import ChannelKernel, ConditionalPmf, DimensionError, GPPolicy, Pmf, compose_joint, marginal
from .rng import stream

_LOG_FLOOR = 1e-26
_EXHAUSTIVE_G_CAP = 10**6


@dataclass(frozen=True)
class CapacityResult:
    """Optimizer output: value in nats plus the achieving policy."""

    value: float
    policy: GPPolicy | None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Blahut-Arimoto (stateless)


def blahut_arimoto(p_y_x: np.ndarray, tol: float = 1e-9, max_iter: int = 10_000) -> tuple[float, np.ndarray]:
    """Capacity (nats) and maximizing input law of a stateless channel."""
    w = np.asarray(p_y_x, dtype=np.float64)
    m, _ = w.shape
    r = np.full(m, 1.0 / m)
    logw = np.where(w > 0, np.log(np.maximum(w, _LOG_FLOOR)), 0.0)
    c_prev = -np.inf
    for _ in range(max_iter):
        q = r[:, None] * w  # joint (x,y)
        py = q.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logpost = np.where((w > 0) & (py[None, :] > 0), logw - np.log(np.maximum(py, _LOG_FLOOR))[None, :], 0.0)
        d = (w * logpost).sum(axis=1)  # per-input divergence against output marginal
        r_new = r * np.exp(d - d.max())
        r_new /= r_new.sum()
        c = float((r * d).sum())
        if abs(c - c_prev) <= tol * max(1.0, abs(c)):
            r = r_new
            break
        r = r_new
        c_prev = c
    q = r[:, None] * w
    return max(mutual_information(q), 0.0), r


def no_state_capacity(channel) -> CapacityResult:
    """Capacity of a stateless kernel (|S| = 1 ChannelKernel or 2-d matrix)."""
    if isinstance(channel, ChannelKernel):
        if channel.n_states != 1:
            raise DimensionError("no_state_capacity expects a stateless kernel")
        w = channel.w[0]
    else:
        w = np.asarray(channel, dtype=np.float64)
    value, r = blahut_arimoto(w)
    nx = w.shape[0]
    policy = GPPolicy(
        u_given_s=ConditionalPmf(r[None, :]),
        x_map=np.arange(nx, dtype=np.int64)[:, None],
    )
    return CapacityResult(value=value, policy=policy, diagnostics={"method": "blahut-arimoto"})


def state_at_both_capacity(channel: ChannelKernel, state: Pmf) -> CapacityResult:
    """State known at encoder and decoder: sum_s P(s) C(W(.|.,s)).

    The conditional mutual information separates over states when the
    per-state input law is unconstrained, so per-state Blahut-Arimoto
    ascent is exact.
    """
    if channel.n_states != state.size:
        raise DimensionError("state alphabet mismatch")
    value = 0.0
    per_state_inputs = []
    for s in range(channel.n_states):
        c_s, r_s = blahut_arimoto(channel.w[s])
        value += float(state.probs[s]) * c_s
        per_state_inputs.append(r_s)
    rows = np.stack(per_state_inputs)  # u indexes x, chosen per state
    policy = GPPolicy(
        u_given_s=ConditionalPmf(rows),
        x_map=np.tile(np.arange(channel.n_inputs, dtype=np.int64)[:, None], (1, channel.n_states)),
    )
    return CapacityResult(value=value, policy=policy, diagnostics={"method": "per-state blahut-arimoto"})


# ---------------------------------------------------------------------------
# projected-gradient engine


def _project_rows_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of the last axis onto the probability simplex."""
    m = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, m + 1)
    cond = u - css / idx > 0
    rho = cond.sum(axis=-1)
    theta = np.take_along_axis(css, rho[..., None] - 1, axis=-1) / rho[..., None]
    return np.maximum(v - theta, 0.0)


def _slog(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, _LOG_FLOOR))


def _objective_terms(v, q_list, wg_list_per_k):
    """Exact objective min_{k,l} I(U_l;Y_kl) - max_l I(U_l;S_l) per batch row.

    v: (B,S,U); q_list: list of (S,) state pmfs; wg_list_per_k: list over k
    of (B,U,S,Y) effective kernels. Returns (obj, i1 stack (K,L,B),
    i2 stack (L,B)).
    """
    i2 = []
    pu_by_l = []
    for q in q_list:
        pu = np.einsum("s,bsu->bu", q, v)
        pu_by_l.append(pu)
        qv = q[None, :, None] * v
        term = np.where(qv > 0, qv * (_slog(v) - _slog(pu)[:, None, :]), 0.0)
        i2.append(term.sum(axis=(1, 2)))
    i1 = []
    for wg in wg_list_per_k:
        row = []
        for li, q in enumerate(q_list):
            a = np.einsum("s,bsu,busy->buy", q, v, wg)
            pu = pu_by_l[li]
            py = a.sum(axis=1)
            term = np.where(a > 0, a * (_slog(a) - _slog(pu)[:, :, None] - _slog(py)[:, None, :]), 0.0)
            row.append(term.sum(axis=(1, 2)))
        i1.append(row)
    i1 = np.array([[x for x in row] for row in i1])  # (K,L,B)
    i2 = np.array(i2)  # (L,B)
    obj = i1.reshape(-1, i1.shape[-1]).min(axis=0) - i2.max(axis=0)
    return obj, i1, i2


def _gradient(v, q_list, wg_list_per_k, i1, i2):
    """Ascent direction of the min/max composite at the active components."""
    b = v.shape[0]
    k_n, l_n = len(wg_list_per_k), len(q_list)
    flat = i1.reshape(k_n * l_n, b)
    active1 = flat.argmin(axis=0)
    ak, al = np.unravel_index(active1, (k_n, l_n))
    active2 = i2.argmax(axis=0)
    grad = np.zeros_like(v)
    for k in range(k_n):
        for li in range(l_n):
            sel = (ak == k) & (al == li)
            if not sel.any():
                continue
            q = q_list[li]
            wg = wg_list_per_k[k][sel]
            vs = v[sel]
            a = np.einsum("s,bsu,busy->buy", q, vs, wg)
            pu = np.einsum("s,bsu->bu", q, vs)
            py = a.sum(axis=1)
            inner = np.einsum("busy,buy->bsu", wg, _slog(a) - _slog(py)[:, None, :])
            grad[sel] = q[None, :, None] * (inner - _slog(pu)[:, None, :])
    for li in range(l_n):
        sel = active2 == li
        if not sel.any():
            continue
        q = q_list[li]
        vs = v[sel]
        pu = np.einsum("s,bsu->bu", q, vs)
        grad[sel] -= q[None, :, None] * (_slog(vs) - _slog(pu)[:, None, :])
    return grad


def _enumerate_g(u_size: int, n_states: int, n_inputs: int) -> np.ndarray:
    """All deterministic maps (u,s) -> x as an array (G, U, S)."""
    digits = u_size * n_states
    g_count = n_inputs**digits
    idx = np.arange(g_count)
    out = np.empty((g_count, digits), dtype=np.int64)
    for d in range(digits - 1, -1, -1):
        out[:, d] = idx % n_inputs
        idx //= n_inputs
    return out.reshape(g_count, u_size, n_states)


def _effective_kernels(w: np.ndarray, g_batch: np.ndarray) -> np.ndarray:
    """(B,U,S,Y) kernel rows selected by per-element deterministic maps."""
    s_idx = np.arange(w.shape[0])
    return w[s_idx[None, None, :], g_batch, :]


def optimize_gp_policy(
    states: list[np.ndarray],
    channels: list[np.ndarray],
    u_size: int,
    *,
    restarts: int = 50,
    iters: int = 200,
    seed: int = 0,
    candidates: tuple = (),
    g_cap: int = _EXHAUSTIVE_G_CAP,
    step0: float = 0.5,
):
    """Multi-start ascent of min_{k,l} I(U_l;Y_kl) - max_l I(U_l;S_l).

    states: state pmfs indexed by l; channels: kernels (S,X,Y) indexed by
    k. Returns (value, v, g, diagnostics). Candidates are (v, g) pairs
    evaluated exactly and entered into the restart pool.
    """
    n_states = states[0].size
    n_inputs = channels[0].shape[1]
    g_count = n_inputs ** (u_size * n_states)
    exhaustive = g_count <= g_cap and max(n_states, n_inputs, channels[0].shape[2]) <= 4
    rng = stream(seed, 0xC0DE)
    if exhaustive:
        g_tables = _enumerate_g(u_size, n_states, n_inputs)
    else:
        # heuristic mode: seeded random subset of maps plus identity-like maps
        n_g = min(256, g_cap)
        g_tables = rng.integers(0, n_inputs, size=(n_g, u_size, n_states))
        g_tables[0] = np.arange(u_size)[:, None] % n_inputs

    g_rep = np.repeat(g_tables, restarts, axis=0)
    b = g_rep.shape[0]
    v0 = np.empty((b, n_states, u_size))
    # structured inits: uniform, near-deterministic, then Dirichlet draws
    v0[:] = 1.0 / u_size
    per_g = restarts
    if per_g > 1:
        ident = np.full((n_states, u_size), 1e-3)
        for s in range(n_states):
            ident[s, s % u_size] = 1.0
        ident /= ident.sum(axis=1, keepdims=True)
        v0[1::per_g] = ident
    if per_g > 2:
        n_rand = b - 2 * g_tables.shape[0]
        mask = np.ones(b, dtype=bool)
        mask[0::per_g] = False
        mask[1::per_g] = False
        v0[mask] = rng.dirichlet(np.ones(u_size), size=(n_rand, n_states))

    for cand_v, cand_g in candidates:
        g_rep = np.concatenate([g_rep, np.asarray(cand_g, dtype=np.int64)[None]], axis=0)
        v0 = np.concatenate([v0, np.asarray(cand_v, dtype=np.float64)[None]], axis=0)
    b = g_rep.shape[0]

    wg_per_k = [_effective_kernels(np.asarray(w), g_rep) for w in channels]
    v = v0
    step = np.full(b, step0)
    obj, i1, i2 = _objective_terms(v, states, wg_per_k)
    for _ in range(iters):
        grad = _gradient(v, states, wg_per_k, i1, i2)
        cand = _project_rows_simplex(v + step[:, None, None] * grad)
        cobj, ci1, ci2 = _objective_terms(cand, states, wg_per_k)
        accept = cobj >= obj - 1e-15
        v = np.where(accept[:, None, None], cand, v)
        obj = np.where(accept, cobj, obj)
        i1 = np.where(accept[None, None, :], ci1, i1)
        i2 = np.where(accept[None, :], ci2, i2)
        step = np.where(accept, np.minimum(step * 1.1, 2.0), step * 0.5)
        step = np.maximum(step, 1e-10)

    order = np.argsort(-obj, kind="stable")
    best = order[0]
    # deterministic tie-break: lexicographic smallest flattened (g, v)
    near = order[np.abs(obj[order] - obj[best]) <= 1e-12]
    if near.size > 1:
        keys = [
            (tuple(g_rep[i].ravel()), tuple(np.round(v[i].ravel(), 9)))
            for i in near
        ]
        best = near[min(range(near.size), key=lambda j: keys[j])]
    gap = float(obj[order[0]] - obj[order[1]]) if b > 1 else 0.0
    diagnostics = {
        "restarts": restarts,
        "iterations": iters,
        "batch": b,
        "top_two_gap": gap,
        "exhaustive_g": exhaustive,
        "heuristic_warning": not exhaustive,
    }
    return float(obj[best]), v[best], g_rep[best], diagnostics


def _averaged_channel_candidate(states, channels, u_size, n_inputs):
    """Feasible policy ignoring the state: best input law of the averaged channel."""
    w_avg = np.zeros(channels[0].shape[1:])
    total = 0
    for w in channels:
        for q in states:
            w_avg += np.einsum("s,sxy->xy", q, np.asarray(w))
            total += 1
    w_avg /= total
    _, r = blahut_arimoto(w_avg)
    n_states = states[0].size
    m = min(u_size, n_inputs)
    v = np.zeros((n_states, u_size))
    v[:, :m] = r[None, :m]
    v /= v.sum(axis=1, keepdims=True)
    g = np.zeros((u_size, n_states), dtype=np.int64)
    g[:m] = np.arange(m)[:, None]
    return v, g


def gp_capacity_dm(
    channel: ChannelKernel,
    state: Pmf,
    u_size: int | None = None,
    *,
    restarts: int = 50,
    iters: int = 200,
    seed: int = 0,
) -> CapacityResult:
    """Capacity with the state known noncausally at the encoder only."""
    if channel.n_states != state.size:
        raise DimensionError("state alphabet mismatch")
    if u_size is None:
        u_size = channel.n_inputs * channel.n_states + 1
    if u_size < 1:
        raise ValueError("u_size must be >= 1")
    cand = [_averaged_channel_candidate([state.probs], [channel.w], u_size, channel.n_inputs)]
    value, v, g, diag = optimize_gp_policy(
        [state.probs], [channel.w], u_size,
        restarts=restarts, iters=iters, seed=seed, candidates=tuple(cand),
    )
    value = max(value, 0.0)
    cap = math.log(channel.n_outputs)
    value = min(value, cap)
    policy = GPPolicy(u_given_s=ConditionalPmf(v.copy()), x_map=g)
    diag = dict(diag)
    diag["u_size"] = u_size
    return CapacityResult(value=value, policy=policy, diagnostics=diag)


# ---------------------------------------------------------------------------
# non-stationary memoryless sequences


def odd_j_mask(n_max: int) -> np.ndarray:
    """mask[i-1] for i in 1..n_max: i odd and inside a dyadic block
    [2^(2k-1), 2^(2k)). Membership is equivalent to bit_length(i) even."""
    i = np.arange(1, n_max + 1, dtype=np.int64)
    bit_length = np.frexp(i.astype(np.float64))[1]
    return ((i & 1) == 1) & (bit_length % 2 == 0)


def in_dyadic_blocks(i: int) -> bool:
    """Closed-form block rule for the alternation index set."""
    return i.bit_length() % 2 == 0


def j_density_extrema(n_max: int) -> dict:
    """Running density (2/n)|odd block members up to n| and its extrema.

    Extrema are taken over dyadic endpoints n = 2^j with 2^10 <= 2^j <=
    n_max, where the oscillation has settled; they bracket [1/3, 2/3].
    """
    if n_max < 2**10:
        raise ValueError("n_max must be at least 2^10")
    mask = odd_j_mask(n_max)
    counts = np.cumsum(mask)
    n = np.arange(1, n_max + 1, dtype=np.float64)
    partials = 2.0 * counts / n
    j_lo = 10
    j_hi = int(math.floor(math.log2(n_max)))
    endpoints = [2**j for j in range(j_lo, j_hi + 1)]
    vals = partials[[e - 1 for e in endpoints]]
    return {
        "liminf_odd_J": float(vals.min()),
        "limsup_odd_J": float(vals.max()),
        "partials": partials,
        "endpoints": endpoints,
    }


@dataclass(frozen=True)
class SequenceSpec:
    """Description of a non-stationary memoryless channel/state sequence.

    kind 'stationary': channels['a'] / states['a'] used at every index.
    kind 'j-structured': odd indices use channels 'a' (inside the
    dyadic blocks) or 'b' (outside) with state 'a'; even indices use
    channel 'c' with state 'b'.
    kind 'explicit-periodic': cycle over the (channel, state) pairs
    listed in `period` (keys into channels/states).
    """

    kind: str
    channels: dict
    states: dict
    period: tuple = ()

    def __post_init__(self):
        if self.kind not in ("stationary", "j-structured", "explicit-periodic"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "stationary" and ("a" not in self.channels or "a" not in self.states):
            raise ValueError("stationary spec needs channel 'a' and state 'a'")
        if self.kind == "j-structured":
            for key in ("a", "b", "c"):
                if key not in self.channels:
                    raise ValueError(f"j-structured spec needs channel {key!r}")
            for key in ("a", "b"):
                if key not in self.states:
                    raise ValueError(f"j-structured spec needs state {key!r}")
        if self.kind == "explicit-periodic" and not self.period:
            raise ValueError("explicit-periodic spec needs a period")

    def component(self, i: int) -> tuple[str, str]:
        """(channel key, state key) at 1-based index i."""
        if self.kind == "stationary":
            return "a", "a"
        if self.kind == "j-structured":
            if i % 2 == 0:
                return "c", "b"
            return ("a" if in_dyadic_blocks(i) else "b"), "a"
        ck, sk = self.period[(i - 1) % len(self.period)]
        return ck, sk


def cesaro_capacity(seq: SequenceSpec, n_max: int, *, solver_kwargs: dict | None = None) -> dict:
    """Running averages (1/n) sum_{i<=n} C(W_i, P_{S_i}) and their liminf.

    The liminf surrogate is the minimum of the partial averages over the
    final dyadic window [n_max/2, n_max]; the structured sequences this
    targets oscillate on dyadic blocks, so the window always contains
    both extreme phases.
    """
    if n_max < 4:
        raise ValueError("horizon must be at least 4")
    kw = solver_kwargs or {}
    cache: dict[tuple[str, str], float] = {}

    def cap(ck: str, sk: str) -> float:
        if (ck, sk) not in cache:
            res = gp_capacity_dm(self_ch(ck), Pmf(np.asarray(seq.states[sk], dtype=np.float64)), **kw)
            cache[(ck, sk)] = res.value
        return cache[(ck, sk)]

    def self_ch(ck: str) -> ChannelKernel:
        ch = seq.channels[ck]
        return ch if isinstance(ch, ChannelKernel) else ChannelKernel(np.asarray(ch))

    analytic = None
    if seq.kind == "stationary":
        c = cap("a", "a")
        partial = np.full(n_max, c)
        analytic = c
    elif seq.kind == "j-structured":
        ca, cb, cc = cap("a", "a"), cap("b", "a"), cap("c", "b")
        mask_a = odd_j_mask(n_max)
        i = np.arange(1, n_max + 1)
        odd = (i & 1) == 1
        cnt_a = np.cumsum(mask_a)
        cnt_odd = np.cumsum(odd)
        cnt_b = cnt_odd - cnt_a
        cnt_c = i - cnt_odd
        partial = (cnt_a * ca + cnt_b * cb + cnt_c * cc) / i
        g = (2.0 / 3.0) * min(ca, cb) + (1.0 / 3.0) * max(ca, cb)
        analytic = 0.5 * (g + cc)
    else:
        per = [cap(ck, sk) for ck, sk in seq.period]
        reps = -(-n_max // len(per))
        vals = np.tile(per, reps)[:n_max]
        partial = np.cumsum(vals) / np.arange(1, n_max + 1)
        analytic = float(np.mean(per))
    lo = n_max // 2
    liminf = float(partial[lo - 1:].min())
    return {
        "partial_averages": partial,
        "liminf_estimate": liminf,
        "analytic_value": analytic,
        "constituents": dict(cache),
    }


def dyadic_alternation_value(wa: ChannelKernel, wb: ChannelKernel, q: Pmf, **kw) -> float:
    """Weighted blend 2/3 min + 1/3 max of the two constituent capacities,
    the liminf contribution of the dyadically alternating odd slots."""
    ca = gp_capacity_dm(wa, q, **kw).value
    cb = gp_capacity_dm(wb, q, **kw).value
    return (2.0 / 3.0) * min(ca, cb) + (1.0 / 3.0) * max(ca, cb)


def _is_state_symmetric_bsc(w: ChannelKernel) -> bool:
    if w.n_states != 2 or w.n_inputs != 2 or w.n_outputs != 2:
        return False
    for s in range(2):
        m = w.w[s]
        if not (abs(m[0, 0] - m[1, 1]) < 1e-12 and abs(m[0, 1] - m[1, 0]) < 1e-12):
            return False
        if not (0.0 < m[0, 1] < 1.0):
            return False
    return True


def interleaved_capacity(
    wa: ChannelKernel, wb: ChannelKernel, wc: ChannelKernel, qa: Pmf, qb: Pmf, **kw
) -> float:
    """Closed-form capacity of the odd/even interleaved sequence:
    half the dyadic blend of (wa, wb) at state qa plus half C(wc, qb).

    Requires wa and wb to be symmetric binary channels in each state;
    the closed form relies on the uniform auxiliary law being optimal
    on the odd slots, which that symmetry guarantees.
    """
    for name, w in (("wa", wa), ("wb", wb)):
        if not _is_state_symmetric_bsc(w):
            raise ValueError(f"{name} must be a binary symmetric channel in each state")
    g = dyadic_alternation_value(wa, wb, qa, **kw)
    cc = gp_capacity_dm(wc, qb, **kw).value
    return 0.5 * (g + cc)
