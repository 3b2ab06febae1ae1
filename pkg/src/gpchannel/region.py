"""Rate region with a rate-limited state description at the decoder.

A stationary memoryless system with state known at the encoder and a
separate noiseless link of R_d nats per symbol to the decoder achieves
the pairs (R, R_d) with

    R_d >= I(V;S) - I(V;Y)        (description cost after binning)
    R   <= I(U;Y|V) - I(U;S|V)    (message rate given the description)

over auxiliary laws P(v|s), P(u|v,s) and deterministic maps
x = g(u,v,s). The frontier solver sweeps a penalty on the description
constraint because the constraint set is nonconvex, then re-checks
feasibility exactly and anchors the endpoints with two closed-form
candidate policies (degenerate V at R_d = 0; V = S at large R_d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import softmax

from .capacity import blahut_arimoto, gp_capacity_dm
from .info import conditional_mutual_information, mutual_information
from .prob import ChannelKernel, Pmf, ValidationError
from .rng import stream


@dataclass(frozen=True)
class RegionPolicy:
    """(P(v|s), P(u|v,s), deterministic x = g[u,v,s])."""

    v_given_s: np.ndarray  # (S,V)
    u_given_vs: np.ndarray  # (V,S,U)
    x_map: np.ndarray  # (U,V,S) ints

    def __post_init__(self):
        for name, rows in (("v_given_s", self.v_given_s), ("u_given_vs", self.u_given_vs)):
            r = np.asarray(rows, dtype=np.float64)
            if (r < -1e-12).any() or np.abs(r.sum(axis=-1) - 1.0).max() > 1e-9:
                raise ValidationError(f"{name} rows must be probability vectors")


@dataclass(frozen=True)
class RegionPoint:
    r: float
    r_d: float
    policy: RegionPolicy
    diagnostics: dict


def _rates(policy: RegionPolicy, channel: ChannelKernel, state: Pmf) -> dict:
    """Exact single-letter quantities for one policy."""
    q = state.probs
    pv = np.asarray(policy.v_given_s, dtype=np.float64)
    pu = np.asarray(policy.u_given_vs, dtype=np.float64)
    g = np.asarray(policy.x_map, dtype=np.int64)
    n_u, n_v, n_s = g.shape
    s_idx = np.arange(n_s)
    # W_g[v,s,u,y] = W(y | g[u,v,s], s)
    wg = channel.w[s_idx[None, :, None], g.transpose(1, 2, 0), :]
    p_svuy = np.einsum("s,sv,vsu,vsuy->svuy", q, pv, pu, wg)
    p_sv = p_svuy.sum(axis=(2, 3))
    p_vy = p_svuy.sum(axis=(0, 2))
    i_vs = mutual_information(p_sv)
    i_vy = mutual_information(p_vy)
    i_uy_v = conditional_mutual_information(p_svuy.sum(axis=0).transpose(1, 2, 0))
    i_us_v = conditional_mutual_information(p_svuy.sum(axis=3).transpose(2, 0, 1))
    return {
        "i_vs": i_vs,
        "i_vy": i_vy,
        "message_rate": i_uy_v - i_us_v,
        "description_rate": i_vs - i_vy,
    }


def region_membership(point: RegionPoint, channel: ChannelKernel, state: Pmf) -> bool:
    """Exact check of both inequalities for the point's own policy."""
    rates = _rates(point.policy, channel, state)
    return (
        point.r <= rates["message_rate"] + 1e-9
        and point.r_d >= rates["description_rate"] - 1e-9
    )


# ---------------------------------------------------------------------------
# candidate policies anchoring the endpoints


def _degenerate_v_candidate(channel: ChannelKernel, state: Pmf, v_size: int, u_size: int, seed: int) -> RegionPolicy:
    """V carries nothing; the encoder-only optimum is feasible at R_d = 0."""
    gp = gp_capacity_dm(channel, state, u_size=min(u_size, channel.n_inputs * channel.n_states + 1), seed=seed)
    n_s = channel.n_states
    v_rows = np.zeros((n_s, v_size))
    v_rows[:, 0] = 1.0
    inner_u = gp.policy.u_given_s.rows.shape[1]
    u_rows = np.zeros((v_size, n_s, u_size))
    u_rows[:, :, :inner_u] = gp.policy.u_given_s.rows[None, :, :]
    u_rows[:, :, 0] += 1.0 - u_rows.sum(axis=2)  # pad unused v rows to valid pmfs
    g = np.zeros((u_size, v_size, n_s), dtype=np.int64)
    g[:inner_u] = np.asarray(gp.policy.x_map)[:, None, :]
    return RegionPolicy(v_given_s=v_rows, u_given_vs=u_rows, x_map=g)


def _full_description_candidate(channel: ChannelKernel, state: Pmf, v_size: int, u_size: int) -> RegionPolicy:
    """V = S delivered to the decoder; per-state optimal inputs give the
    two-sided capacity once R_d covers the description cost."""
    n_s, n_x = channel.n_states, channel.n_inputs
    if v_size < n_s or u_size < n_x:
        raise ValidationError("v_size < |S| or u_size < |X| cannot express the full-description candidate")
    v_rows = np.zeros((n_s, v_size))
    v_rows[np.arange(n_s), np.arange(n_s)] = 1.0
    u_rows = np.zeros((v_size, n_s, u_size))
    for s in range(n_s):
        _, r = blahut_arimoto(channel.w[s])
        u_rows[:, s, :n_x] = r[None, :]
    g = np.zeros((u_size, v_size, n_s), dtype=np.int64)
    g[:n_x] = np.arange(n_x)[:, None, None]
    return RegionPolicy(v_given_s=v_rows, u_given_vs=u_rows, x_map=g)


# ---------------------------------------------------------------------------
# penalty-sweep optimizer


def _unpack(theta, n_s, v_size, u_size, n_x):
    a = n_s * v_size
    b = v_size * n_s * u_size
    pv = softmax(theta[:a].reshape(n_s, v_size), axis=-1)
    pu = softmax(theta[a : a + b].reshape(v_size, n_s, u_size), axis=-1)
    px = softmax(theta[a + b :].reshape(u_size, v_size, n_s, n_x), axis=-1)
    return pv, pu, px


def _soft_rates(pv, pu, px, w, q):
    """Rates with a relaxed stochastic x-map (used inside the optimizer)."""
    wg = np.einsum("uvsx,sxy->vsuy", px, w)
    p_svuy = np.einsum("s,sv,vsu,vsuy->svuy", q, pv, pu, wg)
    i_vs = mutual_information(p_svuy.sum(axis=(2, 3)))
    i_vy = mutual_information(p_svuy.sum(axis=(0, 2)))
    i_uy_v = conditional_mutual_information(p_svuy.sum(axis=0).transpose(1, 2, 0))
    i_us_v = conditional_mutual_information(p_svuy.sum(axis=3).transpose(2, 0, 1))
    return i_uy_v - i_us_v, i_vs - i_vy


def _optimize_grid_point(channel, state, v_size, u_size, r_d, restarts, seed):
    n_s, n_x = channel.n_states, channel.n_inputs
    dim = n_s * v_size + v_size * n_s * u_size + u_size * v_size * n_s * n_x
    rng = stream(seed, 0x8E61, int(round(r_d * 1e6)))
    best = None
    for restart in range(restarts):
        theta0 = rng.normal(scale=1.5, size=dim)
        theta = theta0
        for mu in (2.0, 20.0, 200.0):
            def neg(th, mu=mu):
                pv, pu, px = _unpack(th, n_s, v_size, u_size, n_x)
                rate, cost = _soft_rates(pv, pu, px, channel.w, state.probs)
                return -(rate - mu * max(cost - r_d, 0.0))

            res = minimize(neg, theta, method="L-BFGS-B", options={"maxiter": 120})
            theta = res.x
        pv, pu, px = _unpack(theta, n_s, v_size, u_size, n_x)
        g = px.argmax(axis=-1).astype(np.int64)
        policy = RegionPolicy(v_given_s=pv, u_given_vs=pu, x_map=g)
        rates = _rates(policy, channel, state)
        if rates["description_rate"] > r_d + 1e-9:
            continue
        if best is None or rates["message_rate"] > best[0]:
            best = (rates["message_rate"], policy)
    return best


def region_frontier(
    channel: ChannelKernel,
    state: Pmf,
    v_size: int | None = None,
    u_size: int | None = None,
    rd_grid=None,
    *,
    restarts: int = 6,
    seed: int = 0,
) -> list[RegionPoint]:
    """Best message rate per description-rate budget, monotonized.

    Each grid point maximizes the message rate subject to the
    description cost fitting the budget; two closed-form candidate
    policies anchor the R_d = 0 and saturation endpoints, and a running
    maximum enforces monotonicity (a larger budget can always reuse a
    smaller budget's policy).
    """
    bound_v = channel.n_inputs * channel.n_states + 1
    bound_u = channel.n_inputs * channel.n_states * bound_v
    v_size = bound_v if v_size is None else v_size
    u_size = bound_u if u_size is None else u_size
    if rd_grid is None:
        rd_grid = np.linspace(0.0, math.log(max(channel.n_states, 2)), 9)
    rd_grid = np.asarray(rd_grid, dtype=np.float64)
    if (rd_grid < 0).any():
        raise ValidationError("description-rate budgets must be non-negative")

    candidates = [_degenerate_v_candidate(channel, state, v_size, u_size, seed)]
    try:
        candidates.append(_full_description_candidate(channel, state, v_size, u_size))
    except ValidationError:
        pass

    points: list[RegionPoint] = []
    best_so_far: tuple[float, RegionPolicy] | None = None
    for r_d in rd_grid:
        pool: list[tuple[float, RegionPolicy]] = []
        for pol in candidates:
            rates = _rates(pol, channel, state)
            if rates["description_rate"] <= r_d + 1e-9:
                pool.append((rates["message_rate"], pol))
        opt = _optimize_grid_point(channel, state, v_size, u_size, float(r_d), restarts, seed)
        if opt is not None:
            pool.append(opt)
        if best_so_far is not None:
            pool.append(best_so_far)
        if not pool:
            # R_d = 0 always admits the trivial zero-rate policy
            pool.append((0.0, candidates[0]))
        rate, pol = max(pool, key=lambda t: t[0])
        best_so_far = (rate, pol)
        points.append(
            RegionPoint(
                r=max(rate, 0.0),
                r_d=float(r_d),
                policy=pol,
                diagnostics={
                    "v_size": v_size,
                    "u_size": u_size,
                    "cardinality_bounds": (bound_v, bound_u),
                },
            )
        )
    return points


def saturation_knee(points: list[RegionPoint], tol: float = 1e-4) -> float | None:
    """Smallest grid R_d after which the frontier stops improving."""
    for i in range(1, len(points)):
        if all(points[j].r - points[j - 1].r < tol for j in range(i, len(points))):
            return points[i - 1].r_d
    return None
