"""Mixed channels and mixed state processes.

A mixed system draws one channel component and one state component once
and uses them for the whole block. The achievable-rate lower bound for a
shared single-letter policy is

    min over (k,l) of I(U_l; Y_kl)  -  max over l of I(U_l; S_l),

where (S_l, U_l, X_l, Y_kl) is the single-letter system composed from
state component l and channel component k. The Monte-Carlo demo draws
n-block information densities under the exact mixture marginals and
shows the spectrum splitting into one mode per component pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .capacity import CapacityResult, _averaged_channel_candidate, optimize_gp_policy
from .info import SpectrumSamples, mutual_information
from .prob import ChannelKernel, ConditionalPmf, DimensionError, GPPolicy, Pmf, ValidationError, compose_joint, marginal
from .rng import stream

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class MixtureSpec:
    """Finite mixture of channel kernels and of state laws.

    channel_components / state_components are tuples of (weight, object).
    Countable mixtures must be truncated to an explicit list; a missing
    weight tail larger than 1e-9 is rejected.
    """

    channel_components: tuple
    state_components: tuple

    def __post_init__(self):
        for name, comps in (("channel", self.channel_components), ("state", self.state_components)):
            if not comps:
                raise ValidationError(f"{name} mixture is empty")
            weights = np.array([w for w, _ in comps], dtype=np.float64)
            if (weights < 0).any():
                raise ValidationError(f"{name} mixture has a negative weight")
            if abs(weights.sum() - 1.0) > 1e-9:
                raise ValidationError(
                    f"{name} mixture weights sum to {weights.sum():.12g}; truncation tail exceeds 1e-9"
                )
            if not (weights > 0).any():
                raise ValidationError(f"{name} mixture has empty support")
        shapes = {ch.w.shape for _, ch in self.channel_components}
        if len(shapes) != 1:
            raise DimensionError("channel components have mismatched alphabets")
        sizes = {q.size for _, q in self.state_components}
        if len(sizes) != 1 or sizes.pop() != self.channel_components[0][1].n_states:
            raise DimensionError("state components mismatch the channel state alphabet")

    @property
    def channel_support(self) -> list[ChannelKernel]:
        return [ch for w, ch in self.channel_components if w > _WEIGHT_TOL]

    @property
    def state_support(self) -> list[Pmf]:
        return [q for w, q in self.state_components if w > _WEIGHT_TOL]


def _pair_objective(mix: MixtureSpec, policy: GPPolicy):
    """(I(U;Y) matrix over (k,l), I(U;S) vector over l) for a shared policy."""
    chans = mix.channel_support
    states = mix.state_support
    i_uy = np.empty((len(chans), len(states)))
    i_us = np.empty(len(states))
    for li, q in enumerate(states):
        joint_su = q.probs[:, None] * policy.u_given_s.rows
        i_us[li] = mutual_information(joint_su)
        for ki, ch in enumerate(chans):
            joint = compose_joint(q, policy, ch)
            i_uy[ki, li] = mutual_information(marginal(joint, "uy"))
    return i_uy, i_us


def mixed_lower_bound(mix: MixtureSpec, policy: GPPolicy) -> float:
    """Exact min_{k,l} I(U_l;Y_kl) - max_l I(U_l;S_l) for a shared policy."""
    i_uy, i_us = _pair_objective(mix, policy)
    return float(i_uy.min() - i_us.max())


def maximize_mixed_lower_bound(
    mix: MixtureSpec,
    u_size: int | None = None,
    *,
    restarts: int = 50,
    iters: int = 200,
    seed: int = 0,
) -> CapacityResult:
    """Best shared policy for the mixed lower bound (lower bound only:
    no matching converse is computed for proper mixtures)."""
    chans = [ch.w for ch in mix.channel_support]
    states = [q.probs for q in mix.state_support]
    n_inputs = chans[0].shape[1]
    n_states = states[0].size
    if u_size is None:
        u_size = n_inputs * n_states + 1
    cand = [_averaged_channel_candidate(states, chans, u_size, n_inputs)]
    value, v, g, diag = optimize_gp_policy(
        states, chans, u_size, restarts=restarts, iters=iters, seed=seed, candidates=tuple(cand)
    )
    policy = GPPolicy(u_given_s=ConditionalPmf(v.copy()), x_map=g)
    diag = dict(diag)
    diag.update(u_size=u_size, lower_bound_only=len(chans) > 1 or len(states) > 1)
    return CapacityResult(value=max(value, 0.0), policy=policy, diagnostics=diag)


def _component_tables(mix: MixtureSpec, policy: GPPolicy):
    """Per-component (u,y) cell probabilities and log tables.

    Returns (cells (K,L,U,Y) joint laws, log_uy, log_u (L,U), log_y
    (K,L,Y), log weight vectors). Zero cells map to -inf logs.
    """
    chans = mix.channel_support
    states = mix.state_support
    cw = np.array([w for w, _ in mix.channel_components if w > _WEIGHT_TOL])
    sw = np.array([w for w, _ in mix.state_components if w > _WEIGHT_TOL])
    k_n, l_n = len(chans), len(states)
    first = compose_joint(states[0], policy, chans[0]).joint
    n_u, n_y = first.shape[1], first.shape[3]
    cells = np.empty((k_n, l_n, n_u, n_y))
    for li, q in enumerate(states):
        for ki, ch in enumerate(chans):
            cells[ki, li] = marginal(compose_joint(q, policy, ch), "uy")
    with np.errstate(divide="ignore"):
        log_uy = np.log(cells)
        log_u = np.log(cells.sum(axis=3)[0])  # u-marginal depends on l only
        log_y = np.log(cells.sum(axis=2))
    return cells, log_uy, log_u, log_y, np.log(cw), np.log(sw)


def _counts_scores(counts: np.ndarray, log_table: np.ndarray) -> np.ndarray:
    """sum_i log_table[cell_i] from multinomial cell counts; -inf-safe."""
    finite = np.where(np.isfinite(log_table), log_table, 0.0)
    out = counts @ finite.ravel()
    bad = counts[:, ~np.isfinite(log_table).ravel()].sum(axis=1) > 0
    out[bad] = -np.inf
    return out


def mixture_spectrum_demo(
    mix: MixtureSpec,
    policy: GPPolicy,
    n: int,
    draws: int,
    seed: int = 0,
) -> SpectrumSamples:
    """Normalized block densities (1/n) log[P(Y^n|U^n)/P(Y^n)] under the
    exact mixture marginals.

    Each trial picks a component pair by weight, draws the (U,Y) cell
    counts of an n-block from that pair's product law, and evaluates the
    density with the mixture laws via log-sum-exp over components — the
    marginals of the mixed system are mixtures of product laws, so the
    block density does not tensorize and the mixture must enter inside
    the log.
    """
    if draws < 1:
        raise ValueError("draws must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    cells, log_uy, log_u, log_y, log_cw, log_sw = _component_tables(mix, policy)
    k_n, l_n, n_u, n_y = cells.shape
    rng = stream(seed, 0x5BEC)
    pair_w = np.exp(log_cw[:, None] + log_sw[None, :]).ravel()
    pair_w /= pair_w.sum()
    which = rng.choice(k_n * l_n, size=draws, p=pair_w)
    densities = np.empty(draws)
    for pair in range(k_n * l_n):
        sel = np.flatnonzero(which == pair)
        if sel.size == 0:
            continue
        ki, li = divmod(pair, l_n)
        counts = rng.multinomial(n, cells[ki, li].ravel(), size=sel.size)
        # conditional score log P(y|u) = log P(u,y) - log P(u), per component
        joint_scores = np.stack(
            [
                _counts_scores(counts, log_uy[k, l]) + log_cw[k] + log_sw[l]
                for k in range(k_n)
                for l in range(l_n)
            ]
        )  # (KL, m): log of weighted block joint P(u,y) per component
        u_counts = counts.reshape(-1, n_u, n_y).sum(axis=2)
        u_scores = np.stack(
            [_counts_scores(u_counts, log_u[l]) + log_sw[l] for l in range(l_n)]
        )
        y_counts = counts.reshape(-1, n_u, n_y).sum(axis=1)
        y_scores = np.stack(
            [
                _counts_scores(y_counts, log_y[k, l]) + log_cw[k] + log_sw[l]
                for k in range(k_n)
                for l in range(l_n)
            ]
        )
        log_joint = logsumexp(joint_scores, axis=0)
        log_pu = logsumexp(u_scores, axis=0)
        log_py = logsumexp(y_scores, axis=0)
        densities[sel] = (log_joint - log_pu - log_py) / n
    finite = np.isfinite(densities)
    return SpectrumSamples(
        samples=densities[finite],
        n=n,
        seed=seed,
        tail_infinite=int((~finite).sum()),
    )
