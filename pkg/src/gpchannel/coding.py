"""Random-coding simulation for channels with encoder state knowledge.

Implements the binned random codebook: i.i.d. auxiliary codewords split
into per-message subcodebooks, a covering encoder that picks the first
codeword whose conditional atypicality eta(u,s) is below sqrt(pi1), and
a threshold decoder that looks for the unique subcodebook holding a
T1-typical codeword. The per-block error is bounded by

    rho_n = 2*sqrt(pi1) + pi2 + exp(-exp(n*gamma2)) + exp(-n*gamma1),

which the simulator reports next to the measured error.

Two execution modes share one trial semantics:

* explicit — the codebook is materialized and scanned, feasible only at
  desk scale (codewords capped at 2^22, decode work at 2^30).
* implicit — codeword counts at the analysis rates are astronomically
  large, so the simulator exploits exchangeability of the i.i.d.
  codebook: covering is a lazy scan over freshly drawn candidates, and
  the confusion event is a Bernoulli draw from 1-(1-q(Y))^K with q(Y)
  estimated by importance sampling under the tilted law P_{U|Y}.

Both modes log per-trial event flags (covering failure E1, decoding
atypicality E2, confusion E3) so the error decomposition is auditable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

from . import kernels
from .info import density_table, mutual_information
from .prob import ChannelKernel, GPPolicy, Pmf, ValidationError, compose_joint, marginal
from .rng import stream

CODEWORD_CAP = 2**22
WORK_CAP = 2**30
_MESSAGE_LABEL_CAP = 2**62


class BudgetError(RuntimeError):
    """Configuration exceeds the desk-scale explicit-mode guards."""


@dataclass(frozen=True)
class MemorylessSystem:
    """Single-letter system (state, policy, channel) with cached tables."""

    state: Pmf
    policy: GPPolicy
    channel: ChannelKernel

    @cached_property
    def joint(self):
        return compose_joint(self.state, self.policy, self.channel)

    @cached_property
    def p_uy(self) -> np.ndarray:
        return marginal(self.joint, "uy")

    @cached_property
    def p_us(self) -> np.ndarray:
        return marginal(self.joint, "su").T.copy()

    @cached_property
    def p_u(self) -> np.ndarray:
        return self.p_uy.sum(axis=1)

    @cached_property
    def p_y(self) -> np.ndarray:
        return self.p_uy.sum(axis=0)

    @cached_property
    def d_uy(self) -> np.ndarray:
        """Per-symbol density log[p(y|u)/p(y)]; -inf on zero-mass pairs."""
        return density_table(self.p_uy).values

    @cached_property
    def d_us(self) -> np.ndarray:
        return density_table(self.p_us).values

    @cached_property
    def i_uy(self) -> float:
        return mutual_information(self.p_uy)

    @cached_property
    def i_us(self) -> float:
        return mutual_information(self.p_us)

    @cached_property
    def p_y_given_us(self) -> np.ndarray:
        """(U,S,Y): channel output law given the codeword/state symbols."""
        pxus = self.policy.x_given_us(self.channel.n_inputs)  # (U,S,X)
        return np.einsum("usx,sxy->usy", pxus, self.channel.w)

    @cached_property
    def p_u_given_y(self) -> np.ndarray:
        """(U,Y) columns P(u|y); proposal law for confusion sampling."""
        py = self.p_y
        out = np.zeros_like(self.p_uy)
        pos = py > 0
        out[:, pos] = self.p_uy[:, pos] / py[pos]
        return out


@dataclass(frozen=True)
class TypicalityThresholds:
    """Per-symbol decoding / covering thresholds in nats."""

    t1: float
    t2: float

    def __post_init__(self):
        if not (math.isfinite(self.t1) and math.isfinite(self.t2)):
            raise ValidationError("thresholds must be finite")


def default_thresholds(system: MemorylessSystem, gamma1: float, gamma2: float) -> TypicalityThresholds:
    """T1 at the packing density minus gamma1, T2 at the covering density
    plus gamma2. Memoryless spectra are point masses at the MIs, so the
    single-letter values stand in for the spectral estimates."""
    return TypicalityThresholds(t1=system.i_uy - gamma1, t2=system.i_us + gamma2)


@dataclass(frozen=True)
class CodingExperiment:
    """Blocklength, slacks, rates (nats), seed, and trial budget."""

    n: int
    gamma1: float
    gamma2: float
    rate: float
    rate_total: float
    seed: int = 0
    trials: int = 1000

    def __post_init__(self):
        if self.n < 1 or self.trials < 1:
            raise ValidationError("n and trials must be positive")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValidationError("slacks must be non-negative")
        if self.rate > self.rate_total + 1e-12:
            raise ValidationError("message rate exceeds total codeword rate")

    @property
    def subcodebook_size(self) -> int:
        return int(math.ceil(math.exp(min(self.n * (self.rate_total - self.rate), 62 * math.log(2)))))

    @property
    def message_count(self) -> int:
        return int(math.ceil(math.exp(min(self.n * max(self.rate, 0.0), 62 * math.log(2)))))

    @property
    def log_total_codewords(self) -> float:
        return self.n * self.rate_total


def design_experiment(
    system: MemorylessSystem,
    n: int,
    gamma1: float,
    gamma2: float,
    *,
    rate: float | None = None,
    seed: int = 0,
    trials: int = 1000,
) -> CodingExperiment:
    """Rates from the single-letter design point: total rate pays the
    packing slack, the message rate additionally pays covering."""
    r_total = system.i_uy - 2.0 * gamma1
    if rate is None:
        rate = r_total - (system.i_us + 2.0 * gamma2)
    r_total = max(r_total, rate + 2.0 * gamma2 + system.i_us)
    return CodingExperiment(
        n=n, gamma1=gamma1, gamma2=gamma2, rate=rate, rate_total=r_total, seed=seed, trials=trials
    )


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    if total <= 0:
        raise ValidationError("zero draws")
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def _block_sums(table: np.ndarray, cell_p: np.ndarray, n: int, draws: int, rng) -> np.ndarray:
    """Draws of sum_i table[cell_i] for n i.i.d. cells ~ cell_p."""
    counts = rng.multinomial(n, cell_p.ravel(), size=draws)
    finite = np.where(np.isfinite(table), table, 0.0).ravel()
    sums = counts @ finite
    bad = counts[:, ~np.isfinite(table).ravel()].sum(axis=1) > 0
    sums[bad] = -np.inf
    return sums


def estimate_pi(
    system: MemorylessSystem,
    n: int,
    draws: int,
    thresholds: TypicalityThresholds,
    seed: int = 0,
) -> dict:
    """Monte-Carlo atypicality frequencies with Wilson 95% intervals.

    pi1 = P(block (U,Y) density below n*t1), pi2 = P(block (U,S) density
    above n*t2), both under the designed joint law.
    """
    if draws < 1:
        raise ValidationError("zero draws")
    rng1 = stream(seed, 0x9101)
    rng2 = stream(seed, 0x9102)
    s1 = _block_sums(system.d_uy, system.p_uy, n, draws, rng1)
    s2 = _block_sums(system.d_us, system.p_us, n, draws, rng2)
    k1 = int((s1 < n * thresholds.t1).sum())
    k2 = int((s2 > n * thresholds.t2).sum())
    return {
        "pi1": k1 / draws,
        "pi1_ci": wilson_interval(k1, draws),
        "pi2": k2 / draws,
        "pi2_ci": wilson_interval(k2, draws),
        "draws": draws,
    }


def eta(
    u_block: np.ndarray,
    s_block: np.ndarray,
    system: MemorylessSystem,
    thresholds: TypicalityThresholds,
    inner_draws: int,
    rng,
) -> tuple[float, float]:
    """P((u_block, Y^n) not T1-typical | u_block, s_block), Monte-Carlo.

    Outputs are conditionally i.i.d. given the (u,s) symbol at each
    position, so only the (u,s) class counts matter; each class draws a
    multinomial over output symbols and dots with the density row.
    Returns (estimate, standard error).
    """
    n = u_block.size
    pairs = u_block.astype(np.int64) * system.p_us.shape[1] + s_block.astype(np.int64)
    counts = np.bincount(pairs, minlength=system.p_us.size)
    sums = np.zeros(inner_draws)
    hit_minus_inf = np.zeros(inner_draws, dtype=bool)
    for pair in np.flatnonzero(counts):
        u, s = divmod(pair, system.p_us.shape[1])
        c = rng.multinomial(int(counts[pair]), system.p_y_given_us[u, s], size=inner_draws)
        row = system.d_uy[u]
        finite = np.where(np.isfinite(row), row, 0.0)
        sums += c @ finite
        hit_minus_inf |= c[:, ~np.isfinite(row)].sum(axis=1) > 0
    sums[hit_minus_inf] = -np.inf
    k = int((sums < n * thresholds.t1).sum())
    est = k / inner_draws
    return est, math.sqrt(max(est * (1 - est), 1e-12) / inner_draws)


def eta_exact(
    u_block: np.ndarray,
    s_block: np.ndarray,
    system: MemorylessSystem,
    thresholds: TypicalityThresholds,
) -> float:
    """Exact eta by output enumeration; oracle for n <= 12."""
    n = u_block.size
    n_y = system.channel.n_outputs
    if n_y**n > 4**12:
        raise BudgetError("exact eta enumeration is limited to tiny blocks")
    total = 0.0
    for y_block in product(range(n_y), repeat=n):
        logp = 0.0
        dsum = 0.0
        for i, y in enumerate(y_block):
            p = system.p_y_given_us[u_block[i], s_block[i], y]
            if p == 0.0:
                logp = -math.inf
                break
            logp += math.log(p)
            dsum += system.d_uy[u_block[i], y]
        if logp == -math.inf:
            continue
        if not dsum >= n * thresholds.t1:  # catches -inf and nan-free atypical
            total += math.exp(logp)
    return total


# ---------------------------------------------------------------------------
# explicit codebook


@dataclass(frozen=True)
class Codebook:
    """Materialized i.i.d. codebook partitioned into contiguous bins."""

    words: np.ndarray  # (total, n) auxiliary symbols
    subcodebook_size: int
    message_count: int
    seed: int

    def bin_range(self, message: int) -> tuple[int, int]:
        lo = message * self.subcodebook_size
        return lo, lo + self.subcodebook_size


def build_code(experiment: CodingExperiment, p_u: np.ndarray) -> Codebook:
    total = experiment.message_count * experiment.subcodebook_size
    if total > CODEWORD_CAP:
        raise BudgetError(
            f"codebook of {total} codewords exceeds the {CODEWORD_CAP} cap; reduce n or rates"
        )
    if total * experiment.n > WORK_CAP:
        raise BudgetError(
            f"decode work {total * experiment.n} exceeds the {WORK_CAP} cap; reduce n or rates"
        )
    rng = stream(experiment.seed, 0xB00C)
    cdf = np.cumsum(np.asarray(p_u, dtype=np.float64))
    uniforms = rng.random((total, experiment.n))
    words = kernels.categorical_sample(cdf, uniforms.ravel()).reshape(total, experiment.n)
    return Codebook(
        words=words,
        subcodebook_size=experiment.subcodebook_size,
        message_count=experiment.message_count,
        seed=experiment.seed,
    )


@dataclass(frozen=True)
class EncodeResult:
    l_index: int
    u_block: np.ndarray
    x_block: np.ndarray
    covering_failed: bool


def _draw_conditional(rows: np.ndarray, rng) -> np.ndarray:
    """One categorical draw per row of a stochastic matrix (n, m)."""
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(rows.shape[0])
    idx = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(idx, rows.shape[1] - 1)


def _draw_inputs(system: MemorylessSystem, u_block: np.ndarray, s_block: np.ndarray, rng) -> np.ndarray:
    pxus = system.policy.x_given_us(system.channel.n_inputs)
    return _draw_conditional(pxus[u_block, s_block], rng)


def encode(
    codebook: Codebook,
    message: int,
    s_block: np.ndarray,
    system: MemorylessSystem,
    thresholds: TypicalityThresholds,
    covering_threshold: float,
    inner_draws: int,
    rng,
) -> EncodeResult:
    """First-index covering scan over the message's bin.

    A codeword qualifies when its estimated eta is at most the covering
    threshold (sqrt(pi1) in the designed scheme). If none qualifies the
    first codeword is transmitted anyway and the failure flagged.
    """
    lo, hi = codebook.bin_range(message)
    chosen = None
    for l_index in range(lo, hi):
        est, _ = eta(codebook.words[l_index], s_block, system, thresholds, inner_draws, rng)
        if est <= covering_threshold:
            chosen = l_index
            break
    failed = chosen is None
    if failed:
        chosen = lo
    u_block = codebook.words[chosen]
    x_block = _draw_inputs(system, u_block, s_block, rng)
    return EncodeResult(l_index=chosen, u_block=u_block, x_block=x_block, covering_failed=failed)


def decode(
    codebook: Codebook,
    y_block: np.ndarray,
    system: MemorylessSystem,
    thresholds: TypicalityThresholds,
) -> int | None:
    """Unique-bin threshold decoder; None when zero or multiple bins hit."""
    n = y_block.size
    scores = kernels.codebook_scores(system.d_uy, codebook.words, y_block.astype(np.int64))
    hits = np.flatnonzero(scores >= n * thresholds.t1)
    messages = np.unique(hits // codebook.subcodebook_size)
    if messages.size == 1:
        return int(messages[0])
    return None


# ---------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    message: int
    l_index: int
    e1: bool
    e2: bool
    e3: bool
    decoded: int  # -1 on failure
    ok: bool


@dataclass(frozen=True)
class ExperimentReport:
    trials: tuple
    empirical_error: float
    error_ci: tuple
    rho_n: float
    rho_terms: dict
    pi1: float
    pi2: float
    mode: str
    converse_mode: bool
    diagnostics: dict = field(default_factory=dict)

    def event_rates(self) -> dict:
        t = len(self.trials)
        return {
            "e1": sum(r.e1 for r in self.trials) / t,
            "e2_not_e1": sum(r.e2 and not r.e1 for r in self.trials) / t,
            "e3": sum(r.e3 for r in self.trials) / t,
        }


def rho_bound(pi1: float, pi2: float, n: int, gamma1: float, gamma2: float) -> dict:
    terms = {
        "covering": 2.0 * math.sqrt(pi1),
        "atypical_state": pi2,
        "bin_exhaustion": math.exp(-math.exp(n * gamma2)) if n * gamma2 < 700 else 0.0,
        "confusion": math.exp(-n * gamma1),
    }
    terms["rho_n"] = sum(terms.values())
    return terms


def _transmit(system: MemorylessSystem, u_block: np.ndarray, s_block: np.ndarray, rng) -> np.ndarray:
    """Y^n given the codeword and state blocks (input drawn internally)."""
    return _draw_conditional(system.p_y_given_us[u_block, s_block], rng)


def _confusion_probability(
    system: MemorylessSystem,
    y_block: np.ndarray,
    thresholds: TypicalityThresholds,
    log_k_out: float,
    inner_draws: int,
    rng,
) -> float:
    """P(some independent codeword is T1-typical with y_block).

    q(y) = P_{U ~ p_U^n}(density >= n*t1) is importance-sampled under
    the per-symbol tilted proposal P(u|y); the weight is exp(-density),
    which concentrates the indicator near certainty. The count of
    independent codewords enters only through exp(log_k_out), kept in
    log space because it overflows any integer format at analysis rates.
    """
    n = y_block.size
    y_counts = np.bincount(y_block, minlength=system.p_y.size)
    d = np.zeros(inner_draws)
    for y in np.flatnonzero(y_counts):
        c = rng.multinomial(int(y_counts[y]), system.p_u_given_y[:, y], size=inner_draws)
        row = system.d_uy[:, y]
        finite = np.where(np.isfinite(row), row, 0.0)
        contrib = c @ finite
        contrib[c[:, ~np.isfinite(row)].sum(axis=1) > 0] = -np.inf
        d += contrib
    weights = np.where(d >= n * thresholds.t1, np.exp(-np.clip(d, -700, 700)), 0.0)
    q_hat = float(weights.mean())
    if q_hat <= 0.0:
        return 0.0
    exponent = math.exp(min(log_k_out + math.log(q_hat), 50.0))
    return -math.expm1(-exponent)


def _run_explicit(system, experiment, thresholds, pi, inner_draws):
    codebook = build_code(experiment, system.p_u)
    covering_threshold = math.sqrt(pi["pi1"])
    records = []
    n = experiment.n
    for t in range(experiment.trials):
        rng = stream(experiment.seed, 0x7121, t)
        message = int(rng.integers(codebook.message_count))
        s_block = _draw_conditional(
            np.tile(system.state.probs, (n, 1)), rng
        )
        enc = encode(codebook, message, s_block, system, thresholds, covering_threshold, inner_draws, rng)
        y_block = _draw_conditional(system.channel.w[s_block, enc.x_block], rng)
        d2 = float(np.where(np.isfinite(system.d_uy[enc.u_block, y_block]), system.d_uy[enc.u_block, y_block], -np.inf).sum())
        e2 = not d2 >= n * thresholds.t1
        scores = kernels.codebook_scores(system.d_uy, codebook.words, y_block.astype(np.int64))
        hits = np.flatnonzero(scores >= n * thresholds.t1)
        hit_messages = np.unique(hits // codebook.subcodebook_size)
        decoded = int(hit_messages[0]) if hit_messages.size == 1 else None
        lo, hi = codebook.bin_range(message)
        # confusion: some other bin held a typical codeword
        e3 = bool(((hits < lo) | (hits >= hi)).any())
        ok = decoded == message
        records.append(
            TrialRecord(
                trial=t,
                message=message,
                l_index=enc.l_index,
                e1=enc.covering_failed,
                e2=e2,
                e3=e3,
                decoded=-1 if decoded is None else decoded,
                ok=bool(ok),
            )
        )
    return records, "explicit"


def _run_implicit(system, experiment, thresholds, pi, inner_draws, scan_cap=256):
    """Exchangeable-trial simulation without materializing the codebook.

    The scanned bin entries are i.i.d. from p_U^n, so the covering scan
    draws fresh candidates until one passes; when the bin is larger than
    the scan cap, the remaining failure mass is extrapolated from the
    observed pass rate. Confusion is decided by a Bernoulli draw from
    the importance-sampled typicality probability of the out-of-bin
    codeword population. A trial counts as correct only when no event
    fires, which upper-bounds the explicit decoder's error.
    """
    records = []
    n = experiment.n
    covering_threshold = math.sqrt(pi["pi1"])
    log_sub = n * (experiment.rate_total - experiment.rate)
    cdf_u = np.cumsum(system.p_u)
    for t in range(experiment.trials):
        rng = stream(experiment.seed, 0x7122, t)
        message = t % min(experiment.message_count, _MESSAGE_LABEL_CAP)
        s_block = _draw_conditional(np.tile(system.state.probs, (n, 1)), rng)
        scan_limit = int(min(math.exp(min(log_sub, 20)), scan_cap))
        chosen = None
        fails = 0
        for attempt in range(scan_limit):
            u_block = kernels.categorical_sample(cdf_u, rng.random(n))
            est, _ = eta(u_block, s_block, system, thresholds, inner_draws, rng)
            if est <= covering_threshold:
                chosen = attempt
                break
            fails += 1
        if chosen is None:
            if log_sub <= math.log(scan_limit) + 1e-12:
                # the whole bin was scanned and nothing qualified
                e1 = True
            else:
                # extrapolate: every unscanned bin entry fails independently
                # with the (smoothed) observed failure rate
                p_fail = (fails + 1) / (scan_limit + 2)
                log_p_all_fail = math.exp(min(log_sub, 700.0)) * math.log(p_fail)
                e1 = bool(rng.random() < math.exp(max(log_p_all_fail, -700.0)))
            chosen = 0
        else:
            e1 = False
        y_block = _transmit(system, u_block, s_block, rng)
        d_entries = system.d_uy[u_block, y_block]
        d2 = float(np.where(np.isfinite(d_entries), d_entries, -np.inf).sum())
        e2 = not d2 >= n * thresholds.t1
        log_k_out = experiment.log_total_codewords  # out-of-bin population
        p_e3 = _confusion_probability(system, y_block, thresholds, log_k_out, inner_draws, rng)
        e3 = bool(rng.random() < p_e3)
        ok = not (e1 or e2 or e3)
        records.append(
            TrialRecord(
                trial=t,
                message=message,
                l_index=chosen,
                e1=e1,
                e2=e2,
                e3=e3,
                decoded=message if ok else -1,
                ok=ok,
            )
        )
    return records, "implicit"


def run_experiment(
    system: MemorylessSystem,
    experiment: CodingExperiment,
    *,
    thresholds: TypicalityThresholds | None = None,
    mode: str = "auto",
    inner_draws: int = 200,
    pi_draws: int = 10_000,
) -> ExperimentReport:
    """End-to-end trials plus the rho_n bound from estimated pi1/pi2."""
    if thresholds is None:
        thresholds = default_thresholds(system, experiment.gamma1, experiment.gamma2)
    pi = estimate_pi(system, experiment.n, pi_draws, thresholds, seed=experiment.seed)
    total = experiment.message_count * experiment.subcodebook_size
    explicit_ok = total <= CODEWORD_CAP and total * experiment.n <= WORK_CAP
    if mode == "auto":
        mode = "explicit" if explicit_ok else "implicit"
    if mode == "explicit" and not explicit_ok:
        raise BudgetError(
            f"explicit mode needs {total} codewords / {total * experiment.n} work; caps are "
            f"{CODEWORD_CAP} / {WORK_CAP} — reduce n or rates, or use implicit mode"
        )
    if mode == "explicit":
        records, mode_used = _run_explicit(system, experiment, thresholds, pi, inner_draws)
    elif mode == "implicit":
        records, mode_used = _run_implicit(system, experiment, thresholds, pi, inner_draws)
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    errors = sum(not r.ok for r in records)
    terms = rho_bound(pi["pi1"], pi["pi2"], experiment.n, experiment.gamma1, experiment.gamma2)
    converse = experiment.rate > system.i_uy - 2.0 * experiment.gamma1 + 1e-12
    return ExperimentReport(
        trials=tuple(records),
        empirical_error=errors / experiment.trials,
        error_ci=wilson_interval(errors, experiment.trials),
        rho_n=terms["rho_n"],
        rho_terms=terms,
        pi1=pi["pi1"],
        pi2=pi["pi2"],
        mode=mode_used,
        converse_mode=converse,
        diagnostics={"pi": pi, "thresholds": (thresholds.t1, thresholds.t2)},
    )


def write_trial_log(records, path) -> None:
    """RFC-4180 CSV trial log, UTF-8, LF line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "message", "L", "e1", "e2", "e3", "decoded", "ok"])
        for r in records:
            writer.writerow(
                [r.trial, r.message, r.l_index, int(r.e1), int(r.e2), int(r.e3), r.decoded, int(r.ok)]
            )
