"""Information functionals on finite joints and spectral-rate estimators.

Exact mutual-information computations use the 0*log(0/.) = 0 convention.
Spectral inf/sup rates are asymptotic objects; the finite-sample
surrogate used here is a small-exceedance-mass quantile (delta default
0.01), and every result records the delta it was computed with.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DELTA = 0.01


class SampleBudgetError(ValueError):
    """Too few samples for the requested quantile mass."""


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = p[mask] * np.log(p[mask])
    return out


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats."""
    return float(-_xlogx(np.asarray(p, dtype=np.float64)).sum())


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * math.log(p) - (1 - p) * math.log(1 - p))


def mutual_information(joint: np.ndarray) -> float:
    """I(A;B) in nats from a normalized joint over (a, b)."""
    p = np.asarray(joint, dtype=np.float64)
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    mask = p > 0
    # p > 0 forces both marginals positive, but optimizer callers probe
    # near-degenerate joints where the product underflows to 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = p[mask] / (pa[:, None] * pb[None, :])[mask]
        terms = p[mask] * np.log(ratio)
    # an underflowing marginal product means p itself is ~1e-154 or
    # smaller; such cells contribute nothing at float precision
    val = float(terms[np.isfinite(terms)].sum())
    return max(val, 0.0)


def conditional_mutual_information(joint: np.ndarray) -> float:
    """I(A;B|C) in nats from a normalized joint over (a, b, c)."""
    p = np.asarray(joint, dtype=np.float64)
    pc = p.sum(axis=(0, 1))
    total = 0.0
    for c in range(p.shape[2]):
        if pc[c] > 0:
            total += pc[c] * mutual_information(p[:, :, c] / pc[c])
    return max(total, 0.0)


@dataclass(frozen=True)
class DensityTable:
    """Per-symbol values log[p(a|b)/p(a)]; entries with p(a)=0 are undefined.

    Undefined entries occur only on symbols of zero marginal mass, so
    they are never produced by sampling from the joint.
    """

    values: np.ndarray
    defined: np.ndarray


def density_table(joint: np.ndarray) -> DensityTable:
    p = np.asarray(joint, dtype=np.float64)
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    defined = (pa[:, None] > 0) & np.ones_like(p, dtype=bool)
    values = np.full(p.shape, np.nan)
    # p(a|b) = p(a,b)/p(b); log ratio against p(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(pb[None, :] > 0, p / np.where(pb[None, :] > 0, pb[None, :], 1.0), 0.0)
        vals = np.log(cond) - np.log(pa[:, None])
    ok = defined & (pb[None, :] > 0)
    values[ok] = vals[ok]
    # zero-probability pair on positive marginals: density is -inf
    values[ok & (p == 0)] = -np.inf
    defined = defined & (pb[None, :] > 0)
    values[~defined] = np.nan
    return DensityTable(values=values, defined=defined)


def expected_density(joint: np.ndarray, table: DensityTable) -> float:
    """E[table] under the joint; equals mutual_information on valid input."""
    p = np.asarray(joint, dtype=np.float64)
    mask = p > 0
    return float((p[mask] * table.values[mask]).sum())


@dataclass(frozen=True)
class SpectrumSamples:
    """Normalized block information-density draws.

    samples holds finite values only; draws whose density was infinite
    are counted in tail_infinite (they occur with probability zero for
    valid joints, so a nonzero counter indicates a bug upstream).
    """

    samples: np.ndarray
    n: int
    seed: int = 0
    tail_infinite: int = 0
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.size < 1:
            raise SampleBudgetError("SpectrumSamples needs at least one draw")
        if not np.isfinite(s).all():
            raise ValueError("non-finite sample passed; route through tail_infinite")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def count(self) -> int:
        return self.samples.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"# n={self.n} count={self.count} seed={self.seed} delta={self.delta}"])
            writer.writerow(["density_nats"])
            for v in self.samples:
                writer.writerow([repr(float(v))])


def spectral_rate_estimate(samples: SpectrumSamples, mode: str, delta: float = DEFAULT_DELTA) -> float:
    """Finite-sample surrogate of the spectral inf/sup rate.

    inf mode: empirical delta-quantile (order statistic at ceil(delta*count),
    ties toward the smaller value). sup mode: the (1-delta)-quantile,
    mirrored. For i.i.d. memoryless block sums both converge to the
    single-letter mutual information as n grows.
    """
    if mode not in ("inf", "sup"):
        raise ValueError("mode must be 'inf' or 'sup'")
    count = samples.count
    if count < 1.0 / delta:
        raise SampleBudgetError(f"need at least {math.ceil(1/delta)} samples for delta={delta}")
    ordered = np.sort(samples.samples, kind="stable")
    k = math.ceil(delta * count)  # 1-based order statistic
    if mode == "inf":
        return float(ordered[k - 1])
    return float(ordered[count - k])
