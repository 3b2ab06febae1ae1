"""Loading system descriptions from JSON spec files.

One spec file describes one system; the "kind" key discriminates the
variants. Probability rows off by more than 1e-9 are rejected with the
offending key named; rows off by at most 1e-9 are renormalized.

kinds:
  system        — "state_pmf", "channel" [s][x][y], optional "policy"
                  ({"u_given_s": rows, "g": [u][s]}), optional scalars
                  ("u_size", "gamma1", "gamma2", "rate", "rate_scale",
                  "side_information": encoder|both|none)
  mixture       — "channel_mixture": [{"weight", "channel"}],
                  "state_mixture": [{"weight", "state_pmf"}], optional
                  shared "policy"
  j-structured  — "channels": {"a","b","c"}, "states": {"a","b"},
                  optional "n_max"
"""

from __future__ import annotations

import json

import numpy as np

from .mixture import MixtureSpec
from .prob import ChannelKernel, ConditionalPmf, GPPolicy, Pmf

ROW_TOL = 1e-9


class SpecError(ValueError):
    """Malformed spec file; the message names the offending key."""


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise SpecError(f"{context}: missing key {key!r}")
    return obj[key]


def _normalize_rows(arr: np.ndarray, context: str) -> np.ndarray:
    """Validate the trailing axis as pmf rows, renormalizing tiny drift."""
    if (arr < 0).any():
        raise SpecError(f"{context}: negative probability entry")
    sums = arr.sum(axis=-1)
    if np.abs(sums - 1.0).max() > ROW_TOL:
        bad = np.unravel_index(int(np.abs(sums - 1.0).argmax()), sums.shape) if sums.ndim else ()
        raise SpecError(
            f"{context}: row {bad} sums to {sums.max() if sums.ndim == 0 else sums[bad]:.12g}, "
            f"off by more than {ROW_TOL:g}"
        )
    return arr / sums[..., None]


def parse_pmf(obj, context: str) -> Pmf:
    try:
        arr = np.asarray(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{context}: not a numeric vector ({exc})") from exc
    if arr.ndim != 1:
        raise SpecError(f"{context}: pmf must be a flat vector")
    return Pmf(_normalize_rows(arr, context))


def parse_channel(obj, context: str) -> ChannelKernel:
    try:
        arr = np.asarray(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{context}: not a numeric array ({exc})") from exc
    if arr.ndim != 3:
        raise SpecError(f"{context}: channel must be a 3-deep array [s][x][y]")
    return ChannelKernel(_normalize_rows(arr, context))


def parse_policy(obj: dict, context: str) -> GPPolicy:
    rows = np.asarray(_require(obj, "u_given_s", context), dtype=np.float64)
    if rows.ndim != 2:
        raise SpecError(f"{context}.u_given_s: must be a matrix of rows per state")
    g = np.asarray(_require(obj, "g", context))
    if g.ndim != 2 or not np.issubdtype(g.dtype, np.integer):
        raise SpecError(f"{context}.g: must be an integer table [u][s]")
    # spec rows are per-state; GPPolicy stores them the same way
    return GPPolicy(u_given_s=ConditionalPmf(_normalize_rows(rows, f"{context}.u_given_s")), x_map=g.astype(np.int64))


def load_spec(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SpecError(f"{path}: top level must be an object")
    kind = _require(raw, "kind", str(path))
    out = {"kind": kind, "raw": raw}
    if kind == "system":
        out["state"] = parse_pmf(_require(raw, "state_pmf", "system"), "state_pmf")
        out["channel"] = parse_channel(_require(raw, "channel", "system"), "channel")
        if "policy" in raw:
            out["policy"] = parse_policy(raw["policy"], "policy")
        for key in ("u_size", "gamma1", "gamma2", "rate", "rate_scale", "side_information", "v_size", "rd_grid"):
            if key in raw:
                out[key] = raw[key]
    elif kind == "mixture":
        chans = _require(raw, "channel_mixture", "mixture")
        states = _require(raw, "state_mixture", "mixture")
        out["mixture"] = MixtureSpec(
            channel_components=tuple(
                (float(_require(c, "weight", f"channel_mixture[{i}]")),
                 parse_channel(_require(c, "channel", f"channel_mixture[{i}]"), f"channel_mixture[{i}].channel"))
                for i, c in enumerate(chans)
            ),
            state_components=tuple(
                (float(_require(c, "weight", f"state_mixture[{i}]")),
                 parse_pmf(_require(c, "state_pmf", f"state_mixture[{i}]"), f"state_mixture[{i}].state_pmf"))
                for i, c in enumerate(states)
            ),
        )
        if "policy" in raw:
            out["policy"] = parse_policy(raw["policy"], "policy")
        if "u_size" in raw:
            out["u_size"] = raw["u_size"]
    elif kind == "j-structured":
        chans = _require(raw, "channels", "j-structured")
        states = _require(raw, "states", "j-structured")
        out["channels"] = {k: parse_channel(v, f"channels.{k}") for k, v in chans.items()}
        out["states"] = {k: parse_pmf(v, f"states.{k}").probs for k, v in states.items()}
        for key in ("n_max", "u_size"):
            if key in raw:
                out[key] = raw[key]
    else:
        raise SpecError(f"{path}: unknown kind {kind!r}")
    return out
