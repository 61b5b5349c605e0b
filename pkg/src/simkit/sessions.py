"""Synthetic radio-session records and their statistical descriptors.

A session bundles six periodic measurement series plus a binary release
label (1 = drop). Generated drop sessions superimpose a downward uplink
signal-quality trend and upward retransmission-ratio trends over the final
reports; normal sessions are stationary noise, a minority of them at a low
but stable signal level so plain level statistics do not separate the
classes on their own.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distances import dtw_batch

__all__ = [
    "SERIES_NAMES",
    "SERIES_RANGES",
    "SessionRecord",
    "generate_sessions",
    "describe_session",
    "session_distance_columns",
    "session_distance_blocks",
    "session_column_ids",
    "write_sessions_csv",
    "read_sessions_csv",
]

SERIES_NAMES = ("cqi_avg", "harqnack_dl", "harqnack_ul", "rlc_dl", "rlc_ul", "sinr_pusch")
SERIES_RANGES = {
    "cqi_avg": (1.0, 15.0),
    "harqnack_dl": (0.0, 1.0),
    "harqnack_ul": (0.0, 1.0),
    "rlc_dl": (0.0, 1.0),
    "rlc_ul": (0.0, 1.0),
    "sinr_pusch": (-4.0, 18.0),
}
# reporting granularity used when taking the mode of a series
_MODE_DECIMALS = {"cqi_avg": 0}
_DEFAULT_MODE_DECIMALS = 2

DESCRIPTOR_LENGTH = 60  # 6 series x (5 stats + 5 gradient stats)


@dataclass(frozen=True)
class SessionRecord:
    """Six equal-length measurement series plus the binary release category."""

    series: dict
    label: int
    session_id: str = ""

    def __post_init__(self):
        if set(self.series) != set(SERIES_NAMES):
            raise ValueError(f"session needs exactly the series {SERIES_NAMES}")
        arrays = {}
        length = None
        for name in SERIES_NAMES:
            v = np.asarray(self.series[name], dtype=np.float64)
            if v.ndim != 1 or v.size < 1:
                raise ValueError("each series must be a non-empty 1-d array")
            if length is None:
                length = v.size
            elif v.size != length:
                raise ValueError("all six series must have equal length")
            lo, hi = SERIES_RANGES[name]
            if np.any(v < lo - 1e-9) or np.any(v > hi + 1e-9):
                raise ValueError(f"{name} values outside [{lo}, {hi}]")
            v.setflags(write=False)
            arrays[name] = v
        if self.label not in (0, 1):
            raise ValueError("label must be 0 (no drop) or 1 (drop)")
        object.__setattr__(self, "series", arrays)

    @property
    def length(self) -> int:
        return int(self.series[SERIES_NAMES[0]].size)


def _clip(name: str, values: np.ndarray) -> np.ndarray:
    lo, hi = SERIES_RANGES[name]
    return np.clip(values, lo, hi)


def generate_sessions(n_drop: int, n_normal: int, min_len: int = 15, seed: int = 0) -> list:
    """Deterministically generate labelled synthetic sessions.

    Drops come first, then normals. Every value respects the declared series
    ranges and every series is at least ``min_len`` reports long.
    """
    if n_drop <= 0 or n_normal <= 0:
        raise ValueError("session counts must be positive")
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    rng = np.random.default_rng(seed)
    sessions = []
    for idx in range(n_drop + n_normal):
        is_drop = idx < n_drop
        L = int(min_len + rng.integers(0, 16))
        series = {}
        cqi_base = rng.uniform(6.0, 12.0)
        series["cqi_avg"] = cqi_base + rng.normal(0.0, 1.2, L)
        series["harqnack_dl"] = rng.uniform(0.02, 0.12) + np.abs(rng.normal(0.0, 0.03, L))
        series["harqnack_ul"] = rng.uniform(0.02, 0.12) + np.abs(rng.normal(0.0, 0.03, L))
        series["rlc_dl"] = rng.uniform(0.01, 0.08) + np.abs(rng.normal(0.0, 0.02, L))
        series["rlc_ul"] = rng.uniform(0.02, 0.10) + np.abs(rng.normal(0.0, 0.02, L))
        if is_drop:
            sinr_base = rng.uniform(7.0, 13.0)
            series["sinr_pusch"] = sinr_base + rng.normal(0.0, 1.5, L)
            ramp_len = max(3, int(L * rng.uniform(0.3, 0.6)))
            ramp = np.linspace(0.0, 1.0, ramp_len)
            series["sinr_pusch"][-ramp_len:] -= ramp * rng.uniform(6.0, 12.0)
            series["rlc_ul"][-ramp_len:] += ramp * rng.uniform(0.25, 0.55)
            series["harqnack_ul"][-ramp_len:] += ramp * rng.uniform(0.20, 0.50)
            series["harqnack_dl"][-ramp_len:] += ramp * rng.uniform(0.05, 0.25)
            series["cqi_avg"][-ramp_len:] -= ramp * rng.uniform(1.0, 4.0)
        else:
            lowband = rng.random() < 0.3
            if lowband:
                # stable low-signal sessions: poor level, no degradation trend
                sinr_base = rng.uniform(0.0, 5.0)
                series["rlc_ul"] = series["rlc_ul"] + 0.05
                series["harqnack_ul"] = series["harqnack_ul"] + 0.05
            else:
                sinr_base = rng.uniform(8.0, 14.0)
            series["sinr_pusch"] = sinr_base + rng.normal(0.0, 1.5, L)
        series = {name: _clip(name, v) for name, v in series.items()}
        sessions.append(
            SessionRecord(series, int(is_drop), session_id=f"s{idx:05d}")
        )
    return sessions


def _mode(values: np.ndarray, decimals: int) -> float:
    rounded = np.round(values, decimals)
    vals, counts = np.unique(rounded, return_counts=True)
    return float(vals[np.argmax(counts)])  # ties resolve to the smallest value


def _five_stats(values: np.ndarray, decimals: int) -> list:
    return [
        float(values.min()),
        float(values.max()),
        _mode(values, decimals),
        float(values.mean()),
        float(values.var()),
    ]


def describe_session(session: SessionRecord, truncate_at: int = 0) -> np.ndarray:
    """60-value statistical descriptor of a session.

    The last ``truncate_at`` reports are dropped first. For every series, in
    canonical order: min, max, mode, mean, variance of the values followed by
    the same five statistics of the forward first differences.
    """
    if not 0 <= truncate_at < session.length:
        raise ValueError("truncate_at must be smaller than the series length")
    keep = session.length - truncate_at
    if keep < 2:
        raise ValueError("truncation must leave at least 2 reports")
    out = []
    for name in SERIES_NAMES:
        decimals = _MODE_DECIMALS.get(name, _DEFAULT_MODE_DECIMALS)
        v = session.series[name][:keep]
        out.extend(_five_stats(v, decimals))
        out.extend(_five_stats(np.diff(v), decimals))
    return np.array(out)


def session_column_ids(n_samples: int, modalities=None) -> tuple:
    """Column ids for the per-sample distance layout (sample-major)."""
    mods = tuple(modalities) if modalities is not None else SERIES_NAMES + ("descriptor",)
    return tuple(f"s{i}|{m}" for i in range(n_samples) for m in mods)


def session_distance_blocks(
    sessions,
    targets,
    truncate_at: int = 0,
    threads: int = 1,
    modalities=None,
) -> np.ndarray:
    """Distances of every session to every target session, per modality.

    Returns an array of shape (n_sessions, n_targets, n_modalities) where the
    modalities are the six per-series DTW distances plus the Euclidean
    distance of the 60-value descriptors, in that order (restricted to
    ``modalities`` when given). Truncation applies to both sides.
    """
    sessions = list(sessions)
    targets = list(targets)
    if not sessions or not targets:
        raise ValueError("sessions and targets must be non-empty")
    mods = tuple(modalities) if modalities is not None else SERIES_NAMES + ("descriptor",)
    known = set(SERIES_NAMES) | {"descriptor"}
    for m in mods:
        if m not in known:
            raise ValueError(f"unknown session modality {m!r}")

    def trunc(s: SessionRecord, name: str) -> np.ndarray:
        keep = s.length - truncate_at
        if keep < 1:
            raise ValueError("truncation leaves an empty series")
        return s.series[name][:keep]

    target_series = {
        name: [trunc(t, name) for t in targets] for name in SERIES_NAMES if name in mods
    }
    target_desc = None
    if "descriptor" in mods:
        target_desc = np.vstack([describe_session(t, truncate_at) for t in targets])

    def compute(chunk):
        block = np.empty((len(chunk), len(targets), len(mods)))
        for k, name in enumerate(mods):
            if name == "descriptor":
                desc = np.vstack([describe_session(s, truncate_at) for s in chunk])
                diff = desc[:, None, :] - target_desc[None, :, :]
                block[:, :, k] = np.sqrt(np.sum(diff * diff, axis=2))
            else:
                queries = [trunc(s, name) for s in chunk]
                block[:, :, k] = dtw_batch(queries, target_series[name])
        return block

    if threads <= 1 or len(sessions) < 2 * threads:
        return compute(sessions)
    chunks = np.array_split(np.arange(len(sessions)), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda ix: compute([sessions[i] for i in ix]), chunks))
    return np.concatenate(parts, axis=0)


def session_distance_columns(session: SessionRecord, samples, truncate_at: int = 0) -> np.ndarray:
    """Flat 7|S| distance row for one session, sample-major.

    Per sample: the six DTW distances in canonical series order, then the
    Euclidean distance between the statistical descriptors.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("sample set must be non-empty")
    block = session_distance_blocks([session], samples, truncate_at=truncate_at)
    return block[0].reshape(-1)


def write_sessions_csv(sessions, path) -> None:
    """One row per periodic report: session_id, t_index, the six series, label."""
    with open(path, "w") as fh:
        fh.write("session_id,t_index," + ",".join(SERIES_NAMES) + ",label\n")
        for s in sessions:
            for t in range(s.length):
                values = ",".join(f"{s.series[name][t]:.17g}" for name in SERIES_NAMES)
                fh.write(f"{s.session_id},{t},{values},{s.label}\n")


def read_sessions_csv(path) -> list:
    """Parse the session CSV schema back into records (file order preserved)."""
    order = []
    rows = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        expected = ["session_id", "t_index", *SERIES_NAMES, "label"]
        if header != expected:
            raise ValueError(f"bad session CSV header: expected {expected}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(expected):
                raise ValueError("malformed session CSV row")
            sid = parts[0]
            if sid not in rows:
                rows[sid] = {"t": [], "values": [], "label": int(parts[-1])}
                order.append(sid)
            if int(parts[-1]) != rows[sid]["label"]:
                raise ValueError(f"inconsistent label within session {sid}")
            rows[sid]["t"].append(int(parts[1]))
            rows[sid]["values"].append([float(v) for v in parts[2:-1]])
    sessions = []
    for sid in order:
        rec = rows[sid]
        idx = np.argsort(np.array(rec["t"]), kind="stable")
        values = np.array(rec["values"])[idx]
        series = {name: values[:, k] for k, name in enumerate(SERIES_NAMES)}
        sessions.append(SessionRecord(series, rec["label"], session_id=sid))
    return sessions
