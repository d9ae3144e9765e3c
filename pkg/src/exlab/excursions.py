"""Zero sets, excursion intervals and their labelings.

An excursion interval of a nonnegative grid path is a maximal open time
interval on which the path stays above the zero tolerance. Intervals carry a
two-level label (epoch, rank): epochs are cut at the first return to zero at
least one time unit after the previous cut, and within an epoch intervals are
ranked longest first, ties broken by the smaller left endpoint. Two
alternative labelings (a dyadic probe numbering and bucketing by length) and
conversions between all three are provided; they are interchangeable as
carriers of per-interval data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .paths import SamplePath


class InternalInconsistencyError(RuntimeError):
    """An interval straddles an epoch boundary; impossible for zero-cut epochs."""


@dataclass(frozen=True)
class ExcursionInterval:
    g: float
    d: float
    epoch: int
    rank: int

    def __post_init__(self):
        if not (0 <= self.g < self.d):
            raise ValueError(f"need 0 <= g < d, got ({self.g}, {self.d})")

    @property
    def length(self) -> float:
        return self.d - self.g

    def contains(self, t: float) -> bool:
        return self.g < t < self.d  # open interval

    def key(self) -> tuple[int, int]:
        return (self.epoch, self.rank)


@dataclass(frozen=True)
class ExcursionIndexing:
    """All labeled intervals of one path plus the epoch boundaries that cut them."""

    xi: np.ndarray  # epoch boundary times, xi[0] = 0
    intervals: tuple[ExcursionInterval, ...]
    delta_min: float
    tol: float
    discarded: int = 0  # intervals shorter than delta_min
    discarded_time: float = 0.0

    def __post_init__(self):
        x = np.ascontiguousarray(self.xi, dtype=np.float64)
        x.flags.writeable = False
        object.__setattr__(self, "xi", x)
        object.__setattr__(self, "intervals", tuple(self.intervals))

    def by_key(self) -> dict[tuple[int, int], ExcursionInterval]:
        return {iv.key(): iv for iv in self.intervals}

    def ref(self) -> str:
        """Content hash identifying this indexing (used to pin sign choices)."""
        h = hashlib.sha256()
        h.update(self.xi.tobytes())
        for iv in self.intervals:
            h.update(np.float64([iv.g, iv.d]).tobytes())
            h.update(iv.epoch.to_bytes(8, "little"))
            h.update(iv.rank.to_bytes(8, "little"))
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class Excursion:
    """One excursion: its interval and the path restricted to [g, d], time-shifted to 0."""

    interval: ExcursionInterval
    samples: np.ndarray
    dt: float
    sign: int | None = None

    @property
    def length(self) -> float:
        return self.interval.length

    def definite_sign(self) -> int:
        """Sign of the interior samples; mixed interiors are invalid."""
        if self.sign is not None:
            return self.sign
        interior = self.samples[1:-1] if self.samples.size > 2 else self.samples
        pos = np.any(interior > 0)
        neg = np.any(interior < 0)
        if pos and neg:
            raise ValueError("excursion has mixed interior signs")
        return -1 if neg else 1


# ---------------------------------------------------------------------------
# Extraction


def zero_set(Y: SamplePath, tol: float = 0.0) -> np.ndarray:
    """Grid indices where Y <= tol."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return np.flatnonzero(Y.values <= tol)


def runs_from_mask(nonzero: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (gi, di) of maximal True runs, widened to the flanking zeros.

    gi is the zero index left of the run (clamped to 0 when the mask starts
    True); di is the zero index right of it, or the last index for a run
    still open at the horizon.
    """
    if not nonzero.any():
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    edges = np.diff(nonzero.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1) + 1
    if nonzero[0]:
        starts = np.concatenate([[0], starts])
    if nonzero[-1]:
        ends = np.concatenate([ends, [nonzero.size - 1]])
    return np.maximum(starts - 1, 0).astype(np.int64), ends.astype(np.int64)


def excursion_intervals(
    Y: SamplePath, tol: float = 0.0, delta_min: float = 0.0
) -> tuple[list[tuple[float, float]], int]:
    """Maximal intervals with Y > tol, dropping those shorter than delta_min.

    Returns (intervals, number discarded).
    """
    gi, di = runs_from_mask(Y.values > tol)
    dt = Y.dt
    keep = (di - gi) * dt >= delta_min
    kept = [(g * dt, d * dt) for g, d in zip(gi[keep], di[keep])]
    return kept, int((~keep).sum())


def _epoch_boundaries(zero_times: np.ndarray, unit: float) -> np.ndarray:
    if unit <= 0:
        raise ValueError("epoch unit must be positive")
    if zero_times.size == 0 or zero_times[0] != 0:
        raise ValueError("path must start in the zero set")
    xi = [0.0]
    while True:
        j = np.searchsorted(zero_times, xi[-1] + unit * (1 - 1e-12))
        if j >= zero_times.size:
            break
        xi.append(float(zero_times[j]))
    return np.array(xi)


def epoch_partition(Y: SamplePath, zero: np.ndarray, unit: float = 1.0) -> np.ndarray:
    """Epoch boundaries: xi_0 = 0, xi_{i+1} = first zero time >= xi_i + unit.

    Stops at the horizon; the final epoch is left open. Y must start at 0
    (index 0 must be in the zero set).
    """
    return _epoch_boundaries(np.asarray(zero) * Y.dt, unit)


@dataclass(frozen=True)
class LabeledRuns:
    """Array view of one path's labeled excursions (fast path for ensembles)."""

    gi: np.ndarray  # left zero index of each kept run
    di: np.ndarray  # right zero index (or last index when open)
    epoch: np.ndarray
    rank: np.ndarray
    xi: np.ndarray  # epoch boundary times
    dropped: int
    dropped_time: float

    @property
    def lengths_idx(self) -> np.ndarray:
        return self.di - self.gi


def labeled_runs(
    y: np.ndarray,
    dt: float,
    tol: float = 0.0,
    delta_min: float = 0.0,
    unit: float = 1.0,
    nonzero: np.ndarray | None = None,
) -> LabeledRuns:
    """Extract and label the excursion runs of a nonnegative sample row.

    `nonzero` overrides the y > tol mask (used when extra zero witnesses such
    as sign crossings are known).
    """
    mask = (y > tol) if nonzero is None else nonzero
    gi, di = runs_from_mask(mask)
    keep = (di - gi) * dt >= delta_min
    dropped = int((~keep).sum())
    dropped_time = float(((di - gi) * dt)[~keep].sum())
    gi, di = gi[keep], di[keep]
    zero_times = np.flatnonzero(~mask) * dt
    xi = _epoch_boundaries(zero_times, unit)
    if gi.size:
        epoch = np.searchsorted(xi, gi * dt, side="right").astype(np.int64)
        bounded = epoch < xi.size
        if np.any(di[bounded] * dt > xi[epoch[bounded]] + 1e-9 * max(dt, 1.0)):
            raise InternalInconsistencyError("interval straddles an epoch boundary")
        rank = np.zeros(gi.size, dtype=np.int64)
        lengths = di - gi
        for e in np.unique(epoch):
            idx = np.flatnonzero(epoch == e)
            order = np.lexsort((gi[idx], -lengths[idx]))
            rank[idx[order]] = np.arange(1, idx.size + 1)
    else:
        epoch = np.empty(0, dtype=np.int64)
        rank = np.empty(0, dtype=np.int64)
    return LabeledRuns(
        gi=gi, di=di, epoch=epoch, rank=rank, xi=xi, dropped=dropped, dropped_time=dropped_time
    )


def order_excursions(
    intervals: list[tuple[float, float]],
    xi: np.ndarray,
    delta_min: float = 0.0,
    tol: float = 0.0,
    discarded: int = 0,
) -> ExcursionIndexing:
    """Assign (epoch, rank) labels: rank orders by length descending, then left endpoint."""
    xi = np.asarray(xi, dtype=np.float64)
    if intervals:
        g = np.array([iv[0] for iv in intervals])
        d = np.array([iv[1] for iv in intervals])
        epoch = np.searchsorted(xi, g, side="right").astype(np.int64)
        # interval must sit inside (xi_{e-1}, xi_e); the right bound is open-ended
        # for the final epoch
        bounded = epoch < xi.size
        if np.any(d[bounded] > xi[epoch[bounded]] + 1e-9):
            raise InternalInconsistencyError("interval straddles an epoch boundary")
    else:
        g = d = np.empty(0)
        epoch = np.empty(0, dtype=np.int64)

    out: list[ExcursionInterval] = []
    for e in np.unique(epoch):
        idx = np.flatnonzero(epoch == e)
        order = np.lexsort((g[idx], -(d[idx] - g[idx])))
        for rank, j in enumerate(idx[order], start=1):
            out.append(ExcursionInterval(g=float(g[j]), d=float(d[j]), epoch=int(e), rank=rank))
    out.sort(key=lambda iv: iv.g)
    return ExcursionIndexing(
        xi=xi, intervals=tuple(out), delta_min=delta_min, tol=tol, discarded=discarded
    )


def indexing_from_runs(runs: LabeledRuns, dt: float, tol: float, delta_min: float) -> ExcursionIndexing:
    intervals = tuple(
        ExcursionInterval(g=float(g * dt), d=float(d * dt), epoch=int(e), rank=int(r))
        for g, d, e, r in zip(runs.gi, runs.di, runs.epoch, runs.rank)
    )
    return ExcursionIndexing(
        xi=runs.xi,
        intervals=intervals,
        delta_min=delta_min,
        tol=tol,
        discarded=runs.dropped,
        discarded_time=runs.dropped_time,
    )


def extract_indexing(
    Y: SamplePath, tol: float = 0.0, delta_min: float = 0.0, unit: float = 1.0
) -> ExcursionIndexing:
    """Full pipeline: zero set -> intervals -> epochs -> ordered indexing."""
    runs = labeled_runs(Y.values, Y.dt, tol=tol, delta_min=delta_min, unit=unit)
    return indexing_from_runs(runs, Y.dt, tol, delta_min)


def straddling(Y: SamplePath, indexing: ExcursionIndexing, t: float) -> Excursion | None:
    """The excursion whose open interval contains t, or None on the zero set."""
    if t < 0 or t > Y.horizon:
        raise ValueError(f"t={t} outside [0, {Y.horizon}]")
    for iv in indexing.intervals:
        if iv.contains(t):
            return excursion_of(Y, iv)
    return None


def excursion_of(Y: SamplePath, interval: ExcursionInterval, sign: int | None = None) -> Excursion:
    gi = int(round(interval.g / Y.dt))
    di = int(round(interval.d / Y.dt))
    return Excursion(interval=interval, samples=Y.values[gi : di + 1].copy(), dt=Y.dt, sign=sign)


# ---------------------------------------------------------------------------
# Scaling


def scale_excursion(e: Excursion, a: float, b: float) -> Excursion:
    """Space-time scaling: value/|c| and time/c², c = a for positive, b for negative.

    Resampled on the source grid by linear interpolation; the left endpoint is
    kept so tie-breaking by position survives scaling.
    """
    if a == 0 or b == 0:
        raise ValueError("coefficients must be nonzero")
    c = a if e.definite_sign() > 0 else b
    new_len = e.length / c**2
    n = max(int(round(new_len / e.dt)), 1)
    u = e.dt * np.arange(n + 1)
    src_t = e.dt * np.arange(e.samples.size)
    vals = np.interp(np.minimum(c**2 * u, src_t[-1]), src_t, e.samples) / abs(c)
    iv = ExcursionInterval(
        g=e.interval.g, d=e.interval.g + new_len, epoch=e.interval.epoch, rank=e.interval.rank
    )
    return Excursion(interval=iv, samples=vals, dt=e.dt, sign=e.sign)


# ---------------------------------------------------------------------------
# Alternative labelings


def _probe_stage(m: int) -> list[float]:
    if m == 1:
        return [1.0]
    step = 2.0 ** (1 - m)
    probes = [k * step for k in range(1, int(np.ceil(m / step)), 2) if k * step < m]
    probes.append(float(m))
    return probes


def dyadic_probes():
    """The probe sequence 1, 1/2, 3/2, 2, 1/4, 3/4, ..., 11/4, 3, ... (lazy).

    Stage 1 yields 1; stage m >= 2 yields the odd multiples of 2^(1-m) below m,
    then m itself.
    """
    m = 1
    while True:
        yield from _probe_stage(m)
        m += 1


def label_ito_mckean(
    intervals: list[tuple[float, float]], min_spacing: float = 0.0
) -> tuple[dict[tuple[float, float], int], int]:
    """Number intervals by the first dyadic probe landing inside them.

    Probes in already-numbered intervals (or in none) are skipped. Probing
    runs deep enough to separate every interval no shorter than `min_spacing`
    (default: the shortest interval present); anything still unlabeled is
    returned as a count. Returns the (interval -> n) map and that count.
    """
    ivs = sorted({(float(g), float(d)) for g, d in intervals})
    labels: dict[tuple[float, float], int] = {}
    if not ivs:
        return labels, 0
    gs = [iv[0] for iv in ivs]
    labeled = [False] * len(ivs)
    max_d = max(d for _, d in ivs)
    resolution = min_spacing if min_spacing > 0 else min(d - g for g, d in ivs)
    # an interval of length L contains an odd multiple of any step <= L/2
    m_fine = int(np.ceil(1 - np.log2(max(resolution / 2, 1e-15))))
    m_last = max(int(np.ceil(max_d)) + 1, m_fine, 1)
    n = 1
    remaining = len(ivs)
    for m in range(1, m_last + 1):
        for probe in _probe_stage(m):
            j = np.searchsorted(gs, probe, side="right") - 1
            if j >= 0 and not labeled[j] and ivs[j][0] < probe < ivs[j][1]:
                labels[ivs[j]] = n
                labeled[j] = True
                n += 1
                remaining -= 1
                if remaining == 0:
                    return labels, 0
    return labels, remaining


def label_blumenthal(
    intervals: list[tuple[float, float]],
) -> dict[tuple[float, float], tuple[int, int]]:
    """Bucket by length into (1/n, 1/(n-1)], rank left to right within a bucket.

    The n = 1 bucket is (1, inf]; the buckets are left-open, so a length of
    exactly 1/n falls in bucket n+1.
    """
    labels: dict[tuple[float, float], tuple[int, int]] = {}
    buckets: dict[int, list[tuple[float, float]]] = {}
    for g, d in intervals:
        length = d - g
        n = int(np.floor(1.0 / length + 1e-12)) + 1 if length <= 1.0 else 1
        buckets.setdefault(n, []).append((g, d))
    for n, ivs in buckets.items():
        for k, iv in enumerate(sorted(ivs), start=1):
            labels[iv] = (n, k)
    return labels


def relabel(labels_a: dict, labels_b: dict) -> dict:
    """Bijection label_a -> label_b through the shared intervals."""
    if set(labels_a) != set(labels_b):
        raise ValueError("labelings cover different interval sets")
    return {labels_a[iv]: labels_b[iv] for iv in labels_a}


# ---------------------------------------------------------------------------
# Serialization


def indexing_to_json(indexing: ExcursionIndexing) -> str:
    doc = {
        "xi": [float(x) for x in indexing.xi],
        "intervals": [
            {"g": iv.g, "d": iv.d, "epoch": iv.epoch, "rank": iv.rank}
            for iv in indexing.intervals
        ],
        "delta_min": indexing.delta_min,
        "tol": indexing.tol,
        "discarded": indexing.discarded,
    }
    return json.dumps(doc)


def indexing_from_json(text: str) -> ExcursionIndexing:
    doc = json.loads(text)
    intervals = tuple(
        ExcursionInterval(g=iv["g"], d=iv["d"], epoch=iv["epoch"], rank=iv["rank"])
        for iv in doc["intervals"]
    )
    return ExcursionIndexing(
        xi=np.array(doc["xi"]),
        intervals=intervals,
        delta_min=doc["delta_min"],
        tol=doc["tol"],
        discarded=doc.get("discarded", 0),
    )


def indexing_to_csv(indexing: ExcursionIndexing, fp) -> None:
    fp.write("g,d,epoch,rank,length\n")
    for iv in indexing.intervals:
        fp.write(f"{iv.g!r},{iv.d!r},{iv.epoch},{iv.rank},{iv.length!r}\n")
