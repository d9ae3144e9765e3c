"""Path generation on a uniform grid.

Brownian drivers, the Skorokhod reflection map, Euler–Maruyama schemes for
step and odd piecewise-constant diffusion coefficients, and the quadratic
time change A_t = ∫ σ²(X_s) ds with its inverse.

All generators are pure functions of (seed, parameters); a `SamplePath` is
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import csv
import io
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .rng import SeedLike, path_stream, substream

PATH_KINDS = ("brownian", "reflected", "sde", "derived")

XPTH_MAGIC = b"XPTH"
XPTH_VERSION = 1
# magic 4s | version u16 | reserved u16 | dt f64 | length u64
_XPTH_HEADER = struct.Struct("<4sHHdQ")


@dataclass(frozen=True)
class SamplePath:
    """A discretized path on the uniform grid t_k = k*dt, starting at t0 = 0.

    `increments` optionally carries the generator's exact step increments
    (values = cumulative sum of increments); schemes consuming the driver use
    them so that identity transformations stay bitwise-exact.
    """

    dt: float
    values: np.ndarray
    seed: SeedLike | None = None
    kind: str = "derived"
    t0: float = 0.0
    increments: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.kind not in PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("values must be a 1-d array of length >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must all be finite")
        if self.kind == "reflected" and v.min() < 0:
            raise ValueError("reflected paths must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.increments is not None:
            inc = np.ascontiguousarray(self.increments, dtype=np.float64)
            if inc.shape != (v.size - 1,):
                raise ValueError("increments must have length len(values) - 1")
            inc.flags.writeable = False
            object.__setattr__(self, "increments", inc)

    def step_increments(self) -> np.ndarray:
        return self.increments if self.increments is not None else np.diff(self.values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def index_at(self, t: float) -> int:
        """Grid index of time t (nearest grid point; t must lie on the grid)."""
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k > self.n_steps:
            raise ValueError(f"time {t} outside path horizon {self.horizon}")
        return k


# ---------------------------------------------------------------------------
# Coefficients


@dataclass(frozen=True)
class StepCoefficient:
    """Two-valued coefficient: a on [0, inf), b on (-inf, 0).

    The right-continuous convention is used throughout: value(0) = a.
    The default regime requires a > 0 > b; `strict=False` admits any
    nonzero pair.
    """

    a: float
    b: float
    strict: bool = True

    def __post_init__(self):
        if self.a == 0 or self.b == 0:
            raise ValueError("step coefficient values must be nonzero")
        if self.strict and not (self.a > 0 > self.b):
            raise ValueError(f"step regime requires a > 0 > b, got ({self.a}, {self.b})")

    def value(self, x) -> np.ndarray:
        return np.where(np.asarray(x, dtype=np.float64) >= 0.0, self.a, self.b)

    def abs_value(self, x) -> np.ndarray:
        return np.abs(self.value(x))

    @property
    def c_min(self) -> float:
        return min(abs(self.a), abs(self.b))

    @property
    def c_max(self) -> float:
        return max(abs(self.a), abs(self.b))

    def jumps(self) -> list[tuple[float, float]]:
        """(location, |jump size|) pairs of the discontinuities."""
        return [(0.0, abs(self.a - self.b))]


@dataclass(frozen=True)
class OddPiecewiseCoefficient:
    """Odd piecewise-constant coefficient.

    |σ(x)| = levels[k] on the k-th band of |x| cut by `breakpoints`, and
    σ(x) = |σ(x)|·sgn(x) with sgn(0) = +1, so σ(0) = levels[0] and
    x·σ(x) >= 0 everywhere.
    """

    breakpoints: tuple[float, ...]
    levels: tuple[float, ...]
    witness_f: object = None  # optional callable witness for the regularity check

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        lv = tuple(float(l) for l in self.levels)
        if len(lv) != len(bp) + 1:
            raise ValueError("need len(levels) == len(breakpoints) + 1")
        if any(b <= 0 for b in bp) or any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be increasing and positive")
        if any(l <= 0 for l in lv):
            raise ValueError("levels must be positive (|σ| bounded away from 0)")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)

    def abs_value(self, x) -> np.ndarray:
        ax = np.abs(np.asarray(x, dtype=np.float64))
        band = np.searchsorted(np.asarray(self.breakpoints), ax, side="right")
        return np.asarray(self.levels)[band]

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        sign = np.where(x >= 0.0, 1.0, -1.0)
        return sign * self.abs_value(x)

    @property
    def c_min(self) -> float:
        return min(self.levels)

    @property
    def c_max(self) -> float:
        return max(self.levels)

    def jumps(self) -> list[tuple[float, float]]:
        locs = []
        lv = self.levels
        bp = self.breakpoints
        for k in range(len(bp)):
            size = abs(lv[k + 1] - lv[k])
            if size > 0:
                locs.append((bp[k], size))
                locs.append((-bp[k], size))
        locs.append((0.0, 2.0 * lv[0]))  # odd extension jumps -l0 -> +l0
        return sorted(locs)


Coefficient = StepCoefficient | OddPiecewiseCoefficient


# ---------------------------------------------------------------------------
# Brownian drivers


def _step_count(horizon: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    n = int(round(horizon / dt))
    if horizon > 0 and n == 0:
        raise ValueError(f"horizon {horizon} is shorter than one step dt={dt}")
    return n


def sample_brownian(seed: SeedLike, horizon: float, dt: float) -> SamplePath:
    """Brownian path from the stream keyed by `seed`.

    Increments are independent N(0, dt); value[0] = 0. Identical
    (seed, horizon, dt) give bitwise-identical output.
    """
    n = _step_count(horizon, dt)
    values = np.zeros(n + 1)
    inc = np.empty(0)
    if n:
        rng = path_stream(seed)
        inc = rng.standard_normal(n) * np.sqrt(dt)
        np.cumsum(inc, out=values[1:])
    return SamplePath(dt=dt, values=values, seed=seed, kind="brownian", increments=inc)


def brownian_ensemble(
    master_seed: SeedLike, n_paths: int, horizon: float, dt: float, first: int = 0
) -> np.ndarray:
    """(n_paths, n_steps+1) matrix of Brownian rows.

    Row i is bitwise-identical to sample_brownian((*master_seed, first + i));
    the per-path keying makes the matrix independent of chunking or worker
    scheduling.
    """
    n = _step_count(horizon, dt)
    out = np.zeros((n_paths, n + 1))
    sq = np.sqrt(dt)
    base = master_seed if isinstance(master_seed, tuple) else (int(master_seed),)
    for i in range(n_paths):
        if n:
            np.cumsum(path_stream(base + (first + i,)).standard_normal(n) * sq,
                      out=out[i, 1:])
    return out


# ---------------------------------------------------------------------------
# Skorokhod reflection


def reflect_values(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Skorokhod map of one or many rows: Y = B - min(0, running min B).

    ell is stored as Y - B (one rounding from -min(0, inf B)); this makes the
    identity Y - B - ell evaluate to exactly zero in floating point.
    """
    runmin = np.minimum(np.minimum.accumulate(b, axis=-1), 0.0)
    y = b - runmin
    return y, y - b


def reflect_skorokhod(B: SamplePath) -> tuple[SamplePath, SamplePath]:
    """Reflected path and its boundary term: Y = B + ell, ell nondecreasing.

    ell grows only where Y sits at 0, and the identity Y - B - ell = 0 holds
    exactly (it is how Y is built).
    """
    if B.values[0] != 0.0:
        raise ValueError("driver must start at 0")
    y, ell = reflect_values(B.values)
    Y = SamplePath(dt=B.dt, values=y, seed=B.seed, kind="reflected")
    L = SamplePath(dt=B.dt, values=ell, seed=B.seed, kind="derived")
    return Y, L


# ---------------------------------------------------------------------------
# Euler schemes


def euler_values(
    sigma: Coefficient,
    b: np.ndarray,
    *,
    reflected: bool = False,
    increments: np.ndarray | None = None,
) -> np.ndarray:
    """Euler–Maruyama recursion driven by the rows of `b` (cumulative driver).

    X_{k+1} = X_k + σ(X_k)(B_{k+1} - B_k); with `reflected` the coefficient's
    absolute value is used and each step is projected onto [0, inf).
    """
    b = np.atleast_2d(b)
    x = np.zeros_like(b)
    db = np.atleast_2d(increments) if increments is not None else np.diff(b, axis=1)
    coef = sigma.abs_value if reflected else sigma.value
    cur = x[:, 0].copy()
    for k in range(db.shape[1]):
        cur = cur + coef(cur) * db[:, k]
        if reflected:
            cur = np.maximum(cur, 0.0)
        x[:, k + 1] = cur
    return x


def euler_sde(sigma: Coefficient, B: SamplePath) -> SamplePath:
    """Euler path of dX = σ(X) dB started at 0, on B's grid."""
    if B.values[0] != 0.0:
        raise ValueError("driver must start at 0")
    x = euler_values(sigma, B.values, increments=B.step_increments())[0]
    return SamplePath(dt=B.dt, values=x, seed=B.seed, kind="sde")


def euler_reflected_sde(sigma_abs: Coefficient, B: SamplePath) -> SamplePath:
    """Projected Euler path of dY = |σ(Y)| dB + boundary, kept on [0, inf).

    The projection max(·, 0) accumulates the boundary term implicitly
    (ell = Y - Σ|σ(Y_k)|ΔB_k); with |σ| ≡ 1 the recursion coincides with the
    Skorokhod map of B up to roundoff.
    """
    if sigma_abs.c_min <= 0:
        raise ValueError("|σ| must be bounded below away from 0")
    if B.values[0] != 0.0:
        raise ValueError("driver must start at 0")
    y = euler_values(sigma_abs, B.values, reflected=True,
                     increments=B.step_increments())[0]
    return SamplePath(dt=B.dt, values=y, seed=B.seed, kind="reflected")


def boundary_term(Y: SamplePath, sigma_abs: Coefficient, B: SamplePath) -> np.ndarray:
    """Boundary increment accumulated by the projected scheme: Y - ∫|σ(Y)|dB."""
    db = B.step_increments()
    inc = sigma_abs.abs_value(Y.values[:-1]) * db
    return Y.values - np.concatenate([[0.0], np.cumsum(inc)])


# ---------------------------------------------------------------------------
# Time change


@dataclass(frozen=True)
class TimeChange:
    """A_t = ∫₀ᵗ σ²(X_s) ds on the source grid, with piecewise-linear inverse."""

    A: np.ndarray
    source_dt: float

    def __post_init__(self):
        a = np.ascontiguousarray(self.A, dtype=np.float64)
        if a[0] != 0.0 or np.any(np.diff(a) <= 0):
            raise ValueError("A must start at 0 and be strictly increasing")
        a.flags.writeable = False
        object.__setattr__(self, "A", a)

    @property
    def total(self) -> float:
        return float(self.A[-1])

    def forward(self, t) -> np.ndarray:
        """A evaluated at source times t by linear interpolation."""
        src = self.source_dt * np.arange(self.A.size)
        return np.interp(t, src, self.A)

    def alpha(self, s) -> np.ndarray:
        """Inverse map α(s) = inf{t : A_t > s}, linearly interpolated."""
        src = self.source_dt * np.arange(self.A.size)
        return np.interp(s, self.A, src)


def time_change(X: SamplePath, sigma: Coefficient) -> TimeChange:
    """Quadratic-variation clock of X under σ (left-endpoint rule)."""
    if sigma.c_min <= 0:
        raise ValueError("|σ| must be bounded below away from 0")
    rate = np.asarray(sigma.value(X.values[:-1]), dtype=np.float64) ** 2
    a = np.concatenate([[0.0], np.cumsum(rate * X.dt)])
    return TimeChange(A=a, source_dt=X.dt)


def apply_time_change(X: SamplePath, tc: TimeChange, target_dt: float) -> SamplePath:
    """Resample X on the target grid through α: X̃_s = X(α(s)).

    A target grid reaching beyond A's range is truncated with a warning.
    """
    if target_dt <= 0:
        raise ValueError("target_dt must be positive")
    if tc.A.size != X.values.size:
        raise ValueError("time change was not derived from this path's grid")
    n_target = int(np.floor(tc.total / target_dt + 1e-12))
    requested = int(round(X.horizon / X.dt))  # heuristic request: same sample count
    if n_target < requested:
        warnings.warn(
            f"target grid truncated to {n_target} steps (A range {tc.total:.6g})",
            RuntimeWarning,
            stacklevel=2,
        )
    s = target_dt * np.arange(n_target + 1)
    src_times = tc.alpha(s)
    vals = np.interp(src_times, X.dt * np.arange(X.values.size), X.values)
    return SamplePath(dt=target_dt, values=vals, seed=X.seed, kind="derived")


# ---------------------------------------------------------------------------
# Serialization


def write_csv(path: SamplePath, fp) -> None:
    """CSV columns (t, value) with a header comment carrying dt/seed/kind."""
    fp.write(f"# exlab-path kind={path.kind} dt={path.dt!r} seed={path.seed!r}\n")
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["t", "value"])
    for t, v in zip(path.times(), path.values):
        writer.writerow([repr(float(t)), repr(float(v))])


def read_csv(fp) -> SamplePath:
    header = fp.readline()
    meta = {}
    if header.startswith("#"):
        for tok in header[1:].split():
            if "=" in tok:
                k, _, v = tok.partition("=")
                meta[k] = v
    else:
        fp = io.StringIO(header + fp.read())
    rows = list(csv.reader(fp))
    if rows and rows[0][:1] == ["t"]:
        rows = rows[1:]
    ts = np.array([float(r[0]) for r in rows])
    vals = np.array([float(r[1]) for r in rows])
    if "dt" in meta:
        dt = float(meta["dt"])
    elif ts.size > 1:
        dt = float(ts[1] - ts[0])
    else:
        raise ValueError("cannot infer dt from a single-row csv without metadata")
    kind = meta.get("kind", "derived")
    return SamplePath(dt=dt, values=vals, kind=kind if kind in PATH_KINDS else "derived")


def write_xpth(path: SamplePath, fp) -> None:
    """Binary column format: little-endian f64 samples after a fixed header."""
    fp.write(_XPTH_HEADER.pack(XPTH_MAGIC, XPTH_VERSION, 0, path.dt, len(path)))
    fp.write(path.values.astype("<f8").tobytes())


def read_xpth(fp) -> SamplePath:
    raw = fp.read(_XPTH_HEADER.size)
    magic, version, _, dt, length = _XPTH_HEADER.unpack(raw)
    if magic != XPTH_MAGIC:
        raise ValueError("not an XPTH file")
    if version != XPTH_VERSION:
        raise ValueError(f"unsupported XPTH version {version}")
    vals = np.frombuffer(fp.read(8 * length), dtype="<f8", count=length)
    return SamplePath(dt=dt, values=vals.copy(), kind="derived")
