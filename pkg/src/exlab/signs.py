"""Sign choices over excursion intervals and the signed-path constructions.

An i.i.d. sign choice attaches a ±1 label to every labeled excursion interval
of a nonnegative path, drawn Bernoulli(p) from a stream keyed by
(seed, epoch, rank) — so the labels are independent of the path's values by
construction and reproducible under any extraction order. The constructions
here assemble signed solutions X = σ_{a,b}(U)·Y (step coefficient) and
X = U·Y (odd coefficient), skew paths with an arbitrary up-probability, and
the inverse direction: reading a sign choice back out of a signed path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import excursions as exc
from .paths import (
    Coefficient,
    OddPiecewiseCoefficient,
    SamplePath,
    StepCoefficient,
    euler_reflected_sde,
    reflect_skorokhod,
)
from .rng import keyed_sign


def sigma_step(a: float, b: float, x) -> np.ndarray | float:
    """Step function: a on [0, inf), b on (-inf, 0); right-continuous at 0."""
    out = np.where(np.asarray(x, dtype=np.float64) >= 0.0, float(a), float(b))
    return out if out.ndim else float(out)


def phi_map(a: float, b: float, x) -> np.ndarray | float:
    """Piecewise-linear map x/a on [0, inf), x/b on (-inf, 0).

    Continuous at 0; injective when a·b > 0 and two-to-one onto [0, inf)
    when a > 0 > b.
    """
    if a == 0 or b == 0:
        raise ValueError("phi_map requires nonzero a and b")
    xv = np.asarray(x, dtype=np.float64)
    out = np.where(xv >= 0.0, xv / a, xv / b)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SignChoice:
    """±1 per labeled interval; +1 drawn with probability p."""

    assignment: dict[tuple[int, int], int]
    p: float
    seed: int | None
    indexing_ref: str

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        bad = [k for k, s in self.assignment.items() if s not in (-1, 1)]
        if bad:
            raise ValueError(f"signs must be ±1, offending keys {bad[:3]}")

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "p": self.p,
                "seed": self.seed,
                "indexing_ref": self.indexing_ref,
                "assignment": [
                    {"epoch": e, "rank": r, "sign": s}
                    for (e, r), s in sorted(self.assignment.items())
                ],
            }
        )

    @staticmethod
    def from_json(text: str) -> "SignChoice":
        import json

        doc = json.loads(text)
        return SignChoice(
            assignment={(it["epoch"], it["rank"]): it["sign"] for it in doc["assignment"]},
            p=doc["p"],
            seed=doc["seed"],
            indexing_ref=doc["indexing_ref"],
        )


@dataclass(frozen=True)
class SignedPath:
    """A signed solution with its sign process and nonnegative backbone."""

    X: SamplePath
    U: SamplePath
    Y: SamplePath
    coefficient: Coefficient | None = None
    choice: SignChoice | None = None
    indexing: exc.ExcursionIndexing | None = None

    def export_csv(self, fp) -> None:
        fp.write(f"# exlab-signed dt={self.X.dt!r} seed={self.X.seed!r}\n")
        fp.write("t,X,U,Y\n")
        for t, x, u, y in zip(self.X.times(), self.X.values, self.U.values, self.Y.values):
            fp.write(f"{t!r},{x!r},{int(u)},{y!r}\n")


def make_iid_sign_choice(
    indexing: exc.ExcursionIndexing, p: float, seed: int
) -> SignChoice:
    """Draw i.i.d. ±1 labels (+1 w.p. p) keyed by (seed, epoch, rank)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    keys = [iv.key() for iv in indexing.intervals]
    if keys:
        epochs = np.array([k[0] for k in keys])
        ranks = np.array([k[1] for k in keys])
        signs = keyed_sign(seed, epochs, ranks, p)
        assignment = {k: int(s) for k, s in zip(keys, signs)}
    else:
        assignment = {}
    return SignChoice(assignment=assignment, p=p, seed=seed, indexing_ref=indexing.ref())


def _interior_slices(y: np.ndarray, gi: int, di: int, tol: float) -> tuple[int, int]:
    start = gi if y[gi] > tol else gi + 1
    end = di if y[di] > tol else di - 1
    return start, end


def sign_values(
    y: np.ndarray,
    dt: float,
    sign_seed: int,
    p: float,
    tol: float = 0.0,
    unit: float = 1.0,
) -> tuple[np.ndarray, exc.LabeledRuns, np.ndarray]:
    """Fast path: U row for a reflected sample row, plus its labeled runs and signs."""
    runs = exc.labeled_runs(y, dt, tol=tol, delta_min=0.0, unit=unit)
    u = np.ones(y.size, dtype=np.float64)
    signs = keyed_sign(sign_seed, runs.epoch, runs.rank, p) if runs.gi.size else np.empty(0, np.int8)
    for g, d, s in zip(runs.gi, runs.di, signs):
        if s < 0:
            lo, hi = _interior_slices(y, int(g), int(d), tol)
            u[lo : hi + 1] = -1.0
    return u, runs, signs


def sign_process(
    choice: SignChoice, indexing: exc.ExcursionIndexing, like: SamplePath
) -> SamplePath:
    """The process view U_t: the interval's sign in its interior, +1 elsewhere."""
    if choice.indexing_ref != indexing.ref():
        raise ValueError("sign choice was drawn against a different indexing")
    u = np.ones(len(like), dtype=np.float64)
    y = like.values
    for iv in indexing.intervals:
        s = choice.assignment.get(iv.key())
        if s is not None and s < 0:
            gi = int(round(iv.g / like.dt))
            di = int(round(iv.d / like.dt))
            lo, hi = _interior_slices(y, gi, di, indexing.tol)
            u[lo : hi + 1] = -1.0
    return SamplePath(dt=like.dt, values=u, seed=like.seed, kind="derived")


def construct_theorem1(
    B: SamplePath, a: float, b: float, sign_seed: int, unit: float = 1.0
) -> SignedPath:
    """Signed solution X = σ_{a,b}(U)·Y for the step coefficient, a > 0 > b.

    Y is the Skorokhod reflection of B and U an i.i.d. sign choice taking +1
    with probability b/(b-a); phi_map(a, b, X) reproduces Y.
    """
    if not (a > 0 > b):
        raise ValueError(f"step construction requires a > 0 > b, got ({a}, {b})")
    p = b / (b - a)
    Y, _ = reflect_skorokhod(B)
    indexing = exc.extract_indexing(Y, tol=0.0, delta_min=0.0, unit=unit)
    choice = make_iid_sign_choice(indexing, p, sign_seed)
    U = sign_process(choice, indexing, Y)
    x = np.where(U.values >= 0.0, a, b) * Y.values
    X = SamplePath(dt=B.dt, values=x, seed=B.seed, kind="sde")
    return SignedPath(
        X=X, U=U, Y=Y, coefficient=StepCoefficient(a, b), choice=choice, indexing=indexing
    )


def construct_theorem2(
    B: SamplePath, sigma: OddPiecewiseCoefficient, sign_seed: int, unit: float = 1.0
) -> SignedPath:
    """Signed solution X = U·Y for an odd piecewise-constant coefficient.

    Y solves the reflected equation driven by |σ| and U is a fair i.i.d. sign
    choice (p = 1/2); |X| = Y holds exactly.
    """
    if not isinstance(sigma, OddPiecewiseCoefficient):
        raise ValueError("construction requires an odd piecewise-constant coefficient")
    if sigma.c_min <= 0:
        raise ValueError("|σ| must be bounded below away from 0")
    Y = euler_reflected_sde(sigma, B)
    indexing = exc.extract_indexing(Y, tol=0.0, delta_min=0.0, unit=unit)
    choice = make_iid_sign_choice(indexing, 0.5, sign_seed)
    U = sign_process(choice, indexing, Y)
    X = SamplePath(dt=B.dt, values=U.values * Y.values, seed=B.seed, kind="sde")
    return SignedPath(X=X, U=U, Y=Y, coefficient=sigma, choice=choice, indexing=indexing)


def skew_bm(B: SamplePath, alpha: float, seed: int, unit: float = 1.0) -> SamplePath:
    """Skew path: reflect B, then flip each excursion down with probability 1-alpha.

    alpha = 1 returns the reflected path itself; alpha = 1/2 is Brownian in law.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    Y, _ = reflect_skorokhod(B)
    u, _, _ = sign_values(Y.values, Y.dt, seed, alpha, unit=unit)
    return SamplePath(dt=B.dt, values=u * Y.values, seed=B.seed, kind="sde")


# ---------------------------------------------------------------------------
# Sampling at stopping rules


def first_hit(level: float):
    """Rule: first grid index where Y >= level (level > 0)."""
    if level <= 0:
        raise ValueError("hitting level must be positive")

    def rule(sp: SignedPath) -> int | None:
        hit = sp.Y.values >= level
        if not hit.any():
            return None
        return int(np.argmax(hit))

    return rule


def fixed_time(t: float):
    """Rule: the grid index of time t, provided Y does not vanish there."""

    def rule(sp: SignedPath) -> int | None:
        k = sp.Y.index_at(t)
        if sp.Y.values[k] == 0.0:
            return None
        return k

    return rule


def sample_at_stopping_time(sp: SignedPath, tau) -> int | None:
    """U at the index selected by the rule `tau`, or None if never selected."""
    idx = tau(sp)
    if idx is None:
        return None
    return int(sp.U.values[idx])


# ---------------------------------------------------------------------------
# Extraction (the representation direction)


@dataclass(frozen=True)
class ExtractionResult:
    Y: SamplePath
    choice: SignChoice
    indexing: exc.ExcursionIndexing
    mixed_voted: int
    mixed_rejected: int
    degraded: bool


def extract_sign_choice(
    X: SamplePath,
    mode: str = "abs",
    a: float | None = None,
    b: float | None = None,
    tol: float = 0.0,
    delta_min: float = 0.0,
    unit: float = 1.0,
    detect_crossings: bool = True,
    vote_threshold: float = 0.25,
) -> ExtractionResult:
    """Recover (Y, sign choice, indexing) from a signed path.

    mode "abs" uses Y = |X|; mode "phi" uses Y = phi_map(a, b, X). Zero
    witnesses are the samples with Y <= tol plus, when `detect_crossings`,
    every strict sign change of X (the continuous path must cross zero
    inside such a step). Intervals whose interiors still mix signs get a
    time-majority vote when the minority fraction is at most
    `vote_threshold`, otherwise they are rejected; both kinds are counted
    and a mixed fraction above 1% flags the result as degraded.
    """
    x = X.values
    if mode == "phi":
        if a is None or b is None:
            raise ValueError("phi mode needs coefficients a and b")
        y = np.asarray(phi_map(a, b, x))
    elif mode == "abs":
        y = np.abs(x)
    else:
        raise ValueError(f"unknown extraction mode {mode!r}")

    zero = y <= tol
    if detect_crossings:
        flip = x[:-1] * x[1:] < 0.0
        zero[1:] |= flip
    runs = exc.labeled_runs(y, X.dt, tol=tol, delta_min=delta_min, unit=unit, nonzero=~zero)
    indexing = exc.indexing_from_runs(runs, X.dt, tol, delta_min)

    assignment: dict[tuple[int, int], int] = {}
    mixed_voted = mixed_rejected = 0
    plus = 0
    for iv in indexing.intervals:
        gi = int(round(iv.g / X.dt))
        di = int(round(iv.d / X.dt))
        lo, hi = _interior_slices(y, gi, di, tol)
        seg = x[lo : hi + 1]
        n_pos = int((seg > 0).sum())
        n_neg = int((seg < 0).sum())
        total = n_pos + n_neg
        if total == 0:
            mixed_rejected += 1
            continue
        minority = min(n_pos, n_neg) / total
        if minority == 0.0:
            sign = 1 if n_pos else -1
        elif minority <= vote_threshold:
            mixed_voted += 1
            sign = 1 if n_pos >= n_neg else -1
        else:
            mixed_rejected += 1
            continue
        assignment[iv.key()] = sign
        plus += sign > 0
    n_intervals = max(len(indexing.intervals), 1)
    degraded = (mixed_voted + mixed_rejected) / n_intervals > 0.01
    p_hat = plus / max(len(assignment), 1)
    Y = SamplePath(dt=X.dt, values=np.maximum(y, 0.0), seed=X.seed, kind="reflected")
    choice = SignChoice(assignment=assignment, p=p_hat, seed=None, indexing_ref=indexing.ref())
    return ExtractionResult(
        Y=Y,
        choice=choice,
        indexing=indexing,
        mixed_voted=mixed_voted,
        mixed_rejected=mixed_rejected,
        degraded=degraded,
    )


def reconstruct(Y: SamplePath, indexing: exc.ExcursionIndexing, choice: SignChoice) -> SamplePath:
    """Reassemble the signed path: the interval's sign times Y, zero on the zero set."""
    U = sign_process(choice, indexing, Y)
    return SamplePath(dt=Y.dt, values=U.values * Y.values, seed=Y.seed, kind="sde")
