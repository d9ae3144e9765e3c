"""Statistical checks and the end-to-end verification suites.

Every check returns a VerificationReport carrying its statistic, threshold,
sample size, pass flag and seed, so any result can be reproduced bitwise from
its recorded seed. Significance conventions are fixed: 1.36/sqrt(n) for
Kolmogorov–Smirnov at the 5% level, p-value > 0.01 for chi-square, 3-sigma
bands for frequencies. Monte Carlo work fans out over chunks of pre-keyed
paths, so results are identical for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats as sps

from . import excursions as exc
from . import signs as sgn
from .localtime import (
    downcrossing_estimate,
    local_time_exact_reflecting,
    local_time_occupation,
)
from .paths import (
    Coefficient,
    OddPiecewiseCoefficient,
    SamplePath,
    StepCoefficient,
    brownian_ensemble,
    euler_values,
    reflect_values,
    time_change,
    apply_time_change,
)
from .rng import derive_seed

KS_COEF = 1.36  # 5% level
CHI2_ALPHA = 0.01
FREQ_SIGMAS = 3.0

# purpose tags for deriving independent seed families from one master seed
_P_DRIVER = 1
_P_SIGNS = 2
_P_SIGNS_ALT = 3
_P_EULER = 4


class InsufficientDataError(RuntimeError):
    """Too few samples or excursions to run the requested check."""


@dataclass
class VerificationReport:
    name: str
    statistic: float
    threshold: float
    n: int
    passed: bool
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "n": self.n,
            "passed": bool(self.passed),
            "seed": self.seed,
            "details": self.details,
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(line: str) -> "VerificationReport":
        doc = json.loads(line)
        return VerificationReport(
            name=doc["name"],
            statistic=doc["statistic"],
            threshold=doc["threshold"],
            n=doc["n"],
            passed=doc["passed"],
            seed=doc.get("seed"),
            details=doc.get("details", {}),
        )


def write_reports(reports, fp) -> None:
    for r in reports:
        fp.write(r.to_json() + "\n")


def read_reports(fp) -> tuple[list[VerificationReport], int]:
    """Parse JSON-lines reports; malformed lines are skipped and counted."""
    out, bad = [], 0
    for line in fp:
        line = line.strip()
        if not line:
            continue
        try:
            out.append(VerificationReport.from_json(line))
        except (json.JSONDecodeError, KeyError):
            bad += 1
    return out, bad


def format_table(reports) -> str:
    width = max([len(r.name) for r in reports] + [4])
    lines = [f"{'test':<{width}}  {'statistic':>12}  {'threshold':>12}  {'n':>8}  result"]
    for r in reports:
        verdict = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{r.name:<{width}}  {r.statistic:>12.6g}  {r.threshold:>12.6g}  {r.n:>8d}  {verdict}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Elementary tests


def ks_test(samples, reference_cdf, name: str = "ks", seed: int | None = None) -> VerificationReport:
    """One-sample KS against a callable reference cdf; pass iff D < 1.36/sqrt(n)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sample")
    if x.size < 30:
        raise InsufficientDataError(f"need n >= 30 samples, got {x.size}")
    d = float(sps.kstest(x, reference_cdf).statistic)
    thr = KS_COEF / np.sqrt(x.size)
    return VerificationReport(name=name, statistic=d, threshold=thr, n=x.size,
                              passed=d < thr, seed=seed)


def chi_square_signs(signs, p: float, name: str = "chi2-signs",
                     seed: int | None = None) -> VerificationReport:
    """One-degree chi-square of ±1 counts against (p, 1-p); pass iff p-value > 0.01."""
    s = np.asarray(signs)
    m = s.size
    if m < 50:
        raise InsufficientDataError(f"need at least 50 signs, got {m}")
    n_plus = int((s > 0).sum())
    n_minus = m - n_plus
    if p in (0.0, 1.0):
        ok = (n_minus == 0) if p == 1.0 else (n_plus == 0)
        stat = 0.0 if ok else float("inf")
        return VerificationReport(name=name, statistic=stat, threshold=CHI2_ALPHA, n=m,
                                  passed=ok, seed=seed,
                                  details={"p": p, "n_plus": n_plus, "freq": n_plus / m})
    exp_plus, exp_minus = m * p, m * (1.0 - p)
    stat = (n_plus - exp_plus) ** 2 / exp_plus + (n_minus - exp_minus) ** 2 / exp_minus
    pval = float(sps.chi2.sf(stat, df=1))
    return VerificationReport(name=name, statistic=pval, threshold=CHI2_ALPHA, n=m,
                              passed=pval > CHI2_ALPHA, seed=seed,
                              details={"p": p, "chi2": float(stat),
                                       "freq": n_plus / m})


def frequency_report(hits: int, n: int, target: float, name: str,
                     seed: int | None = None) -> VerificationReport:
    """Empirical frequency vs target within 3 sigma of the binomial."""
    freq = hits / n
    tol = FREQ_SIGMAS * np.sqrt(target * (1.0 - target) / n)
    return VerificationReport(name=name, statistic=freq, threshold=tol, n=n,
                              passed=abs(freq - target) <= tol, seed=seed,
                              details={"target": target, "abs_error": abs(freq - target)})


def sign_length_correlation(signs, lengths, name: str = "sign-length-corr",
                            seed: int | None = None) -> VerificationReport:
    """Independence surrogate: |corr(sign, log length)| < 3/sqrt(M)."""
    s = np.asarray(signs, dtype=np.float64)
    m = s.size
    if m < 50:
        raise InsufficientDataError(f"need at least 50 signs, got {m}")
    ll = np.log(np.asarray(lengths, dtype=np.float64))
    if np.std(s) == 0 or np.std(ll) == 0:
        rho = 0.0
    else:
        rho = float(np.corrcoef(s, ll)[0, 1])
    thr = 3.0 / np.sqrt(m)
    return VerificationReport(name=name, statistic=abs(rho), threshold=thr, n=m,
                              passed=abs(rho) < thr, seed=seed)


def sign_quartile_homogeneity(signs, lengths, name: str = "sign-quartile-homog",
                              seed: int | None = None) -> VerificationReport:
    """Independence surrogate: chi-square homogeneity of sign frequency across
    length quartiles; pass iff p-value > 0.01."""
    s = np.asarray(signs)
    m = s.size
    if m < 80:
        raise InsufficientDataError(f"need at least 80 signs, got {m}")
    ll = np.asarray(lengths, dtype=np.float64)
    qs = np.quantile(ll, [0.25, 0.5, 0.75])
    bins = np.searchsorted(qs, ll)
    table = np.zeros((2, 4))
    for q in range(4):
        sel = bins == q
        table[0, q] = (s[sel] > 0).sum()
        table[1, q] = (s[sel] < 0).sum()
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    if table.shape[1] < 2 or (table.sum(axis=1) == 0).any():
        pval = 1.0  # all one sign: nothing to be inhomogeneous about
    else:
        pval = float(sps.chi2_contingency(table).pvalue)
    return VerificationReport(name=name, statistic=pval, threshold=CHI2_ALPHA, n=m,
                              passed=pval > CHI2_ALPHA, seed=seed)


# ---------------------------------------------------------------------------
# Chunked Monte Carlo plumbing


def _ranges(n: int, chunk: int):
    for lo in range(0, n, chunk):
        yield lo, min(lo + chunk, n)


def pmap_chunks(worker, n: int, chunk: int = 2000, workers: int = 1) -> list:
    """Run worker(start, stop) over chunks; order-stable, worker-count invariant."""
    spans = list(_ranges(n, chunk))
    if workers <= 1 or len(spans) <= 1:
        return [worker(lo, hi) for lo, hi in spans]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, lo, hi) for lo, hi in spans]
        return [f.result() for f in futures]


def _signed_rows(master_seed: int, a: float, b: float, dt: float, horizon: float,
                 start: int, stop: int, sign_purpose: int = _P_SIGNS):
    """Construct signed step-coefficient rows (fast path); returns (y, u, b_rows)."""
    b_rows = brownian_ensemble((master_seed, _P_DRIVER), stop - start, horizon, dt, first=start)
    y_rows, _ = reflect_values(b_rows)
    u_rows = np.empty_like(y_rows)
    for i in range(stop - start):
        sign_seed = derive_seed(master_seed, sign_purpose, start + i)
        u_rows[i], _, _ = sgn.sign_values(y_rows[i], dt, sign_seed, b / (b - a))
    return y_rows, u_rows, b_rows


def _chunk_hit_sign(master_seed, a, b, dt, horizon, level, start, stop):
    y_rows, u_rows, _ = _signed_rows(master_seed, a, b, dt, horizon, start, stop)
    out = np.zeros(stop - start, dtype=np.int8)
    for i in range(stop - start):
        hit = y_rows[i] >= level
        if hit.any():
            out[i] = int(u_rows[i][np.argmax(hit)])
    return out


def _chunk_signed_final(master_seed, a, b, p, dt, horizon, start, stop):
    """Final value of sigma_{a,b}(U)·Y rows with +1 probability p."""
    b_rows = brownian_ensemble((master_seed, _P_DRIVER), stop - start, horizon, dt, first=start)
    y_rows, _ = reflect_values(b_rows)
    out = np.empty(stop - start)
    for i in range(stop - start):
        sign_seed = derive_seed(master_seed, _P_SIGNS, start + i)
        u, _, _ = sgn.sign_values(y_rows[i], dt, sign_seed, p)
        out[i] = (a if u[-1] >= 0 else b) * y_rows[i][-1]
    return out


def _chunk_euler_final(master_seed, sigma, dt, horizon, start, stop):
    b_rows = brownian_ensemble((master_seed, _P_EULER), stop - start, horizon, dt, first=start)
    x = euler_values(sigma, b_rows)
    return x[:, -1]


def _chunk_hit_time(master_seed, level, dt, horizon, start, stop):
    b_rows = brownian_ensemble((master_seed, _P_DRIVER), stop - start, horizon, dt, first=start)
    y_rows, _ = reflect_values(b_rows)
    hit = y_rows >= level
    any_hit = hit.any(axis=1)
    idx = np.argmax(hit, axis=1)
    times = np.where(any_hit, idx * dt, np.nan)
    return times


def _chunk_extracted_signs(master_seed, sigma, mode, a, b, dt, horizon, tol, delta_min,
                           start, stop):
    """Euler weak solutions -> extracted (signs, lengths), pooled."""
    b_rows = brownian_ensemble((master_seed, _P_EULER), stop - start, horizon, dt, first=start)
    x_rows = euler_values(sigma, b_rows)
    all_signs, all_lengths = [], []
    for i in range(stop - start):
        X = SamplePath(dt=dt, values=x_rows[i], kind="sde")
        res = sgn.extract_sign_choice(X, mode=mode, a=a, b=b, tol=tol, delta_min=delta_min)
        by_key = res.indexing.by_key()
        for key, s in res.choice.assignment.items():
            all_signs.append(s)
            all_lengths.append(by_key[key].length)
    return np.asarray(all_signs, dtype=np.int8), np.asarray(all_lengths)


def _chunk_count_series(master_seed, a, b, dt, horizon, t, x_grid, start, stop):
    """Pooled N1/N2 counts over thresholds plus the local-time normalizer."""
    y_rows, u_rows, b_rows = _signed_rows(master_seed, a, b, dt, horizon, start, stop)
    x_grid = np.asarray(x_grid, dtype=np.float64)
    n1 = np.zeros(x_grid.size, dtype=np.int64)
    n2 = np.zeros(x_grid.size, dtype=np.int64)
    t_idx = int(round(t / dt))
    ell_sum = 0.0
    for i in range(stop - start):
        runs = exc.labeled_runs(y_rows[i], dt)
        started = runs.gi * dt < t
        durations = (runs.di - runs.gi)[started] * dt
        pos = u_rows[i][runs.gi[started] + 1] > 0
        # driver-clock excursion length is sigma^2 times the duration, so the
        # two thresholds a^2/x^2 and b^2/x^2 coincide at duration > 1/x^2
        for k, x in enumerate(x_grid):
            long_enough = durations > 1.0 / x**2
            n1[k] += int((long_enough & pos).sum())
            n2[k] += int((long_enough & ~pos).sum())
        ell_sum += y_rows[i][t_idx] - b_rows[i][t_idx]
    return n1, n2, ell_sum


def _chunk_length_law(master_seed, dt, horizon, t, xs, start, stop):
    b_rows = brownian_ensemble((master_seed, _P_DRIVER), stop - start, horizon, dt, first=start)
    y_rows, ell_rows = reflect_values(b_rows)
    xs = np.asarray(xs, dtype=np.float64)
    counts = np.zeros(xs.size, dtype=np.int64)
    t_idx = int(round(t / dt))
    ell_sum = 0.0
    pooled = 0
    for i in range(stop - start):
        gi, di = exc.runs_from_mask(y_rows[i] > 0.0)
        started = gi * dt < t
        lengths = (di - gi)[started] * dt
        pooled += lengths.size
        for k, x in enumerate(xs):
            counts[k] += int((lengths > x).sum())
        ell_sum += ell_rows[i][t_idx]
    return counts, ell_sum, pooled


def _chunk_residual(master_seed, coef, dt, horizon, start, stop):
    """Sup-residual of the discrete integral identity for constructed rows."""
    if isinstance(coef, StepCoefficient):
        y_rows, u_rows, b_rows = _signed_rows(
            master_seed, coef.a, coef.b, dt, horizon, start, stop
        )
        x_rows = np.where(u_rows >= 0, coef.a, coef.b) * y_rows
    else:
        b_rows = brownian_ensemble((master_seed, _P_DRIVER), stop - start, horizon, dt,
                                   first=start)
        y_rows = euler_values(coef, b_rows, reflected=True)
        x_rows = np.empty_like(y_rows)
        for i in range(stop - start):
            sign_seed = derive_seed(master_seed, _P_SIGNS, start + i)
            u, _, _ = sgn.sign_values(y_rows[i], dt, sign_seed, 0.5)
            x_rows[i] = u * y_rows[i]
    db = np.diff(b_rows, axis=1)
    integ = np.cumsum(np.asarray(coef.value(x_rows[:, :-1])) * db, axis=1)
    resid = np.abs(x_rows[:, 1:] - integ)
    return resid.max(axis=1)


def _chunk_qv_error(master_seed, sigma, dt, horizon, start, stop):
    b_rows = brownian_ensemble((master_seed, _P_EULER), stop - start, horizon, dt, first=start)
    x_rows = euler_values(sigma, b_rows)
    qv = (np.diff(x_rows, axis=1) ** 2).sum(axis=1)
    target = (np.asarray(sigma.value(x_rows[:, :-1])) ** 2).sum(axis=1) * dt
    return np.abs(qv - target) / target


# ---------------------------------------------------------------------------
# Excursion statistics


@dataclass(frozen=True)
class ExcursionCountSeries:
    """Counts of signed excursions above the paper-parameterized thresholds.

    x is increasing; the duration threshold 1/x^2 decreases, so n1 and n2 are
    nondecreasing along the series. q = n1 - n2 identically.
    """

    x: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    local_time_norm: float

    @property
    def q(self) -> np.ndarray:
        return self.n1 - self.n2

    def p1_hat(self) -> float:
        """Positive fraction at the largest x (most inclusive threshold)."""
        tot = self.n1[-1] + self.n2[-1]
        if tot == 0:
            raise InsufficientDataError("no excursions above the smallest threshold")
        return float(self.n1[-1] / tot)


def signed_count_process(sp: sgn.SignedPath, a: float, b: float, x_grid,
                         t: float = 1.0) -> ExcursionCountSeries:
    """Count series of one signed path (see pooled_count_series for ensembles)."""
    x_grid = np.asarray(x_grid, dtype=np.float64)
    if np.any(np.diff(x_grid) <= 0):
        raise ValueError("x_grid must be increasing")
    if not a > 0 > b:
        raise ValueError("requires a > 0 > b")
    runs = exc.labeled_runs(sp.Y.values, sp.Y.dt)
    started = runs.gi * sp.Y.dt < t
    durations = (runs.di - runs.gi)[started] * sp.Y.dt
    pos = sp.U.values[runs.gi[started] + 1] > 0
    n1 = np.array([int(((durations > 1 / x**2) & pos).sum()) for x in x_grid])
    n2 = np.array([int(((durations > 1 / x**2) & ~pos).sum()) for x in x_grid])
    norm = local_time_occupation(sp.Y, None, eps=10 * np.sqrt(sp.Y.dt), one_sided=False,
                                 t=min(t, sp.Y.horizon)).value
    return ExcursionCountSeries(x=x_grid, n1=n1, n2=n2, local_time_norm=norm)


def pooled_count_series(master_seed: int, a: float, b: float, n_paths: int, dt: float,
                        x_grid, t: float = 1.0, horizon: float | None = None,
                        workers: int = 1) -> ExcursionCountSeries:
    """Count series pooled over constructed paths; thresholds resolve censoring."""
    x_grid = np.asarray(x_grid, dtype=np.float64)
    if np.any(np.diff(x_grid) <= 0):
        raise ValueError("x_grid must be increasing")
    if horizon is None:
        horizon = t + max(1.0 / x_grid.min() ** 2, 0.25)
    worker = partial(_chunk_count_series, master_seed, a, b, dt, horizon, t, x_grid)
    parts = pmap_chunks(worker, n_paths, chunk=200, workers=workers)
    n1 = sum(p[0] for p in parts)
    n2 = sum(p[1] for p in parts)
    ell = sum(p[2] for p in parts) / n_paths
    return ExcursionCountSeries(x=x_grid, n1=n1, n2=n2, local_time_norm=float(ell))


def excursion_length_law(master_seed: int, x, t: float, n_paths: int, dt: float,
                         workers: int = 1, name: str | None = None) -> VerificationReport:
    """Mean count of excursions longer than x started by t, over the mean
    symmetric local time at t, against sqrt(2/(pi x)); pass within 10%.

    Counting matches the straddling-inclusive semantics: the horizon extends
    past t by x so the straddler's length is resolved.
    """
    if x < 10 * dt:
        raise ValueError(f"threshold x={x} below resolution 10*dt")
    horizon = t + max(float(x), 0.05)
    worker = partial(_chunk_length_law, master_seed, dt, horizon, t, [float(x)])
    parts = pmap_chunks(worker, n_paths, chunk=50, workers=workers)
    pooled = sum(p[2] for p in parts)
    if pooled < 100:
        raise InsufficientDataError(f"only {pooled} excursions pooled")
    mean_count = sum(p[0][0] for p in parts) / n_paths
    mean_ell = sum(p[1] for p in parts) / n_paths
    ratio = mean_count / mean_ell
    target = np.sqrt(2.0 / (np.pi * x))
    rel = abs(ratio - target) / target
    return VerificationReport(
        name=name or f"excursion-length-law[x={x}]",
        statistic=float(ratio), threshold=0.10, n=n_paths, passed=rel < 0.10,
        seed=master_seed,
        details={"target": float(target), "rel_error": float(rel),
                 "mean_count": float(mean_count), "mean_local_time": float(mean_ell)},
    )


# ---------------------------------------------------------------------------
# Regularity condition


def legall_witness(sigma: Coefficient):
    """Increasing witness f for a piecewise-constant coefficient.

    f(x) = x + V * (cumulative jump mass up to x), V = total jump mass; then
    |σ(x)-σ(y)|² <= (Σ jumps between)² <= V·Σ jumps between <= f(y)-f(x).
    """
    jumps = sigma.jumps()
    total = sum(size for _, size in jumps)

    def f(x):
        xv = np.asarray(x, dtype=np.float64)
        out = xv.copy()
        for loc, size in jumps:
            out = out + total * size * (xv >= loc)
        return out

    return f


def check_legall_condition(sigma: Coefficient, grid=None,
                           seed: int | None = None) -> VerificationReport:
    """Verify |σ(x)-σ(y)|² <= |f(x)-f(y)| on all grid pairs.

    Uses the coefficient's witness when present, else the auto-constructed
    one. Failure reports the worst witnessing pair.
    """
    f = getattr(sigma, "witness_f", None) or legall_witness(sigma)
    if grid is None:
        span = max([abs(loc) for loc, _ in sigma.jumps()] + [1.0]) + 1.0
        grid = np.linspace(-span, span, 201)
    g = np.asarray(grid, dtype=np.float64)
    sig = np.asarray(sigma.value(g))
    fv = np.asarray(f(g))
    lhs = (sig[:, None] - sig[None, :]) ** 2
    rhs = np.abs(fv[:, None] - fv[None, :])
    slack = lhs - rhs
    worst = float(slack.max())
    i, j = np.unravel_index(int(slack.argmax()), slack.shape)
    passed = worst <= 1e-12
    details = {"n_grid": int(g.size)}
    if not passed:
        details["witness_pair"] = [float(g[i]), float(g[j])]
    return VerificationReport(name="legall-condition", statistic=worst, threshold=0.0,
                              n=g.size * g.size, passed=passed, seed=seed, details=details)


# ---------------------------------------------------------------------------
# Theorem-level suites


def _uniqueness_reports(master_seed, backbone_rows_fn, apply_signs, to_invariant, names,
                        n_paths, dt, horizon):
    """Max over paths of the invariant map's spread across two sign seeds,
    plus its distance to the backbone. Both must vanish exactly."""
    b_rows = brownian_ensemble((master_seed, _P_DRIVER), n_paths, horizon, dt)
    y_rows = backbone_rows_fn(b_rows)
    worst_pair = 0.0
    worst_backbone = 0.0
    for i in range(n_paths):
        s1 = derive_seed(master_seed, _P_SIGNS, i)
        s2 = derive_seed(master_seed, _P_SIGNS_ALT, i)
        x1 = apply_signs(y_rows[i], s1)
        x2 = apply_signs(y_rows[i], s2)
        worst_pair = max(worst_pair, float(np.max(np.abs(to_invariant(x1) - to_invariant(x2)))))
        worst_backbone = max(worst_backbone,
                             float(np.max(np.abs(to_invariant(x1) - y_rows[i]))))
    return [
        VerificationReport(name=names[0], statistic=worst_pair, threshold=0.0, n=n_paths,
                           passed=worst_pair == 0.0, seed=master_seed),
        VerificationReport(name=names[1], statistic=worst_backbone, threshold=0.0, n=n_paths,
                           passed=worst_backbone == 0.0, seed=master_seed),
    ]


def verify_theorem1(a: float, b: float, n_paths: int = 20000, dt: float = 1e-3,
                    master_seed: int = 0, workers: int = 1,
                    horizon: float = 3.0) -> list[VerificationReport]:
    """Step-coefficient suite: construction residual, uniqueness and
    adaptedness of the folded path, sign law at a hitting rule, and the
    representation checks on independent Euler solutions."""
    if not a > 0 > b:
        raise ValueError(f"requires a > 0 > b, got ({a}, {b})")
    p = b / (b - a)
    reports: list[VerificationReport] = []
    coef = StepCoefficient(a, b)

    # (i) construction: discrete integral residual shrinks with dt
    n_res = min(n_paths, 100)
    res_fine = np.concatenate(pmap_chunks(
        partial(_chunk_residual, master_seed, coef, dt, 1.0), n_res, workers=workers))
    res_coarse = np.concatenate(pmap_chunks(
        partial(_chunk_residual, master_seed, coef, dt * 10, 1.0), n_res, workers=workers))
    med_f, med_c = float(np.median(res_fine)), float(np.median(res_coarse))
    reports.append(VerificationReport(
        name="t1-construction-residual-decreasing", statistic=med_f, threshold=med_c,
        n=n_res, passed=med_f < med_c, seed=master_seed,
        details={"median_fine": med_f, "median_coarse": med_c, "dt": dt}))

    # (ii)+(iii) uniqueness of the folded path across sign seeds; adaptedness
    def apply_signs_step(y, seed):
        u, _, _ = sgn.sign_values(y, dt, seed, p)
        return np.where(u >= 0, a, b) * y

    reports.extend(_uniqueness_reports(
        master_seed, lambda rows: reflect_values(rows)[0], apply_signs_step,
        lambda x: np.asarray(sgn.phi_map(a, b, x)),
        ("t1-phi-uniqueness", "t1-phi-adapted"),
        min(n_paths, 100), dt, 1.0))

    # sign law at the first hit of a positive level
    hits = np.concatenate(pmap_chunks(
        partial(_chunk_hit_sign, master_seed, a, b, dt, horizon, 0.5),
        n_paths, workers=workers))
    valid = hits != 0
    reports.append(frequency_report(int((hits[valid] > 0).sum()), int(valid.sum()),
                                    p, "t1-sign-law-hitting", seed=master_seed))

    # (iv) representation: signs extracted from independent Euler solutions
    tol = np.sqrt(dt) * 1e-2
    n_eu = max(min(n_paths // 100, 400), 100)
    parts = pmap_chunks(
        partial(_chunk_extracted_signs, master_seed, coef, "phi", a, b, dt, 1.0, tol, 0.01),
        n_eu, chunk=100, workers=workers)
    signs = np.concatenate([pr[0] for pr in parts])
    lengths = np.concatenate([pr[1] for pr in parts])
    if signs.size < 500:
        raise InsufficientDataError(f"only {signs.size} pooled excursions")
    reports.append(chi_square_signs(signs, p, name="t1-representation-chi2",
                                    seed=master_seed))
    reports.append(sign_length_correlation(signs, lengths,
                                           name="t1-representation-corr", seed=master_seed))
    reports.append(sign_quartile_homogeneity(signs, lengths,
                                             name="t1-representation-homog", seed=master_seed))

    # marginal law: for a = -b the solution is Brownian
    if a == -b:
        finals = np.concatenate(pmap_chunks(
            partial(_chunk_signed_final, master_seed, a, b, p, dt, 1.0),
            min(n_paths, 10000), workers=workers))
        reports.append(ks_test(finals / a, sps.norm.cdf, name="t1-levy-ks",
                               seed=master_seed))
    return reports


def verify_theorem2(sigma: OddPiecewiseCoefficient, n_paths: int = 1000, dt: float = 1e-4,
                    master_seed: int = 0, workers: int = 1) -> list[VerificationReport]:
    """Odd-coefficient suite: regularity condition, |x|-identities, residual
    and quadratic-variation checks, extracted sign law, and the time-change
    zero-set bijection."""
    reports = [check_legall_condition(sigma, seed=master_seed)]
    if not reports[0].passed:
        return reports

    # residual decreasing with dt
    n_res = min(n_paths, 100)
    res_fine = np.concatenate(pmap_chunks(
        partial(_chunk_residual, master_seed, sigma, dt, 1.0), n_res, workers=workers))
    res_coarse = np.concatenate(pmap_chunks(
        partial(_chunk_residual, master_seed, sigma, dt * 10, 1.0), n_res, workers=workers))
    med_f, med_c = float(np.median(res_fine)), float(np.median(res_coarse))
    reports.append(VerificationReport(
        name="t2-construction-residual-decreasing", statistic=med_f, threshold=med_c,
        n=n_res, passed=med_f < med_c, seed=master_seed,
        details={"median_fine": med_f, "median_coarse": med_c, "dt": dt}))

    # |X| identities across sign seeds
    def apply_signs_odd(y, seed):
        u, _, _ = sgn.sign_values(y, dt, seed, 0.5)
        return u * y

    reports.extend(_uniqueness_reports(
        master_seed, lambda rows: euler_values(sigma, rows, reflected=True),
        apply_signs_odd, np.abs,
        ("t2-abs-uniqueness", "t2-abs-identity"),
        min(n_paths, 100), dt, 1.0))

    # quadratic variation of Euler weak solutions
    qv_err = np.concatenate(pmap_chunks(
        partial(_chunk_qv_error, master_seed, sigma, dt, 1.0),
        min(n_paths, 100), workers=workers))
    med_qv = float(np.median(qv_err))
    reports.append(VerificationReport(
        name="t2-quadratic-variation", statistic=med_qv, threshold=0.05,
        n=qv_err.size, passed=med_qv < 0.05, seed=master_seed))

    # extracted signs from Euler weak solutions: fair coin plus independence
    tol = np.sqrt(dt) * 1e-2
    n_eu = max(min(n_paths, 200), 100)
    parts = pmap_chunks(
        partial(_chunk_extracted_signs, master_seed, sigma, "abs", None, None, dt, 1.0,
                tol, 100 * dt),
        n_eu, chunk=100, workers=workers)
    signs = np.concatenate([pr[0] for pr in parts])
    lengths = np.concatenate([pr[1] for pr in parts])
    if signs.size < 500:
        raise InsufficientDataError(f"only {signs.size} pooled excursions")
    reports.append(chi_square_signs(signs, 0.5, name="t2-sign-frequency", seed=master_seed))
    reports.append(sign_length_correlation(signs, lengths, name="t2-sign-corr",
                                           seed=master_seed))

    # occupation symmetry of the signed construction
    finals = np.concatenate(pmap_chunks(
        partial(_chunk_signed_final_odd, master_seed, sigma, dt, 1.0),
        min(n_paths, 2000), workers=workers))
    reports.append(frequency_report(int((finals > 0).sum()), finals.size, 0.5,
                                    "t2-occupation-half", seed=master_seed))

    # time-change round trip and zero-set bijection spot checks
    b_rows = brownian_ensemble((master_seed, _P_EULER), 3, 1.0, dt)
    rt_stat = 0.0
    zmap_stat = 0.0
    zmap_thr = 0.0
    for row in euler_values(sigma, b_rows):
        X = SamplePath(dt=dt, values=row, kind="sde")
        tc = time_change(X, sigma)
        t_grid = X.times()
        rt_stat = max(rt_stat, float(np.max(np.abs(tc.alpha(tc.forward(t_grid)) - t_grid))))
        Xt = apply_time_change(X, tc, dt)
        step = float(np.max(np.abs(np.diff(Xt.values))))
        zmap_thr = max(zmap_thr, step)
        zeros = np.flatnonzero(np.abs(row) <= np.sqrt(dt) * 1e-2)[:50]
        for k in zeros:
            j = int(round(tc.A[k] / dt))
            lo, hi = max(j - 1, 0), min(j + 2, len(Xt))
            zmap_stat = max(zmap_stat, float(np.min(np.abs(Xt.values[lo:hi]))))
    reports.append(VerificationReport(
        name="t2-time-change-roundtrip", statistic=rt_stat, threshold=dt, n=3,
        passed=rt_stat <= dt, seed=master_seed))
    reports.append(VerificationReport(
        name="t2-zero-set-bijection", statistic=zmap_stat, threshold=zmap_thr + 1e-12, n=3,
        passed=zmap_stat <= zmap_thr + 1e-12, seed=master_seed))
    return reports


def _chunk_signed_final_odd(master_seed, sigma, dt, horizon, start, stop):
    b_rows = brownian_ensemble((master_seed, _P_DRIVER), stop - start, horizon, dt, first=start)
    y_rows = euler_values(sigma, b_rows, reflected=True)
    out = np.empty(stop - start)
    for i in range(stop - start):
        sign_seed = derive_seed(master_seed, _P_SIGNS, start + i)
        u, _, _ = sgn.sign_values(y_rows[i], dt, sign_seed, 0.5)
        out[i] = u[-1] * y_rows[i][-1]
    return out


def _chunk_skew_final(master_seed, alpha, dt, horizon, start, stop):
    return _chunk_signed_final(master_seed, 1.0, -1.0, alpha, dt, horizon, start, stop)


def skew_occupation_report(alpha: float, n_paths: int, dt: float, master_seed: int,
                           t: float = 1.0, workers: int = 1) -> VerificationReport:
    """P(skew path > 0 at time t) against alpha, 3-sigma binomial band."""
    finals = np.concatenate(pmap_chunks(
        partial(_chunk_skew_final, master_seed, alpha, dt, t), n_paths, workers=workers))
    return frequency_report(int((finals > 0).sum()), finals.size, alpha,
                            f"skew-occupation[alpha={alpha}]", seed=master_seed)


def verify_appendix(alpha: float, n_paths: int = 20000, dt: float = 1e-4,
                    master_seed: int = 0, workers: int = 1) -> list[VerificationReport]:
    """Skew-construction suite: decompose/reconstruct round trip, occupation
    fraction, and sign statistics invariance across the three labelings."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    reports = []

    # bitwise decompose -> reconstruct on a handful of paths
    worst = 0.0
    label_mismatch = 0
    for i in range(5):
        B = SamplePath(dt=dt, values=brownian_ensemble((master_seed, _P_DRIVER), 1, 1.0, dt,
                                                       first=i)[0], kind="brownian")
        X = sgn.skew_bm(B, alpha, derive_seed(master_seed, _P_SIGNS, i))
        res = sgn.extract_sign_choice(X, mode="abs", tol=0.0, delta_min=0.0)
        rebuilt = sgn.reconstruct(res.Y, res.indexing, res.choice)
        worst = max(worst, float(np.max(np.abs(rebuilt.values - X.values))))

        # signs are interval data: transporting them through any labeling and
        # back must reproduce them, and the multiset of signs is invariant
        ivs = [(iv.g, iv.d) for iv in res.indexing.intervals]
        sign_of = {(iv.g, iv.d): res.choice.assignment[iv.key()]
                   for iv in res.indexing.intervals}
        epoch_labels = {(iv.g, iv.d): iv.key() for iv in res.indexing.intervals}
        im_labels, unlabeled = exc.label_ito_mckean(ivs)
        bl_labels = exc.label_blumenthal(ivs)
        if unlabeled or set(im_labels) != set(ivs) or set(bl_labels) != set(ivs):
            label_mismatch += 1
            continue
        im_signs = {im_labels[iv]: sign_of[iv] for iv in ivs}
        bl_signs = {bl_labels[iv]: sign_of[iv] for iv in ivs}
        if sorted(im_signs.values()) != sorted(sign_of.values()) or \
           sorted(bl_signs.values()) != sorted(sign_of.values()):
            label_mismatch += 1
            continue
        epoch_to_im = exc.relabel(epoch_labels, im_labels)
        epoch_to_bl = exc.relabel(epoch_labels, bl_labels)
        for iv in ivs:
            key = epoch_labels[iv]
            if im_signs[epoch_to_im[key]] != sign_of[iv] or \
               bl_signs[epoch_to_bl[key]] != sign_of[iv]:
                label_mismatch += 1
                break
    reports.append(VerificationReport(
        name="appendix-reconstruction", statistic=worst, threshold=0.0, n=5,
        passed=worst == 0.0, seed=master_seed))
    reports.append(VerificationReport(
        name="appendix-label-equivalence", statistic=float(label_mismatch), threshold=0.0,
        n=5, passed=label_mismatch == 0, seed=master_seed))

    reports.append(skew_occupation_report(alpha, n_paths, dt, master_seed,
                                          workers=workers))

    if alpha == 0.5:
        finals = np.concatenate(pmap_chunks(
            partial(_chunk_skew_final, master_seed, alpha, dt, 1.0),
            min(n_paths, 10000), workers=workers))
        reports.append(ks_test(finals, sps.norm.cdf, name="appendix-ks-normal",
                               seed=master_seed))
    return reports
