"""Post-processing: per-round rates, intervals, fits, projections, thresholds, autocorrelations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .circuit import MemoryCircuit

log = logging.getLogger(__name__)

TERAQUOP = 1e-12
PROJECTION_CAP = 1000
EXPONENTIAL, POWERLAW = "exponential", "powerlaw"


class InvalidInput(ValueError):
    pass


def per_round_rate(P_L: float, rounds: int) -> float:
    """Per-round flip rate whose independent composition over ``rounds`` gives ``P_L``."""
    if rounds < 1:
        raise InvalidInput("rounds must be >= 1")
    if P_L < 0:
        raise InvalidInput("P_L must be non-negative")
    if P_L >= 0.5:
        if P_L > 0.5:
            log.warning("logical error rate %.4g saturates above 1/2", P_L)
        return 0.5
    if rounds == 1:
        return float(P_L)
    return float(-np.expm1(np.log1p(-2 * P_L) / rounds) / 2)


def compose_rounds(p_round: float, rounds: int) -> float:
    return float((1 - (1 - 2 * p_round) ** rounds) / 2)


def confidence_interval(failures: int, shots: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval."""
    if not 0 <= failures <= shots or shots <= 0:
        raise InvalidInput("need 0 <= failures <= shots and shots > 0")
    ph = failures / shots
    denom = 1 + z * z / shots
    center = (ph + z * z / (2 * shots)) / denom
    half = z * math.sqrt(ph * (1 - ph) / shots + z * z / (4 * shots * shots)) / denom
    lo = 0.0 if failures == 0 else max(0.0, center - half)
    hi = 1.0 if failures == shots else min(1.0, center + half)
    return lo, hi


# ---------------------------------------------------------------------------
# Fits and projections


@dataclass(frozen=True)
class FitResult:
    model: str
    amplitude: float
    rate: float
    residual: float

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        if self.model == EXPONENTIAL:
            return self.amplitude * np.exp(-self.rate * d)
        return self.amplitude * d ** (-self.rate)

    def to_dict(self) -> dict:
        return {"model": self.model, "amplitude": self.amplitude, "rate": self.rate, "residual": self.residual}


def fit(points, model: str = EXPONENTIAL, weights=None) -> FitResult:
    """Least squares of ``log p_round`` against ``d`` (exponential) or ``log d`` (powerlaw).

    ``weights`` (optional) are per-point inverse variances of ``log p_round``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise InvalidInput("need at least 3 (d, p_round) points")
    d, p = pts[:, 0], pts[:, 1]
    if np.any(p <= 0):
        raise InvalidInput("rates must be positive to fit in log space")
    if model == EXPONENTIAL:
        x = d
    elif model == POWERLAW:
        x = np.log(d)
    else:
        raise InvalidInput(f"unknown fit model {model!r}")
    y = np.log(p)
    w = None if weights is None else np.sqrt(np.asarray(weights, dtype=float))
    slope, intercept = np.polyfit(x, y, 1, w=w)
    resid = float(np.linalg.norm(y - (intercept + slope * x)))
    return FitResult(model, float(np.exp(intercept)), float(-slope), resid)


def teraquop_distance(fr: FitResult, target: float = TERAQUOP, cap: int = PROJECTION_CAP):
    """Smallest odd distance whose fitted rate is at most ``target``; ``None`` if unrealistic."""
    if fr.rate <= 0 or fr.amplitude <= 0:
        return None
    if fr.amplitude <= target:
        return 3
    if fr.model == EXPONENTIAL:
        dstar = math.log(fr.amplitude / target) / fr.rate
    else:
        dstar = math.exp(math.log(fr.amplitude / target) / fr.rate)
    if dstar > cap:
        return None
    d = max(3, math.ceil(dstar - 1e-9))
    return d if d % 2 else d + 1


# ---------------------------------------------------------------------------
# Thresholds


@dataclass
class ThresholdEstimate:
    estimate: float | None
    spread: tuple[float, float] | None
    crossings: dict = field(default_factory=dict)
    # For pairs without a crossing: (lower, upper) bound on where it lies.
    open_intervals: dict = field(default_factory=dict)


def _crossing(p, a, b):
    """First crossing of log-log curves a(p) and b(p) by linear interpolation in log p."""
    lp = np.log(p)
    diff = np.log(a) - np.log(b)
    for i in range(len(p) - 1):
        if diff[i] == 0:
            return float(p[i])
        if diff[i] * diff[i + 1] < 0:
            f = diff[i] / (diff[i] - diff[i + 1])
            return float(np.exp(lp[i] + f * (lp[i + 1] - lp[i])))
    if diff[-1] == 0:
        return float(p[-1])
    return None


def threshold_estimate(curves: dict) -> ThresholdEstimate:
    """``curves`` maps distance -> (p values, logical rates) over a shared p grid."""
    if len(curves) < 2:
        raise InvalidInput("need curves for at least two distances")
    cross, opened = {}, {}
    for d1, d2 in combinations(sorted(curves), 2):
        p1, r1 = (np.asarray(v, float) for v in curves[d1])
        p2, r2 = (np.asarray(v, float) for v in curves[d2])
        grid = np.intersect1d(p1, p2)
        if len(grid) < 2:
            raise InvalidInput(f"curves for d={d1} and d={d2} do not overlap")
        a = np.interp(grid, p1, r1)
        b = np.interp(grid, p2, r2)
        ok = (a > 0) & (b > 0)
        grid, a, b = grid[ok], a[ok], b[ok]
        c = _crossing(grid, a, b) if len(grid) >= 2 else None
        if c is None:
            # Larger distance better everywhere -> threshold above the range, and vice versa.
            below = len(grid) and np.all(b < a)
            opened[(d1, d2)] = (float(grid.max()), math.inf) if below else (0.0, float(grid.min()) if len(grid) else math.inf)
        else:
            cross[(d1, d2)] = c
    if not cross:
        return ThresholdEstimate(None, None, cross, opened)
    vals = np.array(list(cross.values()))
    return ThresholdEstimate(float(np.median(vals)), (float(vals.min()), float(vals.max())), cross, opened)


# ---------------------------------------------------------------------------
# Autocorrelation


@dataclass
class AutocorrMatrix:
    rounds: np.ndarray  # detector time coordinates covered
    pbar: np.ndarray  # [T, T]; diagonal is 1 (self-correlation)
    counts: np.ndarray  # [T, T] number of same-site pairs averaged
    curve: dict  # separation -> mean pbar over |t - t'| = separation (separation >= 2)
    curve_stderr: dict = field(default_factory=dict)
    zero_variance: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["t,t_prime,value"]
        for i, t in enumerate(self.rounds):
            for j, tp in enumerate(self.rounds):
                lines.append(f"{int(t)},{int(tp)},{self.pbar[i, j]!r}")
        return "\n".join(lines) + "\n"


def _pearson(bits: np.ndarray, chunk: int = 1 << 16):
    """Pearson correlation matrix of the columns of a [shots, n] 0/1 array."""
    n = bits.shape[1]
    shots = bits.shape[0]
    s = np.zeros(n)
    ss = np.zeros((n, n))
    for a in range(0, shots, chunk):
        blk = bits[a: a + chunk].astype(np.float64)
        s += blk.sum(axis=0)
        ss += blk.T @ blk
    mean = s / shots
    cov = ss / shots - np.outer(mean, mean)
    var = np.diag(cov).copy()
    zero = var <= 0
    sd = np.sqrt(np.where(zero, 1.0, var))
    corr = cov / np.outer(sd, sd)
    corr[zero, :] = 0.0
    corr[:, zero] = 0.0
    return corr, np.flatnonzero(zero)


def _average_by_round(corr, circuit: MemoryCircuit, times):
    dets = circuit.detectors
    tindex = {t: i for i, t in enumerate(times)}
    by_site: dict = {}
    for k, D in enumerate(dets):
        if D.t in tindex:
            by_site.setdefault((D.s.x, D.s.y), []).append((tindex[D.t], k))
    T = len(times)
    total = np.zeros((T, T))
    count = np.zeros((T, T))
    for members in by_site.values():
        ti = np.array([m[0] for m in members])
        ki = np.array([m[1] for m in members])
        total[np.ix_(ti, ti)] += corr[np.ix_(ki, ki)]
        count[np.ix_(ti, ti)] += 1
    pbar = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    np.fill_diagonal(pbar, 1.0)
    return pbar, count


def _curve(pbar, times, min_sep=2):
    out = {}
    T = len(times)
    for sep in range(min_sep, T):
        vals = [pbar[i, i + sep] for i in range(T - sep)]
        out[int(sep)] = float(np.mean(vals))
    return out


def autocorrelation(batch, circuit: MemoryCircuit, *, full_rounds_only: bool = True,
                    n_batches: int = 0) -> AutocorrMatrix:
    """Same-site detector autocorrelation averaged per (t, t').

    With ``full_rounds_only`` only rounds in which every syndrome has a detector
    are kept (this drops the half-populated first and last layers).
    ``n_batches > 1`` also estimates the standard error of the separation
    curve from that many disjoint shot batches.
    """
    if batch.shots < 2:
        raise InvalidInput("need at least two shots")
    m = circuit.layout.num_syndromes
    per_t: dict[int, int] = {}
    for D in circuit.detectors:
        per_t[D.t] = per_t.get(D.t, 0) + 1
    times = sorted(t for t, c in per_t.items() if c == m or not full_rounds_only)
    bits = batch.detector_bits()
    corr, zero = _pearson(bits)
    if len(zero):
        log.warning("%d detectors have zero variance; their correlations are set to 0", len(zero))
    pbar, count = _average_by_round(corr, circuit, times)
    curve = _curve(pbar, times)
    stderr = {}
    if n_batches > 1:
        size = batch.shots // n_batches
        curves = []
        for b in range(n_batches):
            c_b, _ = _pearson(bits[b * size: (b + 1) * size])
            pb, _ = _average_by_round(c_b, circuit, times)
            curves.append(_curve(pb, times))
        for sep in curve:
            vals = np.array([c[sep] for c in curves])
            stderr[sep] = float(vals.std(ddof=1) / math.sqrt(n_batches))
    return AutocorrMatrix(np.array(times), pbar, count, curve, stderr, [int(z) for z in zero])
