"""Length histograms, exponential fits, per-tree tail curves and the
constants of the exponential tail bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


class FitError(ValueError):
    pass


@dataclass
class Histogram:
    """Integer counts per length. ``replicas`` counts the trees pooled in."""

    counts: dict = field(default_factory=dict)
    replicas: int = 0

    @classmethod
    def from_values(cls, values, replicas: int = 1) -> "Histogram":
        vals, cnts = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
        return cls({int(v): int(c) for v, c in zip(vals, cnts)}, replicas)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def max_length(self):
        return max(self.counts) if self.counts else None

    def __add__(self, other: "Histogram") -> "Histogram":
        counts = dict(self.counts)
        for k, c in other.counts.items():
            counts[k] = counts.get(k, 0) + c
        return Histogram(counts, self.replicas + other.replicas)

    def merge(self, other: "Histogram") -> "Histogram":
        return self + other

    def items(self):
        return sorted(self.counts.items())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["length", "count"])
        for length, count in self.items():
            writer.writerow([length, count])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, replicas: int = 0) -> "Histogram":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"length", "count"} <= set(reader.fieldnames):
            raise ValueError("histogram CSV needs a 'length,count' header")
        counts = {}
        for row in reader:
            length, count = int(row["length"]), int(row["count"])
            if count < 0:
                raise ValueError(f"negative count at length {length}")
            counts[length] = counts.get(length, 0) + count
        return cls(counts, replicas)


def merge_all(histograms) -> Histogram:
    out = Histogram()
    for h in histograms:
        out = out + h
    return out


@dataclass(frozen=True)
class ExpFit:
    A: float
    rate: float
    r_squared: float
    fit_range: tuple
    bins_used: int

    def predict(self, length):
        return self.A * np.exp(-self.rate * np.asarray(length, dtype=float))

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "lambda": self.rate,
            "r_squared": self.r_squared,
            "fit_range": list(self.fit_range),
            "bins_used": self.bins_used,
        }


def fit_exponential(h: Histogram, min_count: int = 10, fit_range=None) -> ExpFit:
    """Least-squares line through ``log(count)`` against length.

    Only bins with at least ``min_count`` entries inside ``fit_range``
    (default ``[1, largest qualifying length]``) are used; fewer than three
    such bins is an error.
    """
    qualifying = [(l, c) for l, c in h.items() if c >= min_count]
    if fit_range is None:
        hi = max((l for l, _ in qualifying), default=0)
        fit_range = (1, hi)
    lo, hi = fit_range
    bins = [(l, c) for l, c in qualifying if lo <= l <= hi]
    if len(bins) < 3:
        raise FitError(
            f"need at least 3 bins with count >= {min_count} in {list(fit_range)}, have {len(bins)}")
    x = np.array([l for l, _ in bins], dtype=float)
    y = np.log(np.array([c for _, c in bins], dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExpFit(float(math.exp(intercept)), float(-slope), max(0.0, min(1.0, r2)),
                  (int(lo), int(hi)), len(bins))


@dataclass(frozen=True)
class BoundConstants:
    n: int
    theta: float
    C0: float
    delta: float

    @property
    def slash_prefactor(self) -> float:
        return self.C0 / (1.0 - self.theta)

    def branch_bound(self, l, m: int) -> float:
        return self.C0 * m * (self.n - 1) * self.theta ** l

    def slash_bound(self, l) -> float:
        return self.slash_prefactor * self.delta ** l

    def to_dict(self) -> dict:
        return {"n": self.n, "theta": self.theta, "C0": self.C0, "delta": self.delta,
                "slash_prefactor": self.slash_prefactor}


def bound_constants(n: int) -> BoundConstants:
    """Constants of the random-walk hitting argument for circumference ``n``.

    With ``h = floor(n/2)``, a walk reaches the trunk within ``h`` steps with
    probability at least ``4**-h``, which gives
    ``theta = (1 - 4**-h)**(1/h)``, ``C0 = max(1, theta**-h)`` and the slash
    rate ``delta = theta**(1/(8n+1))``.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    h = n // 2
    theta = (1.0 - 4.0 ** (-h)) ** (1.0 / h)
    c0 = max(1.0, theta ** (-h))
    delta = theta ** (1.0 / (8 * n + 1))
    return BoundConstants(n, theta, c0, delta)


@dataclass(frozen=True)
class TailCurve:
    """Estimated ``P(X >= l)`` (or ``P(X > l)`` when ``strict``) per length."""

    probs: dict
    replicas: int
    strict: bool = False

    def __getitem__(self, l):
        if l in self.probs:
            return self.probs[l]
        return 1.0 if l < min(self.probs) else 0.0

    def items(self):
        return sorted(self.probs.items())


def empirical_tail(maxima: Histogram, strict: bool = False) -> TailCurve:
    """Tail of a per-tree statistic from the histogram of its per-tree values.

    ``maxima`` must hold exactly one value per replica.
    """
    replicas = maxima.replicas or maxima.total
    if maxima.total != replicas:
        raise ValueError("per-tree histogram must hold exactly one entry per replica")
    if replicas == 0:
        raise ValueError("empty histogram")
    top = max(maxima.counts)
    lo = min(0, min(maxima.counts))
    probs = {}
    above = 0
    for l in range(top + 1, lo - 1, -1):
        at = maxima.counts.get(l, 0)
        # strict: count values > l, otherwise values >= l
        probs[l] = (above if strict else above + at) / replicas
        above += at
    return TailCurve(dict(sorted(probs.items())), replicas, strict)


def bound_check(tail: TailCurve, consts: BoundConstants, n: int, m: int,
                kind: str = "branch", sigmas: float = 3.0) -> dict:
    """Compare an empirical tail with its theoretical bound plus ``sigmas`` binomial SEs.

    ``kind="branch"`` uses ``C0 m (n-1) theta**l``; ``kind="slash"`` uses
    ``C0/(1-theta) delta**l``.
    """
    if consts.n != n:
        raise ValueError("constants were computed for a different n")
    rows = []
    first = None
    for l, p in tail.items():
        if kind == "branch":
            bound = consts.branch_bound(l, m)
        elif kind == "slash":
            bound = consts.slash_bound(l)
        else:
            raise ValueError(f"unknown bound kind {kind!r}")
        sigma = math.sqrt(p * (1.0 - p) / tail.replicas)
        ok = p <= bound + sigmas * sigma
        rows.append({"l": l, "p": p, "sigma": sigma, "bound": bound, "ok": ok})
        if not ok and first is None:
            first = l
    return {
        "kind": kind,
        "n": n,
        "m": m,
        "replicas": tail.replicas,
        "strict": tail.strict,
        "constants": consts.to_dict(),
        "rows": rows,
        "first_violation": first,
        "passed": first is None,
    }
