"""Rank statistics and the distribution tails they need.

Kruskal-Wallis with tie correction and eta-squared, Spearman rank
correlation with a Student-t two-sided p, multiple correlation of two
predictors with an F-test, and the exact one-sided binomial tail.

The chi-square / t / F tails are computed from first principles via the
regularized incomplete gamma and beta functions (series where it converges
fast, modified Lentz continued fractions elsewhere). No statistics library
is imported at runtime; tests cross-check every routine against an
independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ITMAX = 500
EPS = 1e-15
FPMIN = 1e-300

COLLINEAR_TOL = 1e-12


class ConvergenceError(ArithmeticError):
    """A series or continued fraction failed to converge within ITMAX."""


class DegenerateDataError(ValueError):
    """Input data carries no usable variation for the requested statistic."""


@dataclass(frozen=True)
class StatResult:
    """One test outcome: statistic, p-value, optional effect size, df."""

    statistic: float
    p_value: float
    effect: float | None
    df: str

    def __post_init__(self):
        if not math.isfinite(self.statistic):
            raise ValueError(f"statistic must be finite, got {self.statistic!r}")
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p_value must be within [0, 1], got {self.p_value!r}")

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "effect": self.effect,
            "df": self.df,
        }


# ---------------------------------------------------------------------------
# Special functions


def _gamma_series_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by series; wants x < a+1."""
    if x <= 0.0:
        return 0.0
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(ITMAX):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError(f"gamma series did not converge for a={a}, x={x}")


def _gamma_cf_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz
    continued fraction; wants x >= a+1."""
    b = x + 1.0 - a
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError(f"gamma continued fraction did not converge for a={a}, x={x}")


def regularized_gamma_lower(a: float, x: float) -> float:
    """P(a, x), the regularized lower incomplete gamma function."""
    if a <= 0.0:
        raise ValueError(f"a must be positive, got {a}")
    if x < 0.0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series_lower(a, x)
    return 1.0 - _gamma_cf_upper(a, x)


def regularized_gamma_upper(a: float, x: float) -> float:
    """Q(a, x) = 1 - P(a, x)."""
    if a <= 0.0:
        raise ValueError(f"a must be positive, got {a}")
    if x < 0.0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series_lower(a, x)
    return _gamma_cf_upper(a, x)


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, ITMAX + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise ConvergenceError(f"beta continued fraction did not converge for a={a}, b={b}, x={x}")


def regularized_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), the regularized incomplete beta function."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"a and b must be positive, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def chi_square_upper(x: float, df: int) -> float:
    """Upper tail P(X >= x) of the chi-square distribution."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if x < 0.0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0.0:
        return 1.0
    return regularized_gamma_upper(df / 2.0, x / 2.0)


def student_t_two_sided(t: float, df: int) -> float:
    """Two-sided tail P(|T| >= |t|) of the Student-t distribution."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if not math.isfinite(t):
        return 0.0
    if t == 0.0:
        return 1.0
    return regularized_beta(df / 2.0, 0.5, df / (df + t * t))


def f_upper(f: float, d1: int, d2: int) -> float:
    """Upper tail P(F >= f) of the F distribution."""
    if d1 < 1 or d2 < 1:
        raise ValueError(f"df must be >= 1, got ({d1}, {d2})")
    if f < 0.0:
        raise ValueError(f"f must be non-negative, got {f}")
    if f == 0.0:
        return 1.0
    return regularized_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))


def binomial_tail_greater(k: int, n: int, p0: float) -> float:
    """Exact P(X >= k) for X ~ Binomial(n, p0), summed in log space."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not (0.0 < p0 < 1.0):
        raise ValueError(f"p0 must be within (0, 1), got {p0}")
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    log_p = math.log(p0)
    log_q = math.log1p(-p0)
    log_n_fact = math.lgamma(n + 1)
    log_terms = [
        log_n_fact - math.lgamma(j + 1) - math.lgamma(n - j + 1) + j * log_p + (n - j) * log_q
        for j in range(k, n + 1)
    ]
    top = max(log_terms)
    total = math.fsum(math.exp(t - top) for t in log_terms)
    return min(math.exp(top) * total, 1.0)


# ---------------------------------------------------------------------------
# Rank statistics


def average_ranks(values) -> list[float]:
    """Mid-rank assignment (ties share the average of their positions).

    Output always sums to N(N+1)/2 exactly: mid-ranks are halves, which
    float arithmetic carries exactly at these magnitudes.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("values must be non-empty")
    for v in vals:
        if not math.isfinite(v):
            raise ValueError(f"values must be finite, got {v!r}")
    order = sorted(range(len(vals)), key=lambda i: vals[i])
    ranks = [0.0] * len(vals)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and vals[order[j + 1]] == vals[order[i]]:
            j += 1
        # positions i..j are 1-based ranks i+1..j+1
        mid = (i + j + 2) / 2.0
        for idx in order[i : j + 1]:
            ranks[idx] = mid
        i = j + 1
    return ranks


def _tie_groups(sorted_vals: list[float]) -> list[int]:
    sizes = []
    i = 0
    while i < len(sorted_vals):
        j = i
        while j + 1 < len(sorted_vals) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        sizes.append(j - i + 1)
        i = j + 1
    return sizes


def eta_squared_band(eta_squared: float) -> str:
    if eta_squared >= 0.14:
        return "large"
    if eta_squared >= 0.06:
        return "moderate"
    if eta_squared >= 0.01:
        return "small"
    return "negligible"


def kruskal_wallis(groups) -> StatResult:
    """Kruskal-Wallis rank test over k groups with tie correction.

    Returns H as the statistic, a chi-square upper-tail p at df = k-1, and
    eta-squared (H - k + 1)/(N - k) clamped to [0, 1] as the effect size.
    All values tied is defined directly as H = 0, p = 1.
    """
    groups = [list(map(float, g)) for g in groups]
    if len(groups) < 2:
        raise ValueError(f"need at least 2 groups, got {len(groups)}")
    for g in groups:
        if not g:
            raise ValueError("every group must be non-empty")
    pooled = [v for g in groups for v in g]
    n_total = len(pooled)
    if n_total < 3:
        raise ValueError(f"need at least 3 values in total, got {n_total}")
    k = len(groups)
    ranks = average_ranks(pooled)
    tie_sizes = _tie_groups(sorted(pooled))
    correction = 1.0 - sum(t**3 - t for t in tie_sizes) / (n_total**3 - n_total)
    if correction == 0.0:
        # every value identical
        h = 0.0
    else:
        offset = 0
        rank_sum_sq = 0.0
        for g in groups:
            r = sum(ranks[offset : offset + len(g)])
            rank_sum_sq += r * r / len(g)
            offset += len(g)
        h_raw = 12.0 / (n_total * (n_total + 1)) * rank_sum_sq - 3.0 * (n_total + 1)
        h = h_raw / correction
    h = max(h, 0.0)
    p = 1.0 if h == 0.0 else chi_square_upper(h, k - 1)
    eta_squared = (h - k + 1) / (n_total - k)
    eta_squared = min(max(eta_squared, 0.0), 1.0)
    return StatResult(statistic=h, p_value=p, effect=eta_squared, df=str(k - 1))


def _pearson(x: list[float], y: list[float]) -> float:
    n = len(x)
    mean_x = math.fsum(x) / n
    mean_y = math.fsum(y) / n
    dx = [v - mean_x for v in x]
    dy = [v - mean_y for v in y]
    ssx = math.fsum(d * d for d in dx)
    ssy = math.fsum(d * d for d in dy)
    if ssx == 0.0 or ssy == 0.0:
        raise DegenerateDataError("zero variance input")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(ssx * ssy)
    return min(max(r, -1.0), 1.0)


def spearman_band(rho: float) -> str:
    """Correlation strength bands (Mukaka)."""
    r = abs(rho)
    if r >= 0.9:
        return "very high"
    if r >= 0.7:
        return "high"
    if r >= 0.5:
        return "moderate"
    if r >= 0.3:
        return "low"
    return "negligible"


def spearman(x, y) -> StatResult:
    """Spearman rank correlation with a two-sided t-approximation p.

    Both statistic and effect carry rho (matching the usual convention for
    correlation tests); the t value only exists inside the p computation.
    """
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if all(v == x[0] for v in x) or all(v == y[0] for v in y):
        raise DegenerateDataError("all values tied in one variable")
    rho = _pearson(average_ranks(x), average_ranks(y))
    if abs(rho) >= 1.0 - COLLINEAR_TOL:
        rho = 1.0 if rho > 0 else -1.0
        return StatResult(statistic=rho, p_value=0.0, effect=rho, df=str(n - 2))
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = student_t_two_sided(t, n - 2)
    return StatResult(statistic=rho, p_value=p, effect=rho, df=str(n - 2))


def multiple_r_band(r: float) -> str:
    """Correlation strength bands (Hinkle)."""
    v = abs(r)
    if v >= 0.9:
        return "very high"
    if v >= 0.7:
        return "high"
    if v >= 0.5:
        return "moderate"
    if v >= 0.3:
        return "low"
    return "little if any"


def multiple_correlation(x1, x2, y) -> StatResult:
    """Multiple correlation R of y on two predictors, significance by F.

    The statistic field carries F with df (2, n-3); effect carries R.
    Collinear predictors are rejected: R is undefined there.
    """
    x1 = [float(v) for v in x1]
    x2 = [float(v) for v in x2]
    y = [float(v) for v in y]
    if not (len(x1) == len(x2) == len(y)):
        raise ValueError(f"length mismatch: {len(x1)}, {len(x2)}, {len(y)}")
    n = len(y)
    if n < 4:
        raise ValueError(f"need at least 4 points, got {n}")
    r12 = _pearson(x1, x2)
    if abs(r12) >= 1.0 - COLLINEAR_TOL:
        raise DegenerateDataError("collinear predictors")
    ry1 = _pearson(x1, y)
    ry2 = _pearson(x2, y)
    r_squared = (ry1 * ry1 + ry2 * ry2 - 2.0 * ry1 * ry2 * r12) / (1.0 - r12 * r12)
    r_squared = min(max(r_squared, 0.0), 1.0)
    r = math.sqrt(r_squared)
    if r_squared >= 1.0 - COLLINEAR_TOL:
        return StatResult(statistic=0.0, p_value=0.0, effect=1.0, df=f"(2, {n - 3})")
    f = (r_squared / 2.0) / ((1.0 - r_squared) / (n - 3))
    p = f_upper(f, 2, n - 3)
    return StatResult(statistic=f, p_value=p, effect=r, df=f"(2, {n - 3})")
