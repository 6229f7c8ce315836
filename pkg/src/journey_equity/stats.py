"""Ordinary least squares with inference, and the two equity regressions.

The solver factorises the design with Householder QR and never forms the
normal equations.  Two-sided p-values use the Student-t distribution through
a continued-fraction regularized incomplete beta function.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .demographics import PURPOSES
from .errors import RankDeficientError, ValidationError

__all__ = [
    "INTERCEPT",
    "EQUITY_TERMS",
    "PURPOSE_TERMS",
    "PURPOSE_REFERENCE",
    "DesignMatrix",
    "Term",
    "RegressionResult",
    "betainc",
    "t_cdf",
    "p_value",
    "ols_fit",
    "design_from_areas",
    "equity_regression",
    "purpose_regression",
    "reversed_regressions",
    "significance_stars",
    "render_table",
    "write_result_csv",
    "read_result_csv",
]

INTERCEPT = "(Intercept)"

# (area field, row label); labels follow the published table layout
EQUITY_TERMS = (
    ("time_per_mile", "Time by Distance (min/mile)"),
    ("transfers_per_mile", "Transfers by Distance (#/mile)"),
    ("transfer_wait_minutes", "Transfer Wait Time (min)"),
    ("network_miles", "Distance (mile)"),
    ("rail_share", "Rail Mode Share (%)"),
)
WAIT_PER_MILE_TERM = ("transfer_wait_per_mile", "Transfer Wait Time by Distance (min/mile)")

PURPOSE_LABELS = {
    "home_work": "Home to Work / Work to Home",
    "home_other": "Home to Other / Other to Home",
    "other_nonhome": "Other (not a home trip)",
    "home_social": "Home to Social / Social to Home",
    "home_school": "Home to School / School to Home",
}
# shares sum to one, so one category is absorbed by the intercept
PURPOSE_REFERENCE = "other_nonhome"
PURPOSE_TERMS = tuple((k, PURPOSE_LABELS[k]) for k in PURPOSES if k != PURPOSE_REFERENCE)

MIN_AREAS = 10
RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# distributions


def _betacf(a, b, x, max_iter=50_000, eps=1e-16):
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _stirling_tail(z):
    return 1.0 / (12.0 * z) - 1.0 / (360.0 * z**3) + 1.0 / (1260.0 * z**5)


def _log_beta(a, b):
    """log B(a, b) without cancelling two huge lgamma values when one argument is large."""
    big, small = max(a, b), min(a, b)
    if big < 50.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    # lgamma(big + small) - lgamma(big) via Stirling's series
    ratio = (
        (big - 0.5) * math.log1p(small / big)
        + small * math.log(big + small)
        - small
        + _stirling_tail(big + small)
        - _stirling_tail(big)
    )
    return math.lgamma(small) - ratio


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b) for a, b > 0."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_cdf(t, dof):
    """Student-t distribution function."""
    tail = 0.5 * betainc(dof / 2.0, 0.5, dof / (dof + t * t))
    return 1.0 - tail if t >= 0 else tail


def p_value(t, dof):
    """Two-sided p-value ``2 * (1 - F_t(|t|; dof))``; NaN for NaN ``t``."""
    if dof < 1:
        raise ValueError("p_value needs dof >= 1")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    # 2 * upper tail is exactly I_{dof/(dof+t^2)}(dof/2, 1/2); avoids 1 - cdf cancellation
    return min(1.0, betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def significance_stars(p):
    if p is None or math.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# ---------------------------------------------------------------------------
# OLS


@dataclass
class DesignMatrix:
    """Named regressors plus a response, one row per observation.

    The intercept is added by :func:`ols_fit`, not stored here.
    """

    ids: list
    columns: dict
    response: np.ndarray
    response_name: str = "y"
    labels: dict = field(default_factory=dict)  # column name -> display label
    intercept: bool = True

    def __post_init__(self):
        self.response = np.asarray(self.response, dtype=float)
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        n = len(self.response)
        for name, col in self.columns.items():
            if col.shape != (n,):
                raise ValidationError(f"column {name!r} has length {len(col)}, expected {n}")
        if len(self.ids) != n:
            raise ValidationError("ids and response lengths differ")

    @property
    def n(self):
        return len(self.response)

    @property
    def k(self):
        return len(self.columns) + int(self.intercept)

    def names(self):
        return ([INTERCEPT] if self.intercept else []) + list(self.columns)

    def matrix(self):
        cols = ([np.ones(self.n)] if self.intercept else []) + list(self.columns.values())
        return np.column_stack(cols) if cols else np.empty((self.n, 0))


@dataclass(frozen=True)
class Term:
    name: str
    label: str
    coefficient: float
    std_error: float
    t_value: float
    p_value: float


@dataclass(frozen=True)
class RegressionResult:
    response: str
    terms: tuple
    r_squared: float
    adjusted_r_squared: float
    n: int
    dof: int
    weighted: bool = False

    def term(self, name):
        for t in self.terms:
            if t.name == name or t.label == name:
                return t
        raise KeyError(name)

    def coef(self, name):
        return self.term(name).coefficient

    @property
    def names(self):
        return [t.name for t in self.terms]


def _back_substitute(r, b):
    k = r.shape[0]
    x = np.zeros((k,) + b.shape[1:])
    for i in range(k - 1, -1, -1):
        x[i] = (b[i] - r[i, i + 1 :] @ x[i + 1 :]) / r[i, i]
    return x


def _dependent_columns(x, names):
    norms = np.linalg.norm(x, axis=0)
    scaled = x / np.where(norms > 0, norms, 1.0)
    _, s, vt = np.linalg.svd(scaled, full_matrices=False)
    null = vt[s <= RANK_TOL * s[0]] if s[0] > 0 else vt
    involved = np.any(np.abs(null) > 1e-6, axis=0) | (norms == 0)
    return [n for n, hit in zip(names, involved) if hit]


def ols_fit(design, weights=None):
    """Fit ``response ~ columns`` by least squares.

    ``weights`` switches to weighted least squares (rows scaled by
    ``sqrt(w)``; R² then uses the weighted mean).  Raises
    :class:`RankDeficientError` naming the dependent columns and
    :class:`ValidationError` when there are not more observations than
    coefficients.

    When a coefficient's standard error is exactly zero its t-value is
    ``±inf`` (p = 0), or NaN if the coefficient is zero too.
    """
    names = design.names()
    x = design.matrix()
    y = design.response
    n, k = x.shape
    if k == 0:
        raise ValidationError("design has no columns")
    if n <= k:
        raise ValidationError(f"need more observations than coefficients: n={n}, k={k}")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite, positive and one per observation")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("design contains non-finite values")

    sw = np.sqrt(w)
    xw, yw = x * sw[:, None], y * sw

    for j, name in enumerate(names):
        if name != INTERCEPT and design.intercept and np.ptp(x[:, j]) == 0:
            raise RankDeficientError(
                f"column {name!r} is constant and collinear with the intercept", [INTERCEPT, name]
            )
    dependent = _dependent_columns(xw, names)
    if dependent:
        raise RankDeficientError(f"linearly dependent columns: {dependent}", dependent)

    q, r = np.linalg.qr(xw, mode="reduced")
    beta = _back_substitute(r, q.T @ yw)
    resid = yw - xw @ beta
    rss = float(resid @ resid)
    dof = n - k
    sigma2 = rss / dof
    r_inv = _back_substitute(r, np.eye(k))
    cov_diag = np.sum(r_inv * r_inv, axis=1) * sigma2
    se = np.sqrt(cov_diag)

    ybar = float(np.sum(w * y) / np.sum(w))
    tss = float(np.sum(w * (y - ybar) ** 2))
    r2 = 0.0 if tss == 0.0 else min(1.0, max(0.0, 1.0 - rss / tss))
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof

    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = beta / se
    terms = tuple(
        Term(
            name=nm,
            label=design.labels.get(nm, nm),
            coefficient=float(b),
            std_error=float(s),
            t_value=float(t),
            p_value=p_value(float(t), dof),
        )
        for nm, b, s, t in zip(names, beta, se, tvals)
    )
    return RegressionResult(design.response_name, terms, r2, adj, n, dof, weights is not None)


# ---------------------------------------------------------------------------
# regression assemblies over area profiles


def design_from_areas(areas, regressors, response="low_income_share"):
    """Build a design from AreaProfiles; ``regressors`` is ((field, label), ...)."""
    areas = sorted(areas, key=lambda a: a.geoid)
    return DesignMatrix(
        ids=[a.geoid for a in areas],
        columns={f: [a.value(f) for a in areas] for f, _ in regressors},
        response=[a.value(response) for a in areas],
        response_name=response,
        labels=dict(regressors),
    )


def _require(areas, minimum=MIN_AREAS):
    if len(areas) < minimum:
        raise ValidationError(f"regression needs at least {minimum} areas, got {len(areas)}")


def _weights(areas, weighted):
    if not weighted:
        return None
    return [a.ridership for a in sorted(areas, key=lambda a: a.geoid)]


def equity_regression(areas, wait_per_mile=False, weighted=False):
    """Low-income share regressed on the five convenience measures.

    ``wait_per_mile`` swaps transfer wait minutes for wait per network mile;
    ``weighted`` uses area ridership as WLS weights.
    """
    areas = list(areas)
    _require(areas)
    terms = tuple(WAIT_PER_MILE_TERM if (wait_per_mile and f == "transfer_wait_minutes") else (f, l) for f, l in EQUITY_TERMS)
    return ols_fit(design_from_areas(areas, terms), _weights(areas, weighted))


def purpose_regression(areas, weighted=False):
    """Low-income share regressed on trip-purpose shares.

    ``other_nonhome`` is the omitted reference category, so each purpose
    coefficient is relative to non-home trips.
    """
    areas = list(areas)
    _require(areas)
    return ols_fit(design_from_areas(areas, PURPOSE_TERMS), _weights(areas, weighted))


def reversed_regressions(areas, wait_per_mile=False):
    """One simple regression per convenience measure on the low-income share."""
    areas = list(areas)
    _require(areas)
    out = {}
    for f, label in EQUITY_TERMS:
        if wait_per_mile and f == "transfer_wait_minutes":
            f, label = WAIT_PER_MILE_TERM
        design = design_from_areas(areas, (("low_income_share", "Low-income share"),), response=f)
        out[f] = ols_fit(design)
    return out


# ---------------------------------------------------------------------------
# rendering


def _g(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return f"{v:.6g}"


def _p_text(p):
    if math.isnan(p):
        return "NA"
    if p < 2.2e-16:
        return "< 2.2e-16"
    return f"{p:.4g}"


def render_table(result, title=None):
    """Plain-text table: Explanatory Variables / Parameter / t-value / p-value."""
    head = ("Explanatory Variables", "Parameter", "t-value", "p-value")
    rows = [
        (t.label, _g(t.coefficient), _g(t.t_value), _p_text(t.p_value) + significance_stars(t.p_value))
        for t in result.terms
    ]
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(4)]
    rule = "-" * (sum(widths) + 3 * 3)
    fmt = lambda r: "   ".join(  # noqa: E731
        c.ljust(widths[i]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r)
    )
    lines = ([title] if title else []) + [rule, fmt(head), rule] + [fmt(r) for r in rows] + [rule]
    lines.append(f"Adjusted R-squared: {_g(result.adjusted_r_squared)}   R-squared: {_g(result.r_squared)}")
    lines.append(f"n = {result.n}, residual dof = {result.dof}{', ridership-weighted' if result.weighted else ''}")
    lines.append("Signif. codes: *p<0.05, **p<0.01, ***p<0.001")
    return "\n".join(lines) + "\n"


SUMMARY_ROWS = ("R-squared", "Adjusted R-squared", "n", "dof")


def write_result_csv(result, fh):
    """CSV with one row per term then summary rows (value in ``coefficient``)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["term", "label", "coefficient", "std_error", "t_value", "p_value"])
    for t in result.terms:
        w.writerow([t.name, t.label, _g(t.coefficient), _g(t.std_error), _g(t.t_value), _g(t.p_value)])
    w.writerow(["R-squared", "", _g(result.r_squared), "", "", ""])
    w.writerow(["Adjusted R-squared", "", _g(result.adjusted_r_squared), "", "", ""])
    w.writerow(["n", "", result.n, "", "", ""])
    w.writerow(["dof", "", result.dof, "", "", ""])


def read_result_csv(fh, response=""):
    def num(s):
        return math.nan if s in ("", "NA") else float(s)

    terms, summary = [], {}
    for row in csv.DictReader(fh):
        if row["term"] in SUMMARY_ROWS:
            summary[row["term"]] = num(row["coefficient"])
        else:
            terms.append(
                Term(row["term"], row["label"], num(row["coefficient"]), num(row["std_error"]),
                     num(row["t_value"]), num(row["p_value"]))
            )
    return RegressionResult(
        response, tuple(terms), summary["R-squared"], summary["Adjusted R-squared"],
        int(summary["n"]), int(summary["dof"]),
    )
