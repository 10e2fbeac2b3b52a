"""Cobb-Douglas growth evaluation/fitting and group-wise OLS reports.

The growth function relates digital-activity level A and specialized-
knowledge level K to a growth response Y. Three evaluation modes exist
because the source material states the function three different ways;
the constrained two-factor form ("canonical", Y = K^alpha * A^(1-alpha))
is the default.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import InsufficientDataError, RankError

MODES = ("canonical", "product", "as_published")


def cobb_douglas_eval(a, k, alpha=0.5, mode="canonical"):
    """Evaluate the growth function elementwise.

    canonical: Y = K^alpha * A^(1-alpha) (requires A, K > 0)
    product:   Y = A * K
    as_published: Y = A^K (requires A > 0)
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    if mode == "product":
        return a * k
    if mode == "as_published":
        if np.any(a <= 0):
            raise ValueError("as_published mode requires A > 0")
        return a**k
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if np.any(a <= 0) or np.any(k <= 0):
        raise ValueError("canonical mode requires A > 0 and K > 0")
    return k**alpha * a ** (1.0 - alpha)


@dataclass(frozen=True)
class CobbDouglasFit:
    alpha: float
    scale: float
    residual_sd: float
    r_squared: float
    n: int
    unconstrained: dict  # coefficients of the two-exponent variant, or error note

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "scale": self.scale,
            "residual_sd": self.residual_sd,
            "r_squared": self.r_squared,
            "n": self.n,
            "unconstrained": self.unconstrained,
        }


def cobb_douglas_fit(y, a, k):
    """Log-linear least squares under the exponents-sum-to-one constraint.

    log Y - log A = log c + alpha (log K - log A), clipping alpha into
    [0, 1]. Also reports the unconstrained two-exponent regression;
    collinear log A / log K makes only that variant fail.
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    if y.size < 3:
        raise InsufficientDataError(f"need >= 3 observations, got {y.size}")
    if np.any(y <= 0) or np.any(a <= 0) or np.any(k <= 0):
        raise ValueError("all of Y, A, K must be positive for log-linear fitting")
    ly, la, lk = np.log(y), np.log(a), np.log(k)

    x = lk - la
    resp = ly - la
    if np.ptp(x) == 0:
        raise RankError("log K - log A is constant; alpha is unidentified")
    design = np.column_stack([np.ones_like(x), x])
    coef, _, _, _ = np.linalg.lstsq(design, resp, rcond=None)
    intercept, alpha = float(coef[0]), float(coef[1])
    alpha = min(max(alpha, 0.0), 1.0)
    fitted = intercept + alpha * x
    resid = resp - fitted
    ss_tot = float(np.sum((resp - resp.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    residual_sd = float(np.sqrt(resid @ resid / max(y.size - 2, 1)))

    try:
        design_u = np.column_stack([np.ones_like(la), lk, la])
        if np.linalg.matrix_rank(design_u) < 3:
            raise RankError("log A collinear with log K")
        coef_u, _, _, _ = np.linalg.lstsq(design_u, ly, rcond=None)
        unconstrained = {
            "scale": math.exp(float(coef_u[0])),
            "k_exponent": float(coef_u[1]),
            "a_exponent": float(coef_u[2]),
        }
    except RankError as exc:
        unconstrained = {"error": str(exc)}

    return CobbDouglasFit(
        alpha=alpha,
        scale=math.exp(intercept),
        residual_sd=residual_sd,
        r_squared=r2,
        n=int(y.size),
        unconstrained=unconstrained,
    )


@dataclass(frozen=True)
class RegressionReport:
    group: str
    predictor: str
    response: str
    year: int
    slope: float
    intercept: float
    r_squared: float
    p_value: float
    n: int
    note: str = ""

    def as_dict(self):
        return {
            "group": self.group,
            "predictor": self.predictor,
            "response": self.response,
            "year": self.year,
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "p_value": self.p_value,
            "n": self.n,
            "note": self.note,
        }


def simple_ols(x, y):
    """Slope, intercept, R^2, and two-tailed slope p-value (t with n-2 df)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"need >= 3 paired observations, got {n}")
    if np.ptp(x) == 0:
        raise RankError("predictor has zero variance")
    res = stats.linregress(x, y)
    return {
        "slope": float(res.slope),
        "intercept": float(res.intercept),
        "r_squared": float(res.rvalue**2),
        "p_value": float(res.pvalue),
        "n": int(n),
    }


def group_ols(dataset, pairs, years=None, grouping="microregion"):
    """Simple OLS per (group, predictor->response pair, year).

    grouping: "microregion" (one report per microregion) or "mesoregion"
    (all regions pooled into one group). Slices failing the preconditions
    produce a null row with the reason instead of an error. Rows come
    back sorted by (group, pair, year).
    """
    if grouping not in ("microregion", "mesoregion"):
        raise ValueError(f"unknown grouping {grouping!r}")
    if years is None:
        years = dataset.years
    if grouping == "mesoregion":
        groups = {"all": list(range(len(dataset.regions)))}
    else:
        groups = {}
        for i, region in enumerate(dataset.regions):
            groups.setdefault(region.microregion, []).append(i)

    reports = []
    for group in sorted(groups):
        rows = groups[group]
        for predictor, response in pairs:
            jp = dataset.indicators.index(predictor)
            jr = dataset.indicators.index(response)
            for year in years:
                kk = dataset.years.index(year)
                xv = dataset.values[rows, jp, kk]
                yv = dataset.values[rows, jr, kk]
                mask = np.isfinite(xv) & np.isfinite(yv)
                try:
                    fit = simple_ols(xv[mask], yv[mask])
                    reports.append(RegressionReport(
                        group, predictor, response, year,
                        fit["slope"], fit["intercept"], fit["r_squared"],
                        fit["p_value"], fit["n"]))
                except (InsufficientDataError, RankError) as exc:
                    reports.append(RegressionReport(
                        group, predictor, response, year,
                        math.nan, math.nan, math.nan, math.nan,
                        int(mask.sum()), note=str(exc)))
    return reports
