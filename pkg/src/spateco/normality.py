"""Univariate normality tests: Shapiro-Wilk (AS R94) and Ryan-Joiner.

Both tests measure how well the sample's order statistics track normal
scores. Shapiro-Wilk reports a point p-value via Royston's normalizing
transformation; Ryan-Joiner reports a correlation statistic judged
against tabled critical values, with p given as an interval endpoint
when it falls outside the tabled range.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DegenerateScaleError, UnsupportedSizeError

RJ_ALPHAS = (0.10, 0.05, 0.01)


@dataclass(frozen=True)
class NormalityResult:
    test: str
    statistic: float
    p_value: float
    n: int
    alpha: float
    decision: str  # "reject_normality" | "fail_to_reject"
    p_bound: str = ""  # "", ">=" or "<" when p_value is an interval endpoint

    def as_dict(self):
        return {
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "p_bound": self.p_bound,
            "n": self.n,
            "alpha": self.alpha,
            "decision": self.decision,
        }


def _check_sample(values, min_n, max_n, test):
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{test}: sample contains non-finite values")
    if n < min_n or n > max_n:
        raise UnsupportedSizeError(f"{test} supports {min_n} <= n <= {max_n}, got {n}")
    if x[0] == x[-1]:
        raise DegenerateScaleError(f"{test}: constant sample")
    return x, n


def _sw_coefficients(n):
    """Approximate weights a_1..a_n of the W statistic (Royston 1995)."""
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    m = norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ssq = float(np.sum(m * m))
    c = m / math.sqrt(ssq)
    u = 1.0 / math.sqrt(n)
    # polynomial corrections for the largest one (n <= 5) or two weights
    a_n = (c[-1] + 0.221157 * u - 0.147981 * u**2 - 2.071190 * u**3
           + 4.434685 * u**4 - 2.706056 * u**5)
    a = np.empty(n)
    if n <= 5:
        phi = (ssq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
        a[1:-1] = m[1:-1] / math.sqrt(phi)
        a[-1] = a_n
        a[0] = -a_n
    else:
        a_n1 = (c[-2] + 0.042981 * u - 0.293762 * u**2 - 1.752461 * u**3
                + 5.682633 * u**4 - 3.582633 * u**5)
        phi = (ssq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2)
        a[2:-2] = m[2:-2] / math.sqrt(phi)
        a[-1] = a_n
        a[-2] = a_n1
        a[0] = -a_n
        a[1] = -a_n1
    return a


def _sw_p_value(w, n):
    """Significance of W via the piecewise normalizing transformation."""
    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return min(max(p, 0.0), 1.0)
    w1 = 1.0 - w
    if w1 <= 0.0:
        return 1.0
    y = math.log(w1)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        if y >= gamma:
            return 1e-19
        y = -math.log(gamma - y)
        mu = 0.5440 - 0.39978 * n + 0.025054 * n**2 - 0.0006714 * n**3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n**2 - 0.0020322 * n**3)
    else:
        ln_n = math.log(n)
        mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n**2 + 0.0038915 * ln_n**3
        sigma = math.exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n**2)
    return float(norm.sf((y - mu) / sigma))


def shapiro_wilk(values, alpha=0.05):
    """Shapiro-Wilk W test for 3 <= n <= 5000."""
    x, n = _check_sample(values, 3, 5000, "shapiro_wilk")
    a = _sw_coefficients(n)
    num = float(np.dot(a, x)) ** 2
    den = float(np.sum((x - x.mean()) ** 2))
    w = min(num / den, 1.0)
    p = _sw_p_value(w, n)
    decision = "reject_normality" if p < alpha else "fail_to_reject"
    return NormalityResult("shapiro_wilk", w, p, n, alpha, decision)


def _rj_critical_value(n, alpha):
    """Closed-form critical-value approximations for the RJ correlation."""
    rn = 1.0 / math.sqrt(n)
    if alpha == 0.10:
        return 1.0071 - 0.1371 * rn - 0.3682 / n + 0.7780 / n**2
    if alpha == 0.05:
        return 1.0063 - 0.1288 * rn - 0.6118 / n + 1.3505 / n**2
    if alpha == 0.01:
        return 0.9963 - 0.0211 * rn - 1.4106 / n + 3.1791 / n**2
    raise ValueError(f"no tabled critical values for alpha={alpha}; use one of {RJ_ALPHAS}")


def ryan_joiner(values, alpha=0.05):
    """Ryan-Joiner correlation test for n >= 4.

    The statistic is the Pearson correlation between the order statistics
    and normal scores at plotting positions (i - 3/8)/(n + 1/4). The
    p-value interpolates between the tabled levels 0.10/0.05/0.01 and is
    reported as a bound (p >= .100 or p < .010) outside that range.
    """
    x, n = _check_sample(values, 4, 10**9, "ryan_joiner")
    b = norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    r = float(np.corrcoef(x, b)[0, 1])
    cv = {a: _rj_critical_value(n, a) for a in RJ_ALPHAS}
    if r >= cv[0.10]:
        p, bound = 0.100, ">="
    elif r < cv[0.01]:
        p, bound = 0.010, "<"
    elif r >= cv[0.05]:
        # between the 10% and 5% critical values
        frac = (cv[0.10] - r) / (cv[0.10] - cv[0.05])
        p, bound = 0.10 - frac * 0.05, ""
    else:
        frac = (cv[0.05] - r) / (cv[0.05] - cv[0.01])
        p, bound = 0.05 - frac * 0.04, ""
    decision = "reject_normality" if r < cv[alpha] else "fail_to_reject"
    return NormalityResult("ryan_joiner", r, p, n, alpha, decision, p_bound=bound)
