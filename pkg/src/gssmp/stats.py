"""Summary statistics and two-sample Kolmogorov-Smirnov helpers."""
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    variance: float
    std_error: float
    quantiles: dict
    min: float
    max: float

    def to_dict(self):
        d = asdict(self)
        d["quantiles"] = {f"{int(round(100 * q))}%": v for q, v in self.quantiles.items()}
        return d


def summarize(samples):
    """Mean, unbiased variance, standard error, quantiles and range.

    Raises ``ValueError`` on an empty or non-finite sample.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot summarize an empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1)) if x.size > 1 else 0.0
    qs = np.quantile(x, QUANTILES)
    return Summary(int(x.size), mean, var, float(np.sqrt(var / x.size)),
                   {q: float(v) for q, v in zip(QUANTILES, qs)}, float(x.min()), float(x.max()))


def snap(x, digits=12):
    """Round to ``digits`` significant digits.

    Laws with atoms (masses ``2**-k`` say) computed along two routes agree
    only up to rounding, and KS distances between atomic samples are very
    sensitive to how ties are broken.
    """
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(x) & (x != 0)
    mag = np.floor(np.log10(np.abs(np.where(ok, x, 1.0))))
    factor = 10.0 ** (digits - 1 - mag)
    return np.where(ok, np.round(x * factor) / factor, x)


def ks_statistic(a, b, digits=12):
    """Two-sample KS distance ``sup |F_a - F_b|`` after snapping to ``digits`` significant digits."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if digits is not None:
        a, b = snap(a, digits), snap(b, digits)
    return float(sps.ks_2samp(a, b, method="asymp").statistic)


def ks_critical(n, m, level=0.01):
    """Asymptotic critical value of the two-sample KS distance at ``level``."""
    return float(sps.kstwobign.isf(level) * np.sqrt((n + m) / (n * m)))


def ks_compare(a, b, level=0.01):
    """KS statistic, critical value and pass flag as a dict."""
    stat = ks_statistic(a, b)
    crit = ks_critical(len(a), len(b), level)
    return {"statistic": stat, "critical_value": crit, "level": level, "passed": bool(stat < crit)}


def mc_check(samples, target, n_se=3.0):
    """Mean with standard error and whether it is within ``n_se`` errors of ``target``."""
    s = summarize(samples)
    dev = abs(s.mean - target)
    ok = dev <= n_se * s.std_error if s.std_error > 0 else dev <= 1e-12 * max(1.0, abs(target))
    return {"mean": s.mean, "std_error": s.std_error, "target": float(target), "passed": bool(ok)}
