"""Normality tests on score distributions and OLS with a mean-response CI band.

The Kolmogorov-Smirnov and Anderson-Darling statistics are computed directly
from their defining formulas against a normal with sample-estimated mean and
standard deviation (the usual applied-report convention, despite the
Lilliefors caveat; flagged in the report notes). Shapiro-Wilk delegates to
the Royston approximation as implemented in scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats as sps

from .errors import ValidationError

SIGNIFICANCE_LEVELS = (0.15, 0.10, 0.05, 0.025, 0.01)

# Asymptotic Anderson-Darling critical values for a normal with estimated
# parameters at the significance levels above (Stephens' table); the
# small-sample factor is applied to the statistic instead.
_AD_CRITICAL = (0.576, 0.656, 0.787, 0.918, 1.092)


@dataclass(frozen=True)
class NormalityReport:
    test: str
    statistic: float
    n: int
    p_value: float | None = None
    critical_values: tuple | None = None
    rejected: dict | None = None
    notes: str = ""

    def rejects_at(self, level: float = 0.05) -> bool:
        return self.rejected[level]

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "n": self.n,
            "p_value": self.p_value,
            "significance_levels": list(SIGNIFICANCE_LEVELS),
            "critical_values": None if self.critical_values is None else list(self.critical_values),
            "rejected": {str(level): bool(flag) for level, flag in self.rejected.items()},
            "notes": self.notes,
        }


def _standardize(sample) -> tuple[np.ndarray, int]:
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = len(x)
    mu = x.mean()
    sigma = x.std(ddof=1)
    if not sigma > 0:
        raise ValidationError("sample is degenerate (zero variance)")
    return (x - mu) / sigma, n


def ks_normality(sample) -> NormalityReport:
    """Kolmogorov-Smirnov test against N(mu_hat, sigma_hat)."""
    x = np.asarray(sample, dtype=np.float64)
    if len(x) < 5:
        raise ValidationError("Kolmogorov-Smirnov needs n >= 5")
    z, n = _standardize(x)
    cdf = sps.norm.cdf(z)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    d = float(max(d_plus, d_minus))
    p = float(special.kolmogorov(np.sqrt(n) * d))
    return NormalityReport(
        test="kolmogorov_smirnov",
        statistic=d,
        n=n,
        p_value=p,
        rejected={level: p < level for level in SIGNIFICANCE_LEVELS},
        notes="normal parameters estimated from the sample; asymptotic Kolmogorov p-value",
    )


def shapiro_wilk(sample) -> NormalityReport:
    """Shapiro-Wilk W with p-value via the Royston approximation."""
    x = np.asarray(sample, dtype=np.float64)
    if not 3 <= len(x) <= 5000:
        raise ValidationError(f"Shapiro-Wilk supports 3 <= n <= 5000, got n={len(x)}")
    if not np.std(x, ddof=1) > 0:
        raise ValidationError("sample is degenerate (zero variance)")
    w, p = sps.shapiro(x)
    return NormalityReport(
        test="shapiro_wilk",
        statistic=float(w),
        n=len(x),
        p_value=float(p),
        rejected={level: p < level for level in SIGNIFICANCE_LEVELS},
        notes="Royston approximation",
    )


def anderson_darling(sample) -> NormalityReport:
    """Anderson-Darling A^2 with the small-sample adjustment.

    The adjusted statistic A*^2 = A^2 * (1 + 4/n - 25/n^2) is compared
    against the asymptotic normal-case critical values.
    """
    x = np.asarray(sample, dtype=np.float64)
    if len(x) < 8:
        raise ValidationError("Anderson-Darling needs n >= 8")
    z, n = _standardize(x)
    cdf = np.clip(sps.norm.cdf(z), 1e-15, 1 - 1e-15)
    i = np.arange(1, n + 1)
    a2 = float(-n - np.mean((2 * i - 1) * (np.log(cdf) + np.log(1 - cdf[::-1]))))
    adjusted = a2 * (1 + 4.0 / n - 25.0 / n**2)
    return NormalityReport(
        test="anderson_darling",
        statistic=a2,
        n=n,
        critical_values=_AD_CRITICAL,
        rejected={
            level: adjusted > crit for level, crit in zip(SIGNIFICANCE_LEVELS, _AD_CRITICAL)
        },
        notes=f"adjusted statistic {adjusted!r} compared to asymptotic critical values",
    )


def normality_battery(sample) -> list[NormalityReport]:
    return [ks_normality(sample), shapiro_wilk(sample), anderson_darling(sample)]


@dataclass(frozen=True)
class RegressionFit:
    """OLS of y on x with a mean-response confidence band."""

    slope: float
    intercept: float
    residual_std: float
    n: int
    x_mean: float
    sxx: float
    ci_level: float = 0.95

    def predict(self, x) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(x, dtype=np.float64)

    def band(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(fit, lower, upper) of the mean response at each x."""
        x = np.asarray(x, dtype=np.float64)
        fit = self.predict(x)
        alpha = 1.0 - self.ci_level
        t = float(sps.t.ppf(1 - alpha / 2, self.n - 2))
        half = t * self.residual_std * np.sqrt(1.0 / self.n + (x - self.x_mean) ** 2 / self.sxx)
        return fit, fit - half, fit + half

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_std": self.residual_std,
            "n": self.n,
            "x_mean": self.x_mean,
            "sxx": self.sxx,
            "ci_level": self.ci_level,
        }


def ols_with_ci(x, y, level: float = 0.95) -> RegressionFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValidationError(f"length mismatch: {len(x)} x values vs {len(y)} y values")
    n = len(x)
    if n < 3:
        raise ValidationError("regression needs n >= 3")
    if not 0 < level < 1:
        raise ValidationError("confidence level must lie in (0, 1)")
    x_mean = float(x.mean())
    sxx = float(np.sum((x - x_mean) ** 2))
    if sxx <= 0:
        raise ValidationError("x values are all equal; slope is undefined")
    slope = float(np.sum((x - x_mean) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x_mean)
    residuals = y - (intercept + slope * x)
    sse = float(np.sum(residuals**2))
    residual_std = float(np.sqrt(max(sse, 0.0) / (n - 2)))
    return RegressionFit(
        slope=slope,
        intercept=intercept,
        residual_std=residual_std,
        n=n,
        x_mean=x_mean,
        sxx=sxx,
        ci_level=level,
    )


def save_band_csv(fitresult: RegressionFit, x, path) -> None:
    """Write (x, fit, lo, hi) rows at sorted unique x for plotting."""
    grid = np.unique(np.asarray(x, dtype=np.float64))
    fit, lo, hi = fitresult.band(grid)
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,fit,lo,hi\n")
        for xi, fi, li, hi_i in zip(grid, fit, lo, hi):
            fh.write(f"{repr(float(xi))},{repr(float(fi))},{repr(float(li))},{repr(float(hi_i))}\n")
