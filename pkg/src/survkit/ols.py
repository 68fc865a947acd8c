"""Ordinary least squares with classical inference, for the vulnerability-index regression."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError, ValidationError
from .special import f_sf, student_t_two_sided

# Regressors of the published MVI regression, in its printed order.
MVI_REGRESSORS = (
    "Natural_risk",
    "Commercial_risk",
    "Financial_risk",
    "Endogenous_risk",
    "Vul_Inherent",
    "Vul_Companies",
    "Vul_Homes",
    "Capabilities_State",
    "Social_Cohesion_Capabilities",
)


@dataclass(frozen=True)
class OLSFit:
    names: tuple  # "(Intercept)" first
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    f_df: tuple
    f_p_value: float
    residual_scale: float
    n_used: int
    n_dropped: int
    df_resid: int
    residuals: np.ndarray
    response: str = "mvi"

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:]

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "coefficients": [
                {
                    "term": name,
                    "estimate": float(b),
                    "std_error": float(se),
                    "t_value": float(t),
                    "p_value": float(p),
                    "signif": significance_stars(p),
                }
                for name, b, se, t, p in zip(
                    self.names, self.coefficients, self.std_errors, self.t_values, self.p_values
                )
            ],
            "residual_scale": self.residual_scale,
            "df_resid": self.df_resid,
            "n_used": self.n_used,
            "n_dropped": self.n_dropped,
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "f_statistic": self.f_statistic,
            "f_df": list(self.f_df),
            "f_p_value": self.f_p_value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def significance_stars(p: float) -> str:
    if not p == p:  # NaN
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


def ols_arrays(y, X, names=None, n_dropped=0, response="y") -> OLSFit:
    """OLS of ``y`` on ``X`` plus an intercept, via Householder QR."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    n, k = X.shape
    names = tuple(names) if names is not None else tuple(f"x{j + 1}" for j in range(k))
    if n <= k + 1:
        raise ValidationError(f"{n} usable rows is too few for {k} regressors plus an intercept")
    Z = np.column_stack([np.ones(n), X])
    Q, R = np.linalg.qr(Z)
    diag = np.abs(np.diag(R))
    col_norm = np.linalg.norm(Z, axis=0)
    for j in range(k + 1):
        if diag[j] <= 1e-10 * max(col_norm[j], 1e-300):
            label = "(Intercept)" if j == 0 else names[j - 1]
            raise ValidationError(f"design matrix is rank deficient: {label!r} is linearly dependent on earlier columns")
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - Z @ beta
    df = n - k - 1
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    sigma2 = rss / df
    Rinv = np.linalg.solve(R, np.eye(k + 1))
    se = np.sqrt(sigma2 * np.sum(Rinv ** 2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = np.array([student_t_two_sided(v, df) if np.isfinite(v) else (0.0 if np.isinf(v) else math.nan) for v in t])
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / df
    if k > 0 and rss > 0:
        F = ((tss - rss) / k) / sigma2
        F_p = f_sf(F, k, df)
    else:
        F = math.inf if k > 0 else math.nan
        F_p = 0.0 if k > 0 else math.nan
    return OLSFit(
        ("(Intercept)", *names), beta, se, t, p, r2, adj, F, (k, df), F_p,
        math.sqrt(sigma2), n, int(n_dropped), df, resid, response,
    )


def fit_ols(ds, response: str = "mvi", regressors=None) -> OLSFit:
    """Regress ``response`` on ``regressors`` after listwise deletion of incomplete rows."""
    regressors = tuple(MVI_REGRESSORS if regressors is None else regressors)
    if response != "mvi" and response not in ds.feature_names:
        raise SchemaError(response)
    for r in regressors:
        if r not in ds.feature_names:
            raise SchemaError(r)
    y = ds.column(response)
    X = np.column_stack([ds.column(r) for r in regressors]) if regressors else np.zeros((len(ds), 0))
    keep = ~(np.isnan(y) | np.isnan(X).any(axis=1))
    return ols_arrays(y[keep], X[keep], regressors, int((~keep).sum()), response)


def predict_ols(fit: OLSFit, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != fit.slopes.shape:
        raise ValidationError(f"regressor vector has shape {x.shape}, expected {fit.slopes.shape}")
    return float(fit.intercept + fit.slopes @ x)


def _fmt_p(p):
    if p != p:
        return "NA"
    if p < 2e-16:
        return "<2e-16"
    return f"{p:.6f}" if p >= 1e-4 else f"{p:.2e}"


def format_fit(fit: OLSFit, formula: str | None = None) -> str:
    """Console summary laid out like a classical regression printout."""
    lines = []
    if formula:
        lines += [f"Call: {formula}", ""]
    q = np.quantile(fit.residuals, [0, 0.25, 0.5, 0.75, 1.0])
    lines.append("Residuals:")
    lines.append("".join(f"{h:>12}" for h in ("Min", "1Q", "Median", "3Q", "Max")))
    lines.append("".join(f"{v:>12.7f}" for v in q))
    lines += ["", "Coefficients:"]
    width = max(len(n) for n in fit.names)
    lines.append(f"{'':<{width}} {'Estimate':>10} {'Std. Error':>11} {'t value':>8} {'Pr(>|t|)':>10}")
    for name, b, se, t, p in zip(fit.names, fit.coefficients, fit.std_errors, fit.t_values, fit.p_values):
        lines.append(
            f"{name:<{width}} {b:>10.6f} {se:>11.6f} {t:>8.3f} {_fmt_p(p):>10} {significance_stars(p)}".rstrip()
        )
    lines += [
        "---",
        "Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1",
        "",
        f"s: {fit.residual_scale:.4g} on {fit.df_resid} degrees of freedom",
    ]
    if fit.n_dropped:
        lines.append(f"({fit.n_dropped} observations deleted due to missingness)")
    lines.append(f"Multiple R-squared: {fit.r_squared:.4f}, Adjusted R-squared: {fit.adj_r_squared:.4f}")
    k, df = fit.f_df
    lines.append(f"F-statistic: {fit.f_statistic:.4g} on {k} and {df} DF, p-value: {fit.f_p_value:.4g}")
    return "\n".join(lines)


# Published MVI regression on the unreleased 33-country table: (estimate,
# std. error, t value, p value) per term, plus the fit summary. Reference
# numbers only; no dataset in this package reproduces them.
REFERENCE_MVI_FIT = {
    "coefficients": {
        "(Intercept)": (0.169364, 0.063444, 2.669, 0.015631),
        "Natural_risk": (0.126599, 0.016991, 7.451, 6.65e-07),
        "Commercial_risk": (-0.047992, 0.047499, -1.010, 0.325703),
        "Financial_risk": (0.070071, 0.021297, 3.290, 0.004069),
        "Endogenous_risk": (0.047028, 0.049875, 0.943, 0.358206),
        "Vul_Inherent": (0.000374, 0.050679, 0.007, 0.994192),
        "Vul_Companies": (0.128304, 0.038567, 3.327, 0.003753),
        "Vul_Homes": (0.157584, 0.034364, 4.586, 0.000229),
        "Capabilities_State": (0.004730, 0.055431, 0.085, 0.932943),
        "Social_Cohesion_Capabilities": (0.167742, 0.032396, 5.178, 6.33e-05),
    },
    "residual_scale": 0.01837,
    "df_resid": 18,
    "n_rows": 33,
    "n_dropped": 5,
    "r_squared": 0.9617,
    "adj_r_squared": 0.9425,
    "f_statistic": 50.21,
    "f_p_value": 6.368e-11,
}
