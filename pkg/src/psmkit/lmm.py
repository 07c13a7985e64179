"""Mixed-effects limits-of-agreement analysis of estimation error.

Fits the random-intercept model y ~ N(X beta, V1*Z*Z' + V2*I) by maximum
likelihood (not REML, so likelihood ratios between nested fixed-effect
models are valid), decomposes the variance, and derives 95 % limits of
agreement and per-effect likelihood-ratio tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize_scalar

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DesignError,
    InsufficientDataError,
    ParameterError,
)

LOG_2PI = math.log(2.0 * math.pi)

# Residual-variance floor keeping the covariance invertible on degenerate data.
V2_FLOOR = 1e-10

# Variance-ratio search grid: gamma = V1/V2 in [0, 10^GAMMA_LOG_MAX].
GAMMA_LOG_MIN = -8.0
GAMMA_LOG_MAX = 8.0
GAMMA_GRID_POINTS = 161


@dataclass(frozen=True)
class Design:
    """Paired differences with fixed-effect matrix and random-effect groups."""

    y: np.ndarray
    X: np.ndarray
    groups: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        X = np.atleast_2d(np.array(self.X, dtype=float))
        groups = np.array(self.groups).ravel()
        if X.shape[0] != y.size or groups.size != y.size:
            raise DesignError(
                f"inconsistent design: y has {y.size} rows, X {X.shape[0]}, "
                f"groups {groups.size}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DesignError("design contains non-finite values")
        names = self.names
        if names is None:
            names = tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DesignError(
                f"{len(names)} column names for {X.shape[1]} columns"
            )
        for arr in (y, X):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "names", tuple(names))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def n_groups(self) -> int:
        return len(set(self.groups.tolist()))

    def drop_effect(self, name: str) -> "Design":
        """Design without every column whose name matches or starts with ``name[``."""
        keep = [
            j for j, col in enumerate(self.names)
            if not (col == name or col.startswith(name + "["))
        ]
        if len(keep) == self.p:
            raise DesignError(f"no column named {name!r} to drop")
        if not keep:
            raise DesignError("cannot drop every column")
        return Design(
            self.y,
            self.X[:, keep],
            self.groups,
            names=tuple(self.names[j] for j in keep),
        )


@dataclass(frozen=True)
class MixedFit:
    """Maximum-likelihood fit: fixed effects plus the two variance components."""

    beta: np.ndarray
    v1: float
    v2: float
    loglik: float
    n_params: int

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).ravel()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if self.v1 < 0 or self.v2 <= 0:
            raise ParameterError(f"invalid variances v1={self.v1}, v2={self.v2}")
        if not math.isfinite(self.loglik):
            raise ParameterError("log-likelihood must be finite")


@dataclass(frozen=True)
class LoAReport:
    """Mean bias and 95 % limits of agreement for one estimation method."""

    bias: float
    sd: float
    lower: float
    upper: float
    method: str = ""

    def __post_init__(self):
        if self.sd < 0 or self.lower > self.upper:
            raise ParameterError(
                f"invalid agreement limits: sd={self.sd}, "
                f"[{self.lower}, {self.upper}]"
            )

    @classmethod
    def from_bias_sd(cls, bias: float, sd: float, method: str = "") -> "LoAReport":
        if sd < 0:
            raise ParameterError("standard deviation cannot be negative")
        return cls(
            bias=float(bias),
            sd=float(sd),
            lower=float(bias) - 1.96 * float(sd),
            upper=float(bias) + 1.96 * float(sd),
            method=method,
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "bias": self.bias,
            "sd": self.sd,
            "lower": self.lower,
            "upper": self.upper,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class LrtResult:
    """Likelihood-ratio statistic against the chi-square reference."""

    chi2: float
    df: int
    p: float

    def __post_init__(self):
        if self.chi2 < 0 or self.df < 1 or not 0.0 <= self.p <= 1.0:
            raise ParameterError(
                f"invalid test result: chi2={self.chi2}, df={self.df}, p={self.p}"
            )

    def to_dict(self) -> dict:
        return {"chi2": self.chi2, "df": self.df, "p": self.p}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _group_indicator(groups: np.ndarray) -> np.ndarray:
    _, codes = np.unique(groups, return_inverse=True)
    q = codes.max() + 1
    Z = np.zeros((codes.size, q))
    Z[np.arange(codes.size), codes] = 1.0
    return Z


def _profile_at_gamma(y, X, ZZt, gamma):
    """GLS beta and profiled sigma^2 for W = I + gamma*Z*Z'.

    Returns (beta, sigma2_unclamped, loglik) where the log-likelihood is
    evaluated with sigma2 clamped at V2_FLOOR.
    """
    n = y.size
    W = gamma * ZZt + np.eye(n)
    cho = cho_factor(W, lower=True)
    logdet_w = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    Xw = cho_solve(cho, X)
    yw = cho_solve(cho, y)
    beta = np.linalg.solve(X.T @ Xw, X.T @ yw)
    r = y - X @ beta
    quad = float(r @ cho_solve(cho, r))
    sigma2 = quad / n
    v2 = max(sigma2, V2_FLOOR)
    loglik = -0.5 * (n * LOG_2PI + logdet_w + n * math.log(v2) + quad / v2)
    return beta, sigma2, loglik


def loglik_mixed(y, X, groups, beta, v1, v2) -> float:
    """Gaussian log-density of y under N(X beta, v1*Z*Z' + v2*I)."""
    y = np.asarray(y, dtype=float).ravel()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = _group_indicator(np.asarray(groups))
    V = v1 * (Z @ Z.T) + v2 * np.eye(y.size)
    cho = cho_factor(V, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    r = y - X @ np.asarray(beta, dtype=float).ravel()
    quad = float(r @ cho_solve(cho, r))
    return -0.5 * (y.size * LOG_2PI + logdet + quad)


def fit_mixed(design: Design) -> MixedFit:
    """ML fit of the random-intercept model by profiling the variance ratio.

    beta and sigma^2 have closed forms given gamma = V1/V2, leaving a 1-D
    maximization over gamma >= 0 (coarse log grid, then bounded
    refinement).  V1 clamps at 0 when the optimum sits on the boundary.
    """
    y, X = design.y, design.X
    n, p = design.n, design.p
    if design.n_groups() < 2:
        raise DesignError("need at least 2 distinct groups to split the variance")
    if n <= p:
        raise InsufficientDataError(f"{n} observations cannot identify {p} effects")
    if np.linalg.matrix_rank(X) < p:
        raise DesignError("fixed-effect matrix is rank deficient")

    Z = _group_indicator(design.groups)
    ZZt = Z @ Z.T

    gammas = np.concatenate(
        ([0.0], np.logspace(GAMMA_LOG_MIN, GAMMA_LOG_MAX, GAMMA_GRID_POINTS))
    )
    best = None
    for gamma in gammas:
        beta, sigma2, loglik = _profile_at_gamma(y, X, ZZt, gamma)
        if not math.isfinite(loglik):
            raise ConvergenceError(
                f"log-likelihood is not finite at gamma={gamma:.3g}"
            )
        if best is None or loglik > best[2] + 1e-12:
            best = (gamma, beta, loglik, sigma2)

    gamma_star = best[0]
    if gamma_star > 0.0:
        i = int(np.searchsorted(gammas, gamma_star))
        lo = gammas[max(i - 1, 1)]
        hi = gammas[min(i + 1, gammas.size - 1)]
        if lo < hi:
            result = minimize_scalar(
                lambda u: -_profile_at_gamma(y, X, ZZt, math.exp(u))[2],
                bounds=(math.log(lo), math.log(hi)),
                method="bounded",
                options={"xatol": 1e-12},
            )
            if not result.success:
                raise ConvergenceError(
                    f"variance-ratio refinement failed: {result.message}"
                )
            refined = math.exp(result.x)
            beta, sigma2, loglik = _profile_at_gamma(y, X, ZZt, refined)
            if loglik > best[2]:
                best = (refined, beta, loglik, sigma2)

    gamma, beta, _, sigma2 = best
    v2 = max(sigma2, V2_FLOOR)
    v1 = gamma * v2
    # Report the density evaluated at the final (possibly clamped) components
    # so the fit's fields are exactly self-consistent.
    loglik = loglik_mixed(y, X, design.groups, beta, v1, v2)
    return MixedFit(beta=beta, v1=v1, v2=v2, loglik=loglik, n_params=p + 2)


def fit_random_intercept(y, groups) -> MixedFit:
    """Intercept-only fit; beta[0] is the mean bias."""
    y = np.asarray(y, dtype=float).ravel()
    design = Design(y, np.ones((y.size, 1)), groups, names=("intercept",))
    return fit_mixed(design)


def loa_95(full_fit: MixedFit, bias_fit: MixedFit, method: str = "") -> LoAReport:
    """Combine the full fit's variances with the bias fit's intercept.

    SD = sqrt(V1 + V2) from the full model; bias is the intercept of the
    fixed-effect-free model; limits are bias -/+ 1.96*SD.
    """
    sd = math.sqrt(full_fit.v1 + full_fit.v2)
    return LoAReport.from_bias_sd(float(bias_fit.beta[0]), sd, method=method)


def likelihood_ratio_test(full: MixedFit, reduced: MixedFit) -> LrtResult:
    """Nested-model comparison: 2*delta-loglik against chi-square."""
    df = full.n_params - reduced.n_params
    if df <= 0:
        raise DesignError(
            f"reduced model must have fewer parameters than the full model "
            f"({reduced.n_params} vs {full.n_params})"
        )
    chi2 = max(0.0, 2.0 * (full.loglik - reduced.loglik))
    return LrtResult(chi2=chi2, df=df, p=chi2_sf(chi2, df))


# ---------------------------------------------------------------------------
# Chi-square survival function via the regularized incomplete gamma function.
# Series expansion below the a+1 crossover, Lentz continued fraction above;
# absolute error well under 1e-10 over the df <= 10, x <= 200 range used here.
# ---------------------------------------------------------------------------

_GAMMAINC_MAX_ITER = 500
_GAMMAINC_EPS = 1e-15


def _gamma_series_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x), series form (x < a + 1)."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_GAMMAINC_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _GAMMAINC_EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError(f"incomplete gamma series stalled at a={a}, x={x}")


def _gamma_cf_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x), continued fraction (x >= a + 1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMAINC_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMAINC_EPS:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError(f"incomplete gamma fraction stalled at a={a}, x={x}")


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    x = float(x)
    if df != int(df) or df < 1:
        raise ParameterError(f"degrees of freedom must be an integer >= 1, got {df}")
    if x < 0 or not math.isfinite(x):
        raise ParameterError(f"statistic must be finite and >= 0, got {x}")
    if x == 0.0:
        return 1.0
    a = df / 2.0
    half = x / 2.0
    if half < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_series_lower(a, half)))
    return min(1.0, max(0.0, _gamma_cf_upper(a, half)))


def pearson_r(a, b) -> float:
    """Product-moment correlation of two equal-length, non-constant vectors."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ParameterError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise InsufficientDataError("correlation needs at least 2 pairs")
    da = a - a.mean()
    db = b - b.mean()
    ssa = float(da @ da)
    ssb = float(db @ db)
    if ssa == 0.0 or ssb == 0.0:
        raise DegenerateInputError("correlation undefined for a constant input")
    r = float(da @ db) / math.sqrt(ssa * ssb)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class EffectExclusion:
    """One row of the per-effect analysis: refit without the effect, test it."""

    effect: str
    loa: LoAReport
    lrt: LrtResult

    def to_dict(self) -> dict:
        return {"effect": self.effect, **self.loa.to_dict(), **self.lrt.to_dict()}


def effect_names(design: Design) -> list[str]:
    """Distinct non-intercept effect names, multi-column codings collapsed."""
    seen = []
    for col in design.names:
        base = col.split("[", 1)[0]
        if base == "intercept" or base in seen:
            continue
        seen.append(base)
    return seen


def exclusion_analysis(
    design: Design, method: str = ""
) -> tuple[LoAReport, list[EffectExclusion]]:
    """Full-model LoA plus, per fixed effect, the excluded-effect refit and LRT.

    Each exclusion row reports the intercept-only mean bias together with
    the reduced model's combined variance, and the likelihood-ratio test
    of the dropped effect (ML fits throughout).
    """
    full = fit_mixed(design)
    bias = fit_random_intercept(design.y, design.groups)
    report = loa_95(full, bias, method=method)
    rows = []
    for name in effect_names(design):
        reduced = fit_mixed(design.drop_effect(name))
        lrt = likelihood_ratio_test(full, reduced)
        rows.append(
            EffectExclusion(
                effect=name,
                loa=loa_95(reduced, bias, method=method),
                lrt=lrt,
            )
        )
    return report, rows
