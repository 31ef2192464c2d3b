"""Two-factor categorical linear model for pair-count datasets.

``count ~ mu + alpha_i + beta_j [+ gamma_ij]`` with reference-cell coding:
the smallest level of each factor is the reference and its coefficients
are exactly zero.  Fits use a Householder QR of the dummy design, which
also yields the leverages needed by the HC3 covariance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .special import chi2_sf, f_sf


class DegenerateDesignError(ValueError):
    """The design matrix is rank deficient (a factor level or cell is missing)."""


@dataclass(frozen=True)
class PairObservation:
    i: int
    j: int
    k: int
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("pair counts are nonnegative")


class PairDataset:
    """Observations N(i, j)^(k) held as parallel arrays."""

    def __init__(self, i, j, k, count):
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.k = np.asarray(k, dtype=np.int64)
        self.y = np.asarray(count, dtype=np.float64)
        n = self.y.size
        if not (self.i.size == self.j.size == self.k.size == n):
            raise ValueError("observation arrays must have equal length")
        keys = set(zip(self.i.tolist(), self.j.tolist(), self.k.tolist()))
        if len(keys) != n:
            raise ValueError("at most one observation per (i, j, k)")

    @classmethod
    def from_observations(cls, observations: Iterable[PairObservation]) -> "PairDataset":
        obs = list(observations)
        return cls([o.i for o in obs], [o.j for o in obs], [o.k for o in obs],
                   [o.count for o in obs])

    @classmethod
    def from_matrices(cls, matrices: Sequence) -> "PairDataset":
        """One observation per cell of each trial's matrix; ids are 1-based."""
        mats = [np.asarray(getattr(m, "counts", m)) for m in matrices]
        if not mats:
            raise ValueError("need at least one matrix")
        a, b = mats[0].shape
        ii, jj = np.meshgrid(np.arange(1, a + 1), np.arange(1, b + 1), indexing="ij")
        i = np.tile(ii.ravel(), len(mats))
        j = np.tile(jj.ravel(), len(mats))
        k = np.repeat(np.arange(1, len(mats) + 1), a * b)
        return cls(i, j, k, np.concatenate([m.ravel() for m in mats]))

    def __len__(self) -> int:
        return int(self.y.size)

    def observations(self) -> list[PairObservation]:
        return [PairObservation(int(a), int(b), int(c), int(round(y)))
                for a, b, c, y in zip(self.i, self.j, self.k, self.y)]

    def mean_matrix(self) -> np.ndarray:
        """Cell means over trials, indexed by level position."""
        li, lj = np.unique(self.i), np.unique(self.j)
        ri, rj = np.searchsorted(li, self.i), np.searchsorted(lj, self.j)
        total = np.zeros((li.size, lj.size))
        n = np.zeros((li.size, lj.size))
        np.add.at(total, (ri, rj), self.y)
        np.add.at(n, (ri, rj), 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return total / n

    def cell_counts(self) -> np.ndarray:
        li, lj = np.unique(self.i), np.unique(self.j)
        n = np.zeros((li.size, lj.size), dtype=np.int64)
        np.add.at(n, (np.searchsorted(li, self.i), np.searchsorted(lj, self.j)), 1)
        return n

    def imbalance(self) -> float:
        """Relative spread of replicates per cell, (max - min) / max."""
        n = self.cell_counts()
        return float((n.max() - n.min()) / n.max()) if n.max() else 0.0

    def relabel(self, perm_i: dict[int, int], perm_j: dict[int, int]) -> "PairDataset":
        return PairDataset([perm_i[int(a)] for a in self.i], [perm_j[int(b)] for b in self.j],
                           self.k, self.y)


def design_matrix(ds: PairDataset, with_interaction: bool):
    """Reference-coded dummy design; returns (X, levels_i, levels_j)."""
    li, lj = np.unique(ds.i), np.unique(ds.j)
    if li.size < 2 or lj.size < 2:
        raise DegenerateDesignError("each factor needs at least two distinct levels")
    ri, rj = np.searchsorted(li, ds.i), np.searchsorted(lj, ds.j)
    a, b, n = li.size, lj.size, len(ds)
    p = 1 + (a - 1) + (b - 1) + ((a - 1) * (b - 1) if with_interaction else 0)
    X = np.zeros((n, p))
    X[:, 0] = 1.0
    rows = np.arange(n)
    m = ri > 0
    X[rows[m], ri[m]] = 1.0
    m = rj > 0
    X[rows[m], a - 1 + rj[m]] = 1.0
    if with_interaction:
        m = (ri > 0) & (rj > 0)
        X[rows[m], a + b - 1 + (ri[m] - 1) * (b - 1) + (rj[m] - 1)] = 1.0
    return X, li, lj


@dataclass
class ModelFit:
    mu: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray | None
    fitted: np.ndarray
    residuals: np.ndarray
    sse: float
    r2: float
    r2_adj: float
    n: int
    n_params: int
    df_resid: int
    levels_i: np.ndarray
    levels_j: np.ndarray
    with_interaction: bool
    coef: np.ndarray = field(repr=False)
    leverage: np.ndarray = field(repr=False)
    xtx_inv: np.ndarray = field(repr=False)
    design: np.ndarray = field(repr=False)

    @property
    def df_model(self) -> int:
        return self.n_params - 1

    def interaction_slice(self) -> slice:
        a, b = self.levels_i.size, self.levels_j.size
        return slice(a + b - 1, self.n_params)


def fit_linear_model(ds: PairDataset, with_interaction: bool) -> ModelFit:
    """Least-squares fit of the additive or interaction model."""
    X, li, lj = design_matrix(ds, with_interaction)
    n, p = X.shape
    if n < p:
        raise DegenerateDesignError(f"{n} observations cannot identify {p} coefficients")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-9 * max(1.0, diag.max()):
        raise DegenerateDesignError("rank-deficient design: a factor level or cell has no observations")
    coef = np.linalg.solve(R, Q.T @ ds.y)
    fitted = X @ coef
    resid = ds.y - fitted
    sse = float(resid @ resid)
    sst = float(((ds.y - ds.y.mean()) ** 2).sum())
    df_resid = n - p
    if sst > 0:
        r2 = 1.0 - sse / sst
        r2_adj = 1.0 - (sse / df_resid) / (sst / (n - 1)) if df_resid > 0 else float("nan")
    else:
        r2 = r2_adj = 1.0
    a, b = li.size, lj.size
    alpha = np.concatenate([[0.0], coef[1:a]])
    beta = np.concatenate([[0.0], coef[a:a + b - 1]])
    gamma = None
    if with_interaction:
        gamma = np.zeros((a, b))
        gamma[1:, 1:] = coef[a + b - 1:].reshape(a - 1, b - 1)
    r_inv = np.linalg.solve(R, np.eye(p))
    return ModelFit(mu=float(coef[0]), alpha=alpha, beta=beta, gamma=gamma, fitted=fitted,
                    residuals=resid, sse=sse, r2=r2, r2_adj=r2_adj, n=n, n_params=p,
                    df_resid=df_resid, levels_i=li, levels_j=lj,
                    with_interaction=with_interaction, coef=coef,
                    leverage=np.einsum("ij,ij->i", Q, Q), xtx_inv=r_inv @ r_inv.T, design=X)


# --- ANOVA -----------------------------------------------------------------------

@dataclass(frozen=True)
class AnovaResult:
    statistic: float
    df_num: int
    df_den: int | None
    p_value: float
    variant: str  # "classical" (F) or "hc3_wald" (chi-square)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value outside [0, 1]")


def _check_replicated(full: ModelFit) -> None:
    if full.df_resid <= 0:
        raise DegenerateDesignError(
            "the interaction model has no residual degrees of freedom; add trials (K >= 2)")


def classical_interaction_test(reduced: ModelFit, full: ModelFit) -> AnovaResult:
    """Nested F-test of the interaction block."""
    _check_replicated(full)
    df_g = full.n_params - reduced.n_params
    num = max(reduced.sse - full.sse, 0.0) / df_g
    den = full.sse / full.df_resid
    if den == 0.0:
        f = 0.0 if num == 0.0 else float("inf")
    else:
        f = num / den
    p = 0.0 if f == float("inf") else f_sf(f, df_g, full.df_resid)
    return AnovaResult(f, df_g, full.df_resid, min(max(p, 0.0), 1.0), "classical")


def hc3_covariance(fit: ModelFit) -> np.ndarray:
    """(X'X)^-1 X' diag(e^2 / (1 - h)^2) X (X'X)^-1."""
    h = np.minimum(fit.leverage, 1.0 - 1e-12)
    w = (fit.residuals / (1.0 - h)) ** 2
    meat = fit.design.T @ (fit.design * w[:, None])
    return fit.xtx_inv @ meat @ fit.xtx_inv


def hc3_interaction_test(full: ModelFit) -> AnovaResult:
    """Wald chi-square on the interaction block with HC3 covariance.

    Cells whose replicates are all equal contribute no variance; the
    block covariance can then be singular, so it is pseudo-inverted and
    the degrees of freedom are its numerical rank.
    """
    _check_replicated(full)
    s = full.interaction_slice()
    g = full.coef[s]
    scale = max(1.0, float(np.abs(full.fitted).max()))
    if float(np.abs(full.residuals).max()) <= 1e-12 * scale:
        # an exact fit leaves no variance to estimate: any interaction is
        # certain, none at all is no evidence (the classical test agrees)
        if float(np.abs(g).max(initial=0.0)) <= 1e-9 * scale:
            return AnovaResult(0.0, g.size, None, 1.0, "hc3_wald")
        return AnovaResult(float("inf"), g.size, None, 0.0, "hc3_wald")
    V = hc3_covariance(full)[s, s]
    eigval, eigvec = np.linalg.eigh(V)
    keep = eigval > 1e-10 * max(eigval.max(), 0.0) if eigval.size else eigval > 0
    rank = int(keep.sum())
    if rank == 0:
        return AnovaResult(0.0, 0, None, 1.0, "hc3_wald")
    z = eigvec[:, keep].T @ g
    wald = float((z ** 2 / eigval[keep]).sum())
    return AnovaResult(wald, rank, None, min(max(chi2_sf(wald, rank), 0.0), 1.0), "hc3_wald")


def breusch_pagan(fit: ModelFit) -> tuple[float, float]:
    """Studentized Breusch-Pagan: n * R^2 of e^2 regressed on fitted, chi-square(1)."""
    e2 = fit.residuals ** 2
    x = fit.fitted
    if np.ptp(x) == 0 or np.ptp(e2) == 0:
        return 0.0, 1.0
    r = np.corrcoef(x, e2)[0, 1]
    lm = fit.n * r * r
    return float(lm), chi2_sf(lm, 1)


@dataclass(frozen=True)
class InteractionReport:
    anova: AnovaResult | None
    classical: AnovaResult
    hc3: AnovaResult
    bp_p_value: float
    diagnostics: "ResidualDiagnostics"
    imbalance: float
    reduced: ModelFit
    full: ModelFit

    @property
    def independence_suspect(self) -> bool:
        return abs(self.diagnostics.lag1_autocorrelation) > LAG1_LIMIT

    @property
    def imbalanced(self) -> bool:
        return self.imbalance > IMBALANCE_LIMIT

    @property
    def status(self) -> str:
        return "not run" if self.anova is None else "ok"


HETEROSCEDASTICITY_ALPHA = 0.05
LAG1_LIMIT = 0.2
IMBALANCE_LIMIT = 0.05


def anova_interaction_test(ds: PairDataset, variant: str = "auto") -> AnovaResult:
    """Test gamma = 0.  ``variant`` is "classical", "hc3" or "auto".

    "auto" uses the HC3 Wald test when the Breusch-Pagan check on the
    interaction model gives p < 0.05, else the classical F-test.
    """
    reduced = fit_linear_model(ds, with_interaction=False)
    full = fit_linear_model(ds, with_interaction=True)
    if variant == "classical":
        return classical_interaction_test(reduced, full)
    if variant == "hc3":
        return hc3_interaction_test(full)
    if variant != "auto":
        raise ValueError(f"unknown ANOVA variant {variant!r}")
    _, bp = breusch_pagan(full)
    if bp < HETEROSCEDASTICITY_ALPHA:
        return hc3_interaction_test(full)
    return classical_interaction_test(reduced, full)


def interaction_report(ds: PairDataset) -> InteractionReport:
    """Both fits, both tests, diagnostics, and the selected ANOVA.

    The ANOVA is withheld ("not run") when the residuals look dependent.
    """
    reduced = fit_linear_model(ds, with_interaction=False)
    full = fit_linear_model(ds, with_interaction=True)
    classical = classical_interaction_test(reduced, full)
    hc3 = hc3_interaction_test(full)
    _, bp = breusch_pagan(full)
    diag = residual_diagnostics(full)
    chosen = hc3 if bp < HETEROSCEDASTICITY_ALPHA else classical
    if abs(diag.lag1_autocorrelation) > LAG1_LIMIT:
        chosen = None
    return InteractionReport(chosen, classical, hc3, bp, diag, ds.imbalance(), reduced, full)


# --- residual diagnostics ---------------------------------------------------------

@dataclass(frozen=True)
class ResidualDiagnostics:
    n: int
    skewness: float
    excess_kurtosis: float
    jarque_bera: float
    jb_p_value: float
    lag1_autocorrelation: float


def moments(x) -> tuple[float, float]:
    """Sample skewness and excess kurtosis from population (biased) moments."""
    x = np.asarray(x, dtype=np.float64)
    d = x - x.mean()
    m2 = float((d ** 2).mean())
    if m2 <= 1e-300:
        return 0.0, 0.0
    return float((d ** 3).mean() / m2 ** 1.5), float((d ** 4).mean() / m2 ** 2 - 3.0)


def jarque_bera(x) -> tuple[float, float]:
    n = np.asarray(x).size
    s, k = moments(x)
    jb = n / 6.0 * (s * s + k * k / 4.0)
    return float(jb), chi2_sf(jb, 2)


def lag1_autocorrelation(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    d = x - x.mean()
    den = float(d @ d)
    if den <= 1e-300 or x.size < 2:
        return 0.0
    return float(d[:-1] @ d[1:] / den)


def residual_diagnostics(fit: ModelFit) -> ResidualDiagnostics:
    """Moment statistics of the residuals, in dataset order."""
    s, k = moments(fit.residuals)
    jb, p = jarque_bera(fit.residuals)
    return ResidualDiagnostics(fit.n, s, k, jb, p, lag1_autocorrelation(fit.residuals))


def write_residuals_csv(fit: ModelFit, path: str | Path) -> None:
    """(fitted, residual) pairs for an external residuals-vs-fitted plot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fitted", "residual"])
        for f, r in zip(fit.fitted, fit.residuals):
            w.writerow([repr(float(f)), repr(float(r))])
