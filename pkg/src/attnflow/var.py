"""Vector autoregression estimation with equation-by-equation OLS inference.

The estimator regresses each variable on a constant and ``p`` lags of all
variables, solving the least-squares problem through a QR decomposition
(never an explicit normal-equation inverse). Standard errors, t statistics
and two-sided Student-t p-values follow small-sample OLS conventions with
per-equation residual degrees of freedom.

Coefficient layout: ``pi[x][z][y]`` is the effect of variable ``y``'s
lag-``x+1`` value on variable ``z``, matching the ``AR{x}(y,z)`` labels of
the formatted coefficient table.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import scipy.linalg
from scipy import stats

from . import kernels, periods
from .periods import Period

RCOND_MIN = 1e-12


class VarError(Exception):
    pass


class InsufficientSampleError(VarError):
    pass


class SingularDesignError(VarError):
    pass


@dataclass(frozen=True, eq=False)
class Panel:
    """A balanced multivariate time series: no gaps, no missing values."""

    variable_names: tuple[str, ...]
    granularity: str
    periods: tuple[Period, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        object.__setattr__(self, "periods", tuple(self.periods))
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.float64)
        )
        k = len(self.variable_names)
        if self.values.ndim != 2 or self.values.shape[1] != k:
            raise ValueError(
                f"values must have shape (T, {k}), got {self.values.shape}"
            )
        if len(self.periods) != self.values.shape[0]:
            raise ValueError("periods/values length mismatch")
        for prev, cur in zip(self.periods, self.periods[1:]):
            if cur.ordinal != prev.ordinal + 1:
                raise ValueError(f"panel has a gap between {prev} and {cur}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("panel contains non-finite values")

    @property
    def k(self) -> int:
        return len(self.variable_names)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_values(
        cls,
        values: np.ndarray,
        variable_names: Sequence[str] | None = None,
        start: str = "2000-Q1",
    ) -> "Panel":
        """Panel over a synthetic contiguous grid; convenient in tests."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        k = values.shape[1]
        names = (
            tuple(variable_names)
            if variable_names is not None
            else tuple(f"x{i + 1}" for i in range(k))
        )
        first = periods.parse(start)
        grid = [first]
        for _ in range(values.shape[0] - 1):
            grid.append(grid[-1].next())
        return cls(names, first.granularity, tuple(grid), values)


@dataclass(frozen=True, eq=False)
class VarFit:
    """Estimated VAR coefficients with full OLS inference.

    ``pi`` has shape (p, k, k) with ``pi[x][z][y]`` the lag-(x+1) effect of
    variable ``y`` on variable ``z``. When the fit has no constant the
    ``constants`` are identically zero and the constant inference arrays
    are None.
    """

    k: int
    p: int
    with_constant: bool
    variable_names: tuple[str, ...]
    constants: np.ndarray
    pi: np.ndarray
    se_constants: np.ndarray | None
    se_pi: np.ndarray
    tstat_constants: np.ndarray | None
    tstat_pi: np.ndarray
    pvalue_constants: np.ndarray | None
    pvalue_pi: np.ndarray
    sigma: np.ndarray
    T_eff: int
    dof: int
    granularity: str | None = None
    sample: tuple[str, str] | None = None

    @property
    def stable(self) -> bool:
        return stability(self) < 1.0


def build_lag_matrix(
    panel: Panel, p: int, with_constant: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Targets Y and stacked-lag regressors Z for a VAR(p).

    Row t of Z is ``[1, X_{t-1}, ..., X_{t-p}]`` with variables in panel
    order inside each lag block; the first p panel rows only seed lags.
    """
    if p < 1:
        raise ValueError("lag order p must be >= 1")
    T, k = panel.values.shape
    if T <= p:
        raise InsufficientSampleError(
            f"panel has T={T} rows; need more than p={p} to form any target row"
        )
    Y = panel.values[p:]
    blocks = []
    if with_constant:
        blocks.append(np.ones((T - p, 1)))
    for lag in range(1, p + 1):
        blocks.append(panel.values[p - lag : T - lag])
    Z = np.hstack(blocks)
    return Y, Z


def p_value_t(t: float | np.ndarray, dof: int) -> float | np.ndarray:
    """Two-sided p-value of a t statistic: ``2 * (1 - CDF_t(|t|; dof))``."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    p = 2.0 * stats.t.sf(np.abs(t), dof)
    return float(p) if np.isscalar(t) or np.ndim(t) == 0 else p


def estimate_ols(panel: Panel, p: int, with_constant: bool = True) -> VarFit:
    """Equation-by-equation least squares with Student-t inference.

    Parameters
    ----------
    panel : Panel
        Balanced panel of k variables over T contiguous periods.
    p : int
        Lag order; every equation gets p lags of all k variables.
    with_constant : bool
        Include an intercept in every equation (default).

    Raises
    ------
    InsufficientSampleError
        If the effective sample leaves no residual degrees of freedom.
    SingularDesignError
        If Z'Z has reciprocal condition below 1e-12.
    """
    Y, Z = build_lag_matrix(panel, p, with_constant)
    n_obs, n_params = Z.shape
    k = panel.k
    dof = n_obs - n_params
    if dof < 1:
        raise InsufficientSampleError(
            f"effective sample {n_obs} leaves dof={dof} with "
            f"{n_params} parameters per equation"
        )
    sv = np.linalg.svd(Z, compute_uv=False)
    rcond = (sv[-1] / sv[0]) ** 2 if sv[0] > 0 else 0.0
    if not rcond >= RCOND_MIN:
        raise SingularDesignError(
            f"Z'Z reciprocal condition {rcond:.3e} below {RCOND_MIN:.0e}"
        )

    q, r = np.linalg.qr(Z)
    B = scipy.linalg.solve_triangular(r, q.T @ Y)
    E = Y - Z @ B
    sigma = E.T @ E / dof
    r_inv = scipy.linalg.solve_triangular(r, np.eye(n_params))
    ztz_inv_diag = np.sum(r_inv * r_inv, axis=1)
    se = np.sqrt(np.outer(ztz_inv_diag, np.diag(sigma)))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = B / se
    tstat = np.where(np.isnan(tstat), 0.0, tstat)
    pvalue = 2.0 * stats.t.sf(np.abs(tstat), dof)

    offset = 1 if with_constant else 0
    pi = np.empty((p, k, k))
    se_pi = np.empty((p, k, k))
    t_pi = np.empty((p, k, k))
    p_pi = np.empty((p, k, k))
    for lag in range(p):
        block = slice(offset + lag * k, offset + (lag + 1) * k)
        pi[lag] = B[block].T
        se_pi[lag] = se[block].T
        t_pi[lag] = tstat[block].T
        p_pi[lag] = pvalue[block].T

    if with_constant:
        constants = B[0].copy()
        se_c, t_c, p_c = se[0].copy(), tstat[0].copy(), pvalue[0].copy()
    else:
        constants = np.zeros(k)
        se_c = t_c = p_c = None

    return VarFit(
        k=k,
        p=p,
        with_constant=with_constant,
        variable_names=panel.variable_names,
        constants=constants,
        pi=pi,
        se_constants=se_c,
        se_pi=se_pi,
        tstat_constants=t_c,
        tstat_pi=t_pi,
        pvalue_constants=p_c,
        pvalue_pi=p_pi,
        sigma=sigma,
        T_eff=n_obs,
        dof=dof,
        granularity=panel.granularity,
        sample=(str(panel.periods[p]), str(panel.periods[-1])),
    )


def companion_matrix(pi: np.ndarray) -> np.ndarray:
    """Stack the lag matrices over an identity shift: shape (k*p, k*p)."""
    pi = np.asarray(pi, dtype=np.float64)
    p, k = pi.shape[0], pi.shape[1]
    top = np.hstack([pi[lag] for lag in range(p)])
    if p == 1:
        return top
    bottom = np.hstack([np.eye(k * (p - 1)), np.zeros((k * (p - 1), k))])
    return np.vstack([top, bottom])


def stability(fit: VarFit) -> float:
    """Spectral radius of the companion matrix; < 1 means a stable VAR."""
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(fit.pi)))))


def forecast(fit: VarFit, history: np.ndarray, h: int) -> np.ndarray:
    """Deterministic iteration of the fitted system for h steps.

    ``history`` holds the last p observed rows in chronological order.
    With p = 1 this reproduces the norm game's best-response dynamics at
    the fitted parameters, sharing the same step kernel.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.shape != (fit.p, fit.k):
        raise ValueError(
            f"history must have shape ({fit.p}, {fit.k}), got {history.shape}"
        )
    path, _, _ = kernels.affine_steps(fit.constants, fit.pi, history, h)
    return path


def simulate_var(
    constants: np.ndarray,
    pi: np.ndarray,
    history: np.ndarray,
    shocks: np.ndarray,
) -> np.ndarray:
    """Shock-driven path of a VAR with the given coefficients.

    Row t of the result is ``constants + sum_l pi[l] @ x_{t-1-l} + shocks[t]``;
    used for Monte Carlo studies and synthetic-panel generation.
    """
    return kernels.affine_steps_noise(constants, pi, history, shocks)


# ---------------------------------------------------------------------------
# Coefficient table
# ---------------------------------------------------------------------------


def significance_stars(pvalue: float) -> str:
    if pvalue < 0.01:
        return "***"
    if pvalue < 0.05:
        return "**"
    if pvalue < 0.10:
        return "*"
    return ""


def _fmt2(x: float) -> str:
    """Render to at most 2 decimals, dropping trailing zeros ('-1.80' -> '-1.8')."""
    s = f"{x:.2f}"
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    if s == "-0":
        s = "0"
    return s


@dataclass(frozen=True)
class TableRow:
    label: str
    value: float
    se: float
    tstat: float
    pvalue: float
    stars: str

    def cells(self) -> tuple[str, str, str, str, str]:
        return (
            self.label,
            _fmt2(self.value) + self.stars,
            _fmt2(self.se),
            _fmt2(self.tstat),
            _fmt2(self.pvalue),
        )


TABLE_HEADER = ("", "Value", "Standard Error", "TStatistic", "PValue")


def format_table(fit: VarFit) -> list[TableRow]:
    """Ordered coefficient rows: constants, then AR{x}(y,z) per lag x.

    Within a lag, rows are grouped by affected variable z with the
    affecting variable y running fastest, so a k-variable fit yields
    k constant rows followed by p*k*k coefficient rows.
    """
    rows = []
    if fit.with_constant:
        for z in range(fit.k):
            rows.append(
                TableRow(
                    label=f"Constant({z + 1})",
                    value=float(fit.constants[z]),
                    se=float(fit.se_constants[z]),
                    tstat=float(fit.tstat_constants[z]),
                    pvalue=float(fit.pvalue_constants[z]),
                    stars=significance_stars(float(fit.pvalue_constants[z])),
                )
            )
    for x in range(fit.p):
        for z in range(fit.k):
            for y in range(fit.k):
                pv = float(fit.pvalue_pi[x, z, y])
                rows.append(
                    TableRow(
                        label=f"AR{{{x + 1}}}({y + 1},{z + 1})",
                        value=float(fit.pi[x, z, y]),
                        se=float(fit.se_pi[x, z, y]),
                        tstat=float(fit.tstat_pi[x, z, y]),
                        pvalue=pv,
                        stars=significance_stars(pv),
                    )
                )
    return rows


def render_table_csv(
    rows: Sequence[TableRow], f: TextIO, metadata: Sequence[str] = ()
) -> None:
    for line in metadata:
        f.write(f"# {line}\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for row in rows:
        writer.writerow(row.cells())


def render_table_text(
    rows: Sequence[TableRow], f: TextIO, metadata: Sequence[str] = ()
) -> None:
    for line in metadata:
        f.write(f"# {line}\n")
    table = [TABLE_HEADER] + [row.cells() for row in rows]
    widths = [max(len(r[c]) for r in table) for c in range(5)]
    for r, cells in enumerate(table):
        out = [cells[0].ljust(widths[0])]
        out += [cells[c].rjust(widths[c]) for c in range(1, 5)]
        f.write("  ".join(out).rstrip() + "\n")
        if r == 0:
            f.write("-" * (sum(widths) + 8) + "\n")


# ---------------------------------------------------------------------------
# External interfaces: panel CSV and fit JSON
# ---------------------------------------------------------------------------


def write_panel_csv(panel: Panel, f: TextIO, metadata: Sequence[str] = ()) -> None:
    for line in metadata:
        f.write(f"# {line}\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["period"] + list(panel.variable_names))
    for p, row in zip(panel.periods, panel.values):
        writer.writerow([str(p)] + [repr(float(v)) for v in row])


def read_panel_csv(path: str | Path) -> Panel:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        rows = csv.reader(line for line in f if not line.startswith("#"))
        header = next(rows, None)
        if not header or header[0] != "period" or len(header) < 2:
            raise ValueError(f"{path}: expected header 'period,<var1>,...'")
        names = tuple(header[1:])
        grid: list[Period] = []
        values: list[list[float]] = []
        for row in rows:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: ragged row {row!r}")
            grid.append(periods.parse(row[0]))
            values.append([float(v) for v in row[1:]])
    if not grid:
        raise ValueError(f"{path}: empty panel")
    return Panel(names, grid[0].granularity, tuple(grid), np.array(values))


def fit_to_dict(fit: VarFit) -> dict:
    def arr(a):
        return None if a is None else np.asarray(a).tolist()

    return {
        "k": fit.k,
        "p": fit.p,
        "with_constant": fit.with_constant,
        "variable_names": list(fit.variable_names),
        "constants": arr(fit.constants),
        "pi": arr(fit.pi),
        "se_constants": arr(fit.se_constants),
        "se_pi": arr(fit.se_pi),
        "tstat_constants": arr(fit.tstat_constants),
        "tstat_pi": arr(fit.tstat_pi),
        "pvalue_constants": arr(fit.pvalue_constants),
        "pvalue_pi": arr(fit.pvalue_pi),
        "sigma": arr(fit.sigma),
        "T_eff": fit.T_eff,
        "dof": fit.dof,
        "granularity": fit.granularity,
        "sample": list(fit.sample) if fit.sample else None,
        "stability_radius": stability(fit),
    }


def fit_from_dict(raw: dict) -> VarFit:
    def arr(x):
        return None if x is None else np.asarray(x, dtype=np.float64)

    return VarFit(
        k=raw["k"],
        p=raw["p"],
        with_constant=raw["with_constant"],
        variable_names=tuple(raw["variable_names"]),
        constants=arr(raw["constants"]),
        pi=arr(raw["pi"]),
        se_constants=arr(raw["se_constants"]),
        se_pi=arr(raw["se_pi"]),
        tstat_constants=arr(raw["tstat_constants"]),
        tstat_pi=arr(raw["tstat_pi"]),
        pvalue_constants=arr(raw["pvalue_constants"]),
        pvalue_pi=arr(raw["pvalue_pi"]),
        sigma=arr(raw["sigma"]),
        T_eff=raw["T_eff"],
        dof=raw["dof"],
        granularity=raw.get("granularity"),
        sample=tuple(raw["sample"]) if raw.get("sample") else None,
    )


def save_fit(fit: VarFit, path: str | Path, metadata: Sequence[str] = ()) -> None:
    payload = fit_to_dict(fit)
    if metadata:
        payload["_metadata"] = list(metadata)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def load_fit(path: str | Path) -> VarFit:
    with open(path, encoding="utf-8") as f:
        return fit_from_dict(json.load(f))
