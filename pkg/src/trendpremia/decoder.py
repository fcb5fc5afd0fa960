"""Time-varying exposure decoding with a random-walk-coefficient Kalman filter.

Observation: ``y_t = x_t . w_t + eps_t`` with ``eps_t ~ N(0, obs_noise_var)``.
State: ``w_t = w_{t-1} + eta_t`` with ``eta_t ~ N(0, diag(tau^2))``.
Only the causal filter is run.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientData,
    InvalidSpec,
    MisalignedDates,
    EmptyUniverse,
    ParameterOutOfRange,
    SingularInnovation,
)


@dataclass(frozen=True)
class StateSpaceParams:
    obs_noise_var: float
    state_noise_vars: tuple[float, ...]
    initial_mean: tuple[float, ...] | float = 0.0
    initial_var: float = 1.0

    def __post_init__(self):
        if not self.obs_noise_var > 0:
            raise ParameterOutOfRange(f"obs_noise_var must be > 0, got {self.obs_noise_var}")
        tau = tuple(float(t) for t in np.atleast_1d(self.state_noise_vars))
        if any(t < 0 for t in tau):
            raise ParameterOutOfRange("state noise variances must be >= 0")
        if not self.initial_var > 0:
            raise ParameterOutOfRange("initial_var must be > 0")
        object.__setattr__(self, "state_noise_vars", tau)

    @property
    def n_states(self) -> int:
        return len(self.state_noise_vars)

    def prior_mean(self) -> np.ndarray:
        m = np.asarray(self.initial_mean, dtype=float)
        return np.broadcast_to(m, (self.n_states,)).copy()


@dataclass(frozen=True)
class ExposurePath:
    dates: np.ndarray
    assets: tuple[str, ...]
    means: np.ndarray
    variances: np.ndarray
    innovations: np.ndarray | None = None
    innovation_vars: np.ndarray | None = None

    def __post_init__(self):
        shape = (len(self.dates), len(self.assets))
        if self.means.shape != shape or self.variances.shape != shape:
            raise InvalidSpec(f"exposure arrays must have shape {shape}")

    def standardized_innovations(self) -> np.ndarray:
        return self.innovations / np.sqrt(self.innovation_vars)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("date,asset,mean,variance\n")
            for t, d in enumerate(np.asarray(self.dates).tolist()):
                for i, a in enumerate(self.assets):
                    fh.write(f"{d},{a},{self.means[t, i]!r},{self.variances[t, i]!r}\n")


def _design(returns, scores) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(returns, dtype=float).ravel()
    x = np.asarray(scores, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != y.shape[0]:
        raise MisalignedDates(f"{y.shape[0]} returns against {x.shape[0]} score rows")
    if x.shape[1] == 0:
        raise EmptyUniverse("no assets in the design")
    return y, x


def kalman_filter(
    returns,
    scores,
    params: StateSpaceParams,
    dates: np.ndarray | None = None,
    assets: tuple[str, ...] | None = None,
) -> ExposurePath:
    """Filtered exposures for ``returns_t = scores_t . w_t + noise``.

    Rows with a non-finite return or design entry get the prediction step
    only, so missing data widens the posterior instead of aborting.
    """
    y, x = _design(returns, scores)
    n_t, n = x.shape
    if params.n_states != n:
        raise InvalidSpec(f"params describe {params.n_states} states, design has {n}")
    q = np.diag(params.state_noise_vars)
    m = params.prior_mean()
    p = np.eye(n) * params.initial_var
    means = np.empty((n_t, n))
    variances = np.empty((n_t, n))
    innov = np.full(n_t, np.nan)
    innov_var = np.full(n_t, np.nan)
    for t in range(n_t):
        p = p + q
        xt = x[t]
        if np.isfinite(y[t]) and np.all(np.isfinite(xt)):
            px = p @ xt
            s = float(xt @ px) + params.obs_noise_var
            if not s > 0:
                raise SingularInnovation(f"innovation variance {s} at step {t}")
            k = px / s
            e = y[t] - float(xt @ m)
            m = m + k * e
            # Joseph form keeps p symmetric PSD when obs noise is tiny
            a = np.eye(n) - np.outer(k, xt)
            p = a @ p @ a.T + params.obs_noise_var * np.outer(k, k)
            p = 0.5 * (p + p.T)
            innov[t], innov_var[t] = e, s
        means[t] = m
        variances[t] = np.diag(p)
    if dates is None:
        dates = np.arange(n_t)
    if assets is None:
        assets = tuple(f"x{i}" for i in range(n))
    return ExposurePath(np.asarray(dates), tuple(assets), means, variances, innov, innov_var)


def fit_noise_params(
    returns,
    scores,
    snr_ratio: float = 2500.0,
    window: int = 252,
    ridge: float = 1e-8,
    initial_var: float = 1.0,
) -> StateSpaceParams:
    """Observation noise from block ridge regressions; drift noise by a fixed ratio.

    The sample is cut into consecutive ``window``-day blocks; each block gets a
    ridge fit and the pooled residual variance (divided by residual degrees of
    freedom) is the observation noise. ``tau_i^2 = obs_noise_var / snr_ratio``.
    """
    if snr_ratio <= 0:
        raise ParameterOutOfRange("snr_ratio must be > 0")
    y, x = _design(returns, scores)
    ok = np.isfinite(y) & np.all(np.isfinite(x), axis=1)
    y, x = y[ok], x[ok]
    n = x.shape[1]
    if len(y) < max(window, n + 1):
        raise InsufficientData(f"need {max(window, n + 1)} usable observations, have {len(y)}")
    rss, dof = 0.0, 0
    starts = list(range(0, len(y) - window + 1, window))
    for a in starts:
        b = len(y) if a == starts[-1] else a + window
        xb, yb = x[a:b], y[a:b]
        scale = max(float(np.mean(xb * xb)), 1e-300)
        beta = np.linalg.solve(xb.T @ xb + ridge * scale * len(yb) * np.eye(n), xb.T @ yb)
        resid = yb - xb @ beta
        rss += float(resid @ resid)
        dof += len(yb) - n
    floor = max(1e-14 * float(np.var(y)), 1e-300)
    obs = max(rss / max(dof, 1), floor)
    return StateSpaceParams(obs, (obs / snr_ratio,) * n, 0.0, initial_var)


def apply_exposure_controls(
    path: ExposurePath,
    sparsity_eps: float = 0.0,
    max_turnover_per_step: float = np.inf,
) -> ExposurePath:
    """Zero small exposures, then cap the per-step L1 change.

    Each step moves from the previous controlled exposure toward the
    sparsified target; a step whose L1 norm exceeds the cap is scaled down
    proportionally, so lagging positions catch up over later steps.
    """
    if sparsity_eps < 0:
        raise ParameterOutOfRange("sparsity_eps must be >= 0")
    if not max_turnover_per_step > 0:
        raise ParameterOutOfRange("max_turnover_per_step must be > 0")
    target = np.where(np.abs(path.means) < sparsity_eps, 0.0, path.means)
    out = target.copy()
    if np.isfinite(max_turnover_per_step):
        for t in range(1, len(out)):
            step = target[t] - out[t - 1]
            tv = float(np.sum(np.abs(step)))
            if tv > max_turnover_per_step:
                step = step * (max_turnover_per_step / tv)
            out[t] = out[t - 1] + step
    return replace(path, means=out)
