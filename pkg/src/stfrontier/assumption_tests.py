"""Bootstrap checks of the model's homogeneity assumptions.

test_constant_temporal: are the units' autocorrelation coefficients equal?
Per unit, an AR(p) is fit to its series (frontier residuals by default), an
AR-sieve bootstrap rebuilds k series from the centered fit residuals, each is
refit, and a percentile interval for the highest-lag coefficient is formed.
The null is rejected when at least one unit's interval excludes the
cross-unit mean of the original estimates.

test_constant_spatial: is the spatial effect on technical efficiency equal
across time points? Per period, TE is mapped back to the linear scale and
regressed on the spatial measures (no intercept); k case resamples of the
(w, TE) pairs give a percentile interval per period. The null is rejected
when strictly more than alpha*100% of the period intervals exclude the
cross-period mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BootstrapError, EstimationError, ValidationError
from .estimation import fit_frontier_gls
from .frontier import te_to_logit
from .rng import check_seed, substream
from .types import PanelDataset

#: Values drawn and discarded before a sieve series is emitted.
SIEVE_BURN_IN = 50

#: Spectral radius beyond which a fitted AR recursion is rescaled before sieving.
_STABILIZE_RADIUS = 0.999
_STABILIZE_TARGET = 0.98

SERIES_SOURCES = ("frontier_residuals", "log_output")


@dataclass(frozen=True)
class TestConfig:
    """Knobs shared by both bootstrap tests."""

    ar_order_p: int = 1
    n_boot_k: int = 500
    alpha: float = 0.05
    series_source: str = "frontier_residuals"
    seed: int = 0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if int(self.ar_order_p) < 1:
            raise ValidationError(f"ar_order_p must be >= 1, got {self.ar_order_p}")
        object.__setattr__(self, "ar_order_p", int(self.ar_order_p))
        if int(self.n_boot_k) < 100:
            raise ValidationError(f"n_boot_k must be >= 100, got {self.n_boot_k}")
        object.__setattr__(self, "n_boot_k", int(self.n_boot_k))
        alpha = float(self.alpha)
        if not 0.0 < alpha < 0.5:
            raise ValidationError(f"alpha must lie in (0, 0.5), got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        if alpha * self.n_boot_k < 5:
            raise ValidationError(
                f"alpha*n_boot_k = {alpha * self.n_boot_k:.3g} < 5; percentile "
                "limits would sit on unstable extreme order statistics"
            )
        if self.series_source not in SERIES_SOURCES:
            raise ValidationError(
                f"series_source must be one of {SERIES_SOURCES}, got {self.series_source!r}"
            )
        object.__setattr__(self, "seed", check_seed(self.seed))


@dataclass(frozen=True)
class TestReport:
    """Outcome of one homogeneity test, with everything needed to re-derive it."""

    test_kind: str  # "temporal" or "spatial"
    per_block_estimate: tuple[float, ...]
    per_block_interval: tuple[tuple[float, float], ...]
    reference_value: float
    n_failing: int
    reject: bool
    decision_rule: str
    block_labels: tuple
    alpha: float

    __test__ = False  # not a pytest class

    def __post_init__(self):
        for lo, hi in self.per_block_interval:
            if lo > hi:
                raise ValidationError(f"interval ({lo}, {hi}) has lo > hi")
        if self.n_failing > len(self.per_block_interval):
            raise ValidationError("n_failing exceeds the number of blocks")

    def recomputed_n_failing(self) -> int:
        ref = self.reference_value
        return sum(1 for lo, hi in self.per_block_interval if ref < lo or ref > hi)


@dataclass(frozen=True)
class ARFit:
    """Conditional least-squares AR(p) fit with intercept."""

    order: int
    coeffs: tuple[float, ...]  # intercept, lag 1, ..., lag p
    centered_residuals: np.ndarray
    mse: float
    series_head: tuple[float, ...]  # first p observed values, used to start a sieve
    n_obs: int  # length of the fitted series

    @property
    def lag_coeffs(self) -> np.ndarray:
        return np.asarray(self.coeffs[1:])

    @property
    def highest_lag_coeff(self) -> float:
        return self.coeffs[-1]


def _lag_design(series: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    t = series.shape[0]
    cols = [np.ones(t - p)] + [series[p - j : t - j] for j in range(1, p + 1)]
    return np.column_stack(cols), series[p:]


def ar_fit(series, p: int) -> ARFit:
    """Fit an AR(p) with intercept by conditional least squares.

    Residuals are centered to mean zero; mse is the regression mean squared
    error with p+1 fitted parameters.
    """
    s = np.asarray(series, dtype=float).ravel()
    t = s.shape[0]
    if int(p) < 1:
        raise ValidationError(f"AR order must be >= 1, got {p}")
    p = int(p)
    if t <= 3 * p + 1:
        raise ValidationError(
            f"series too short for AR({p}): need length > {3 * p + 1}, got {t}"
        )
    if not np.isfinite(s).all():
        raise ValidationError("series contains non-finite values")
    if s.var() < 1e-12:
        raise EstimationError("zero-variance series: no autocorrelation to estimate")

    design, target = _lag_design(s, p)
    if np.linalg.matrix_rank(design) < p + 1 or np.linalg.cond(design) > 1e12:
        raise EstimationError(
            f"near-singular lag matrix for AR({p}); lags are collinear"
        )
    coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coeffs
    centered = resid - resid.mean()
    mse = float((resid**2).sum() / (resid.shape[0] - (p + 1)))
    return ARFit(
        order=p,
        coeffs=tuple(float(c) for c in coeffs),
        centered_residuals=centered,
        mse=mse,
        series_head=tuple(float(v) for v in s[:p]),
        n_obs=t,
    )


def _spectral_radius(lag_coeffs: np.ndarray) -> float:
    """Largest root modulus of the companion polynomial: >= 1 means the
    recursion does not decay."""
    roots = np.roots(np.concatenate(([1.0], -np.asarray(lag_coeffs, dtype=float))))
    return float(np.abs(roots).max()) if roots.size else 0.0


def _stabilized(fit: ARFit) -> ARFit:
    """Shrink an (near-)explosive fit into the stationary region for sieving.

    Scaling lag j by s**j moves every companion root from r to s*r, so the
    rescaled recursion has radius _STABILIZE_TARGET. Estimates reported to
    the caller stay untouched; only the resampling recursion is tamed.
    """
    radius = _spectral_radius(fit.lag_coeffs)
    if radius < _STABILIZE_RADIUS:
        return fit
    scale = _STABILIZE_TARGET / radius
    lag = fit.lag_coeffs * scale ** np.arange(1, fit.order + 1)
    return ARFit(
        order=fit.order,
        coeffs=(fit.coeffs[0], *map(float, lag)),
        centered_residuals=fit.centered_residuals,
        mse=fit.mse,
        series_head=fit.series_head,
        n_obs=fit.n_obs,
    )


def _sieve_batch(fit: ARFit, m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Generate k sieve series of length m from one fitted recursion.

    Starts each series at the observed first p values, runs SIEVE_BURN_IN
    discarded steps, then emits m values, with innovations drawn uniformly
    with replacement from the centered residuals.
    """
    p = fit.order
    residuals = fit.centered_residuals
    intercept = fit.coeffs[0]
    lag = fit.lag_coeffs
    steps = SIEVE_BURN_IN + m
    innov = residuals[rng.integers(0, residuals.shape[0], size=(k, steps))]
    state = np.tile(np.asarray(fit.series_head)[::-1], (k, 1))  # newest first
    out = np.empty((k, steps))
    for s in range(steps):
        # state holds (y_{t-1}, ..., y_{t-p}); lag holds (rho_1, ..., rho_p)
        new = intercept + state @ lag + innov[:, s]
        out[:, s] = new
        if p > 1:
            state[:, 1:] = state[:, :-1]
        state[:, 0] = new
    return out[:, SIEVE_BURN_IN:]


def sieve_bootstrap_series(fit: ARFit, m: int, seed) -> np.ndarray:
    """One sieve-bootstrap series of length m from a fitted AR recursion.

    ``seed`` may be an integer or a numpy Generator. The fitted polynomial
    must be stationary.
    """
    if m < fit.n_obs:
        raise ValidationError(
            f"bootstrap length m={m} shorter than the fitted series ({fit.n_obs})"
        )
    if _spectral_radius(fit.lag_coeffs) >= 1.0:
        raise BootstrapError(
            "nonstationary sieve: the fitted AR polynomial has a characteristic "
            "root inside the unit circle"
        )
    rng = seed if isinstance(seed, np.random.Generator) else substream(check_seed(seed), "sieve")
    return _sieve_batch(fit, m, 1, rng)[0]


def _ar_refit_batch(series_batch: np.ndarray, p: int) -> np.ndarray:
    """Highest-lag AR(p) coefficient for each row of a (k, m) batch."""
    k, m = series_batch.shape
    cols = [np.ones((k, m - p))] + [
        series_batch[:, p - j : m - j] for j in range(1, p + 1)
    ]
    design = np.stack(cols, axis=2)  # (k, rows, p+1)
    target = series_batch[:, p:]
    xtx = np.einsum("krc,krd->kcd", design, design)
    xty = np.einsum("krc,kr->kc", design, target)
    try:
        coefs = np.linalg.solve(xtx, xty[..., None])[..., 0]
    except np.linalg.LinAlgError:
        coefs = np.stack([np.linalg.lstsq(a, b, rcond=None)[0] for a, b in zip(xtx, xty)])
    return coefs[:, -1]


def percentile_interval(values, alpha: float) -> tuple[float, float]:
    """Order-statistic percentile interval: (ceil(k*alpha/2), floor(k*(1-alpha/2)))
    in 1-based positions of the sorted values."""
    vals = np.sort(np.asarray(values, dtype=float).ravel())
    k = vals.shape[0]
    if k * alpha < 5:
        raise ValidationError(
            f"k*alpha = {k * alpha:.3g} < 5; too few draws for stable percentiles"
        )
    # the 1e-9 nudge keeps float products like 1000*0.05/2 from crossing integers
    lo_pos = max(1, math.ceil(k * alpha / 2.0 - 1e-9))
    hi_pos = min(k, math.floor(k * (1.0 - alpha / 2.0) + 1e-9))
    return float(vals[lo_pos - 1]), float(vals[hi_pos - 1])


def _unit_series(panel: PanelDataset, source: str) -> np.ndarray:
    if source == "log_output":
        return np.asarray(panel.log_output)
    return fit_frontier_gls(panel).innovations


def test_constant_temporal(panel: PanelDataset, config: TestConfig) -> TestReport:
    """AR-sieve bootstrap test of a common autocorrelation coefficient.

    Rejects when at least one unit's percentile interval for the highest-lag
    AR coefficient excludes the cross-unit mean of the original estimates.
    """
    if panel.n_units < 2:
        raise ValidationError("at least two spatial units required")
    p = config.ar_order_p
    if p >= panel.n_periods / 3:
        raise ValidationError(
            f"ar_order_p={p} too large for T={panel.n_periods}: need p < T/3"
        )
    series = _unit_series(panel, config.series_source)
    m = panel.n_periods

    estimates: list[float] = []
    intervals: list[tuple[float, float]] = []
    for i, label in enumerate(panel.unit_ids):
        try:
            fit = ar_fit(series[i], p)
        except (ValidationError, EstimationError) as err:
            raise BootstrapError(f"AR fit failed for unit {label!r}: {err}") from err
        estimates.append(fit.highest_lag_coeff)
        rng = substream(config.seed, "temporal-sieve", i)
        batch = _sieve_batch(_stabilized(fit), m, config.n_boot_k, rng)
        intervals.append(percentile_interval(_ar_refit_batch(batch, p), config.alpha))

    reference = float(np.mean(estimates))
    n_failing = sum(1 for lo, hi in intervals if reference < lo or reference > hi)
    return TestReport(
        test_kind="temporal",
        per_block_estimate=tuple(estimates),
        per_block_interval=tuple(intervals),
        reference_value=reference,
        n_failing=n_failing,
        reject=n_failing >= 1,
        decision_rule="reject if at least one per-unit interval excludes the cross-unit mean",
        block_labels=tuple(panel.unit_ids),
        alpha=config.alpha,
    )


def fit_spatial_slice(te_row, w_slice) -> np.ndarray:
    """Spatial coefficients for one time point: least squares of the
    linearized TE on the spatial measures, no intercept."""
    te = np.asarray(te_row, dtype=float).ravel()
    w = np.asarray(w_slice, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape[0] != te.shape[0]:
        raise ValidationError(
            f"w_slice has {w.shape[0]} rows for {te.shape[0]} TE values"
        )
    bad = (te <= np.exp(-1.0)) | (te >= 1.0)
    if bad.any():
        idx = int(np.argmax(bad))
        raise ValidationError(
            f"technical efficiency outside (exp(-1), 1) at unit index {idx}: {te[idx]!r}"
        )
    if np.linalg.matrix_rank(w) < w.shape[1]:
        raise EstimationError("spatial design for the time slice is rank deficient")
    response = te_to_logit(te)
    coef, *_ = np.linalg.lstsq(w, response, rcond=None)
    return np.asarray(coef, dtype=float)


def _case_resample_slopes(
    response: np.ndarray,
    w: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_retries: int = 100,
) -> np.ndarray:
    """First spatial coefficient under k case resamples of the (w, response) pairs.

    Rank-deficient resamples are redrawn, up to max_retries rounds."""
    n, q = w.shape
    idx = rng.integers(0, n, size=(k, n))
    slopes = np.empty(k)
    pending = np.arange(k)
    for _ in range(max_retries + 1):
        w_s = w[idx[pending]]  # (pending, n, q)
        y_s = response[idx[pending]]
        xtx = np.einsum("knq,knr->kqr", w_s, w_s)
        xty = np.einsum("knq,kn->kq", w_s, y_s)
        scale = np.einsum("kqq->k", xtx) / q  # mean diagonal, sets the det scale
        bad = np.abs(np.linalg.det(xtx)) <= (1e-12 * np.maximum(scale, 1e-300)) ** q
        good = ~bad
        if good.any():
            slopes[pending[good]] = np.linalg.solve(xtx[good], xty[good][..., None])[:, 0, 0]
        pending = pending[bad]
        if pending.size == 0:
            return slopes
        idx[pending] = rng.integers(0, n, size=(pending.size, n))
    raise BootstrapError(
        f"case resampling produced rank-deficient draws {max_retries} times in a row"
    )


def test_constant_spatial(te, spatial, config: TestConfig) -> TestReport:
    """Case-resampling bootstrap test of a common spatial effect over time.

    Rejects when strictly more than alpha*100% of the per-period intervals
    exclude the cross-period mean of the original estimates.
    """
    te = np.asarray(te, dtype=float)
    spatial = np.asarray(spatial, dtype=float)
    if te.ndim != 2:
        raise ValidationError(f"te must be an N x T matrix, got shape {te.shape}")
    n, t = te.shape
    if t < 2:
        raise ValidationError("at least two time points required")
    if n < 2:
        raise ValidationError("at least two spatial units required")
    if spatial.shape[:2] != (n, t):
        raise ValidationError(
            f"spatial must have shape (N={n}, T={t}, Q), got {spatial.shape}"
        )

    estimates: list[float] = []
    intervals: list[tuple[float, float]] = []
    for s in range(t):
        w_slice = spatial[:, s, :]
        try:
            coef = fit_spatial_slice(te[:, s], w_slice)
        except (ValidationError, EstimationError) as err:
            raise BootstrapError(f"spatial fit failed for period {s}: {err}") from err
        estimates.append(float(coef[0]))
        rng = substream(config.seed, "spatial-case", s)
        slopes = _case_resample_slopes(
            te_to_logit(te[:, s]), w_slice, config.n_boot_k, rng
        )
        intervals.append(percentile_interval(slopes, config.alpha))

    reference = float(np.mean(estimates))
    n_failing = sum(1 for lo, hi in intervals if reference < lo or reference > hi)
    return TestReport(
        test_kind="spatial",
        per_block_estimate=tuple(estimates),
        per_block_interval=tuple(intervals),
        reference_value=reference,
        n_failing=n_failing,
        reject=n_failing > config.alpha * t,
        decision_rule=(
            "reject if strictly more than alpha*100% of per-period intervals "
            "exclude the cross-period mean"
        ),
        block_labels=tuple(range(t)),
        alpha=config.alpha,
    )
