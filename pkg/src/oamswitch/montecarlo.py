"""Monte Carlo estimation experiments on the calibrated rotation fringe.

A trial draws per-shot nuisance values (angle jitter of the rotation stage,
calibration-phase drift), evaluates the detected fringe probability, samples
``nu`` binary outcomes in one binomial draw, and inverts the fringe for a
point estimate of the rotation angle.  Campaigns aggregate trials into RMS
error, its distance from the Cramer-Rao floor, and the spread-precision
product.  ``scaling_study`` repeats campaigns over a ladder of ``(m, l)``
settings and regresses the precision against ``m*l`` on log axes.

Reproducibility: trial ``t`` of a campaign seeded with ``s`` always uses
``numpy.random.default_rng([s, t])`` and draws its two nuisance normals before
the binomial, whether or not the corresponding noise terms are enabled.  The
result stream is therefore byte-identical across worker counts and immune to
toggling individual noise terms off and on.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    ConfigError,
    DegenerateOperatingPoint,
    DegeneratePoint,
    InsufficientPairs,
    InsufficientSpan,
    NonConvergence,
    NonPositiveInput,
    OutOfBranch,
)
from .metrology import crb, hup_check
from .switch import SwitchParams

__all__ = [
    "NoiseModel",
    "Calibration",
    "noisy_probability",
    "sample_counts",
    "estimate_theta_point",
    "FIT_PARAMS",
    "FringeFit",
    "fit_fringe",
    "TrialResult",
    "EstimationReport",
    "run_campaign",
    "quadrature_phi0",
    "ScalingPoint",
    "ScalingReport",
    "scaling_study",
]


@dataclass(frozen=True)
class NoiseModel:
    """Imperfections applied to the fringe before sampling.

    ``visibility`` scales the fringe contrast; ``sigma_theta`` is the single-
    trial rotation-stage jitter (rad) and ``sigma_phi`` the calibration-phase
    drift (rad); ``efficiency`` is the vertical-port detection efficiency
    relative to the horizontal port (post-selected, so it biases rather than
    discards).
    """

    visibility: float = 1.0
    sigma_theta: float = 0.0
    sigma_phi: float = 0.0
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.visibility <= 1.0:
            raise ConfigError(f"visibility must lie in (0, 1], got {self.visibility!r}")
        if not 0.0 < self.efficiency <= 1.0:
            raise ConfigError(f"efficiency must lie in (0, 1], got {self.efficiency!r}")
        for name in ("sigma_theta", "sigma_phi"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ConfigError(f"{name} must be finite and nonnegative, got {v!r}")

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def for_gap(cls, m: int, l: int, nu: int, gap: float) -> "NoiseModel":
        """Stage jitter sized so the total error sits ``gap`` above the floor.

        The estimator variance adds the sampling floor and the jitter in
        quadrature, so ``sigma_theta = crb * sqrt(gap**2 - 1)`` lands the
        campaign RMS error at ``gap * crb`` when everything else is ideal.
        """
        if gap < 1.0:
            raise NonPositiveInput(f"target gap must be >= 1, got {gap!r}")
        floor = crb(m, l, nu)
        return cls(sigma_theta=floor * float(np.sqrt(gap * gap - 1.0)))


@dataclass(frozen=True)
class Calibration:
    """What the estimator assumes about the fringe it inverts."""

    phi0: float
    visibility: float = 1.0
    theta_ref: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.visibility <= 1.0:
            raise ConfigError(f"assumed visibility must lie in (0, 1], got {self.visibility!r}")
        if not np.isfinite(self.phi0) or not np.isfinite(self.theta_ref):
            raise ConfigError("calibration phase and reference angle must be finite")

    @classmethod
    def from_params(cls, params: SwitchParams) -> "Calibration":
        return cls(phi0=params.phi0, visibility=1.0, theta_ref=params.theta)


def noisy_probability(
    params: SwitchParams,
    noise: NoiseModel | None = None,
    jitter: float = 0.0,
    drift: float = 0.0,
) -> float:
    """Detected vertical-port probability for one trial's nuisance draws."""
    noise = noise if noise is not None else NoiseModel.ideal()
    x = params.fringe_rate * (params.theta + jitter) + params.phi0 + drift
    p = 0.5 * (1.0 - noise.visibility * np.cos(x))
    if noise.efficiency != 1.0:
        p = noise.efficiency * p / (noise.efficiency * p + (1.0 - p))
    return float(p)


def sample_counts(p: float, nu: int, rng: np.random.Generator) -> int:
    """Vertical-port click count out of ``nu`` probes."""
    if not 0.0 <= p <= 1.0:
        raise NonPositiveInput(f"probability must lie in [0, 1], got {p!r}")
    if nu < 1:
        raise NonPositiveInput(f"probe count must be >= 1, got {nu!r}")
    return int(rng.binomial(int(nu), p))


def estimate_theta_point(
    count: int,
    nu: int,
    params: SwitchParams,
    calibration: Calibration | None = None,
    phase_tolerance: float | None = None,
) -> float:
    """Invert one click count out of ``nu`` probes into a rotation-angle estimate.

    The arccos inversion is folded into the monotone fringe branch containing
    the calibration reference point.  Before inversion the count fraction is
    clamped into ``[0.5/nu, 1 - 0.5/nu]`` (half a click away from the rails,
    where arccos sensitivity diverges); at ``nu = 1`` the interval collapses
    to a point and the raw fraction is used instead.  ``phase_tolerance``
    bounds how far (in fringe phase) the estimate may sit from the reference
    before it is rejected as a branch escape; the default is six times the
    ideal binomial phase deviation ``1 / (V sqrt(nu))``.
    """
    if params.fringe_rate == 0:
        raise DegenerateOperatingPoint("no fringe at l = 0; nothing to invert")
    if nu < 1:
        raise NonPositiveInput(f"probe count must be >= 1, got {nu!r}")
    if not 0 <= count <= nu:
        raise NonPositiveInput(f"click count must lie in [0, {nu}], got {count!r}")
    cal = calibration if calibration is not None else Calibration.from_params(params)
    rate = params.fringe_rate
    x0 = rate * cal.theta_ref + cal.phi0
    edge = abs(x0 - np.pi * np.round(x0 / np.pi))
    if edge < 1e-6:
        raise DegeneratePoint(
            f"reference phase {x0!r} sits on a fringe extremum; the inversion is degenerate"
        )
    if phase_tolerance is None:
        phase_tolerance = 6.0 / (cal.visibility * np.sqrt(nu))

    p = float(count) / nu
    half = 0.5 / nu
    if half < 0.5:
        p = min(max(p, half), 1.0 - half)
    c = (1.0 - 2.0 * p) / cal.visibility
    c = min(max(c, -1.0), 1.0)
    b = np.floor(x0 / np.pi)
    t = np.arccos(c if b % 2 == 0 else -c)
    x = b * np.pi + t
    if abs(x - x0) > phase_tolerance:
        raise OutOfBranch(
            f"estimate strayed {abs(x - x0):.3g} rad of fringe phase from the reference "
            f"(tolerance {phase_tolerance:.3g}); the operating branch cannot be trusted"
        )
    return float((x - cal.phi0) / rate)


# ---------------------------------------------------------------------------
# fringe fitting


FIT_PARAMS = ("frequency", "phase", "visibility", "offset")


@dataclass(frozen=True)
class FringeFit:
    """Damped least-squares fit of ``p = (off - vis cos(freq theta + phase))/2``."""

    freq: float
    phase: float
    visibility: float
    offset: float
    free: tuple[str, ...]
    cost: float
    nfev: int

    def model(self, thetas) -> np.ndarray:
        th = np.asarray(thetas, dtype=float)
        return 0.5 * (self.offset - self.visibility * np.cos(self.freq * th + self.phase))

    def to_dict(self) -> dict:
        return {
            "frequency": self.freq,
            "phase": self.phase,
            "visibility": self.visibility,
            "offset": self.offset,
            "free": list(self.free),
            "cost": self.cost,
            "nfev": self.nfev,
        }


def fit_fringe(
    thetas: Sequence[float],
    counts: Sequence[float],
    nus: Sequence[float] | float,
    params: SwitchParams,
    free: Sequence[str] = FIT_PARAMS,
) -> FringeFit:
    """Fit the fringe model to per-angle click counts.

    ``counts[i]`` clicks out of ``nus[i]`` probes at angle ``thetas[i]``
    (``nus`` may be a scalar for a uniform sweep).  Only the parameters named
    in ``free`` are adjusted; the rest stay pinned at their nominal values
    (frequency ``4*m*l``, phase ``params.phi0``, unit visibility and offset).
    The nominal frequency seeds the fit and a linear least-squares pass at
    that frequency provides the remaining starting values.  Weights are
    per-point binomial with the deviation floored at half a click.
    """
    th = np.asarray(thetas, dtype=float)
    ks = np.asarray(counts, dtype=float)
    if th.ndim != 1 or ks.shape != th.shape:
        raise ConfigError("thetas and counts must be 1-d arrays of equal length")
    nu_arr = np.broadcast_to(np.asarray(nus, dtype=float), th.shape)
    if np.any(nu_arr < 1.0):
        raise NonPositiveInput("every per-point probe count must be >= 1")
    if np.any(ks < 0.0) or np.any(ks > nu_arr):
        raise NonPositiveInput("click counts must lie in [0, nu] pointwise")
    free_set = {str(f) for f in free}
    if not free_set:
        raise ConfigError("at least one fit parameter must be free")
    unknown = free_set.difference(FIT_PARAMS)
    if unknown:
        raise ConfigError(
            f"unknown fit parameter(s) {sorted(unknown)!r}; choose from {list(FIT_PARAMS)}"
        )
    w0 = float(params.fringe_rate)
    if w0 == 0.0:
        raise DegenerateOperatingPoint("no fringe at l = 0; nothing to fit")
    if th.size < 8:
        raise InsufficientSpan(f"need at least 8 fringe samples, got {th.size}")
    span = float(th.max() - th.min())
    if span < 2.0 * np.pi / w0:
        raise InsufficientSpan(
            f"angle span {span:.3g} rad covers less than one expected fringe period "
            f"{2.0 * np.pi / w0:.3g} rad"
        )

    ps = ks / nu_arr
    sigma = np.maximum(np.sqrt(np.clip(ps * (1.0 - ps), 0.0, None) / nu_arr), 0.5 / nu_arr)
    design = np.column_stack([np.cos(w0 * th), np.sin(w0 * th), np.ones_like(th)])
    (a, b, c), *_ = np.linalg.lstsq(design, ps, rcond=None)
    nominal = {
        "frequency": w0,
        "phase": float(params.phi0),
        "visibility": 1.0,
        "offset": 1.0,
    }
    start = {
        "frequency": w0,
        "phase": float(np.arctan2(b, -a)),
        "visibility": float(2.0 * np.hypot(a, b)),
        "offset": float(2.0 * c),
    }
    free_names = tuple(name for name in FIT_PARAMS if name in free_set)

    def unpack(x: np.ndarray) -> dict:
        vals = dict(nominal)
        for name, v in zip(free_names, x):
            vals[name] = float(v)
        return vals

    def residuals(x: np.ndarray) -> np.ndarray:
        v = unpack(x)
        model = 0.5 * (
            v["offset"] - v["visibility"] * np.cos(v["frequency"] * th + v["phase"])
        )
        return (model - ps) / sigma

    x0 = np.array([start[name] for name in free_names])
    result = least_squares(residuals, x0, method="lm", max_nfev=200, gtol=1e-12)
    if result.status == 0:
        raise NonConvergence("fringe fit exhausted its evaluation budget without converging")
    fitted = unpack(result.x)
    freq = fitted["frequency"]
    phase = fitted["phase"]
    vis = fitted["visibility"]
    off = fitted["offset"]
    # sign/wrap normalization only where the coupled parameters are all free
    if vis < 0.0 and {"visibility", "phase"} <= free_set:
        vis, phase = -vis, phase + np.pi
    if freq < 0.0 and {"frequency", "phase"} <= free_set:
        freq, phase = -freq, -phase
    if "phase" in free_set:
        phase = float((phase + np.pi) % (2.0 * np.pi) - np.pi)
    return FringeFit(
        freq=freq,
        phase=phase,
        visibility=vis,
        offset=off,
        free=free_names,
        cost=float(result.cost),
        nfev=int(result.nfev),
    )


# ---------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class TrialResult:
    index: int
    jitter: float
    drift: float
    p_true: float
    count: int
    p_hat: float
    theta_hat: float
    error: float


@dataclass(frozen=True)
class EstimationReport:
    """Aggregate of one estimation campaign at a fixed operating point."""

    params: SwitchParams
    nu: int
    trials: int
    noise: NoiseModel
    seed: int
    theta_mean: float | None
    rmse: float | None
    bias: float | None
    rmse_sqrt_nu: float | None
    crb_rad: float
    gap: float | None
    ideal_enhancement: float
    practical_enhancement: float | None
    hup_product: float | None
    hup_satisfied: bool | None
    insufficient_trials: bool
    results: tuple[TrialResult, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "m": self.params.m,
            "l": self.params.l,
            "theta_true": self.params.theta,
            "phi0": self.params.phi0,
            "nu": self.nu,
            "trials": self.trials,
            "noise": {
                "visibility": self.noise.visibility,
                "sigma_theta": self.noise.sigma_theta,
                "sigma_phi": self.noise.sigma_phi,
                "efficiency": self.noise.efficiency,
            },
            "seed": self.seed,
            "theta_mean_rad": self.theta_mean,
            "rmse_rad": self.rmse,
            "bias_rad": self.bias,
            "rmse_sqrt_nu": self.rmse_sqrt_nu,
            "crb_rad": self.crb_rad,
            "gap": self.gap,
            "ideal_enhancement": self.ideal_enhancement,
            "practical_enhancement": self.practical_enhancement,
            "hup_product": self.hup_product,
            "hup_satisfied": self.hup_satisfied,
            "insufficient_trials": self.insufficient_trials,
        }


def _run_trial(
    t: int,
    params: SwitchParams,
    nu: int,
    noise: NoiseModel,
    cal: Calibration,
    seed: int,
    phase_tolerance: float,
) -> TrialResult:
    rng = np.random.default_rng([seed, t])
    # both nuisance normals are always drawn to keep the stream stable
    zj = rng.standard_normal()
    zd = rng.standard_normal()
    jitter = noise.sigma_theta * zj
    drift = noise.sigma_phi * zd
    p_true = noisy_probability(params, noise, jitter=jitter, drift=drift)
    count = sample_counts(p_true, nu, rng)
    theta_hat = estimate_theta_point(count, nu, params, cal, phase_tolerance)
    return TrialResult(
        index=t,
        jitter=jitter,
        drift=drift,
        p_true=p_true,
        count=count,
        p_hat=count / nu,
        theta_hat=theta_hat,
        error=theta_hat - params.theta,
    )


def run_campaign(
    params: SwitchParams,
    nu: int,
    trials: int,
    noise: NoiseModel | None = None,
    calibration: Calibration | None = None,
    seed: int = 0,
    workers: int = 1,
) -> EstimationReport:
    """Run ``trials`` independent estimation trials of ``nu`` probes each.

    RMS error is taken about the true angle, so calibration biases count
    against the precision.  The branch tolerance handed to the point estimator
    is six times the expected phase deviation including the configured noise,
    so a healthy campaign never trips it.
    """
    if trials < 0:
        raise NonPositiveInput(f"trial count must be nonnegative, got {trials!r}")
    if nu < 1:
        raise NonPositiveInput(f"probe count must be >= 1, got {nu!r}")
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1, got {workers!r}")
    noise = noise if noise is not None else NoiseModel.ideal()
    cal = calibration if calibration is not None else Calibration.from_params(params)
    rate = params.fringe_rate
    phase_sigma = np.sqrt(
        1.0 / (nu * cal.visibility**2)
        + (rate * noise.sigma_theta) ** 2
        + noise.sigma_phi**2
    )
    tol = 6.0 * float(phase_sigma)

    def trial(t: int) -> TrialResult:
        return _run_trial(t, params, nu, noise, cal, seed, tol)

    if workers == 1 or trials < 2:
        results = [trial(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(trial, range(trials), chunksize=max(1, trials // (4 * workers))))

    floor = crb(params.m, params.l, nu)
    ideal = float(rate)
    if trials < 2:
        theta_mean = float(results[0].theta_hat) if results else None
        return EstimationReport(
            params=params, nu=nu, trials=trials, noise=noise, seed=seed,
            theta_mean=theta_mean, rmse=None, bias=None, rmse_sqrt_nu=None,
            crb_rad=floor, gap=None, ideal_enhancement=ideal,
            practical_enhancement=None, hup_product=None, hup_satisfied=None,
            insufficient_trials=True, results=tuple(results),
        )
    errors = np.array([r.error for r in results])
    rmse = float(np.sqrt(np.mean(errors**2)))
    bias = float(np.mean(errors))
    rmse_sqrt_nu = rmse * float(np.sqrt(nu))
    eigen_sd = 2.0 * params.m * params.l  # generator spread of the eigenstate probe
    hup = hup_check(rmse_sqrt_nu, eigen_sd, threshold=0.49)
    return EstimationReport(
        params=params,
        nu=nu,
        trials=trials,
        noise=noise,
        seed=seed,
        theta_mean=float(np.mean([r.theta_hat for r in results])),
        rmse=rmse,
        bias=bias,
        rmse_sqrt_nu=rmse_sqrt_nu,
        crb_rad=floor,
        gap=rmse / floor,
        ideal_enhancement=ideal,
        practical_enhancement=1.0 / rmse_sqrt_nu,
        hup_product=hup.product,
        hup_satisfied=hup.satisfied,
        insufficient_trials=False,
        results=tuple(results),
    )


def quadrature_phi0(m: int, l: int, theta: float) -> float:
    """Calibration offset placing ``theta`` at the steepest fringe point."""
    x = np.pi / 2.0 - 4.0 * m * l * theta
    return float((x + np.pi) % (2.0 * np.pi) - np.pi)


# ---------------------------------------------------------------------------
# precision scaling


@dataclass(frozen=True)
class ScalingPoint:
    m: int
    l: int
    ml: int
    rmse: float
    rmse_sqrt_nu: float
    gap: float

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "l": self.l,
            "ml": self.ml,
            "rmse_rad": self.rmse,
            "rmse_sqrt_nu": self.rmse_sqrt_nu,
            "gap": self.gap,
        }


@dataclass(frozen=True)
class ScalingReport:
    """Log-log regression of campaign precision against the product ``m*l``."""

    points: tuple[ScalingPoint, ...]
    slope: float
    intercept: float
    nu: int
    trials: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "nu": self.nu,
            "trials": self.trials,
            "points": [p.to_dict() for p in self.points],
        }


def scaling_study(
    pairs: Sequence[tuple[int, int]],
    nu: int,
    trials: int,
    theta: float = 0.0,
    noise_for_pair: Callable[[int, int], NoiseModel] | None = None,
    seed: int = 0,
    workers: int = 1,
) -> ScalingReport:
    """Campaigns over an ``(m, l)`` ladder plus a log-log precision regression.

    Each setting runs at its own quadrature calibration so every campaign
    operates at full slope.  An ideal run regresses to slope -1 against
    ``m*l`` with intercept ``log(1/4)``; a constant noise gap shifts the
    intercept by ``log(gap)`` without touching the slope.
    """
    pairs = [(int(m), int(l)) for m, l in pairs]
    if len(pairs) < 3:
        raise InsufficientPairs(f"scaling regression needs at least 3 settings, got {len(pairs)}")
    if len({m * l for m, l in pairs}) < 2:
        raise InsufficientPairs("scaling regression needs at least 2 distinct m*l products")
    points = []
    for i, (m, l) in enumerate(pairs):
        params = SwitchParams(m=m, l=l, theta=theta, phi0=quadrature_phi0(m, l, theta))
        noise = noise_for_pair(m, l) if noise_for_pair is not None else NoiseModel.ideal()
        report = run_campaign(
            params, nu, trials, noise=noise, seed=seed + i, workers=workers
        )
        if report.rmse is None:
            raise InsufficientPairs("scaling campaigns need at least 2 trials per setting")
        points.append(
            ScalingPoint(
                m=m, l=l, ml=m * l,
                rmse=report.rmse,
                rmse_sqrt_nu=report.rmse_sqrt_nu,
                gap=report.gap,
            )
        )
    xs = np.log([p.ml for p in points])
    ys = np.log([p.rmse_sqrt_nu for p in points])
    slope, intercept = np.polyfit(xs, ys, 1)
    return ScalingReport(
        points=tuple(points),
        slope=float(slope),
        intercept=float(intercept),
        nu=int(nu),
        trials=int(trials),
    )
