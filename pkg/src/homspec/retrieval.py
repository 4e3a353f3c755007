"""Recover optical depth, visibility and residual delay from coincidence maps.

The forward model is the fringe form of the coincidence probability,

    P(od, V, delay) = 1/2 * [1 - V*cos(od*G + delay*H)] * J,

with G the unit-OD phase difference between the two spectral coordinates,
H the linear phase of a residual idler delay and J the joint spectral
intensity, followed by an optional boxcar over bins and normalization to
unit sum over the unmasked bins.  Normalizing both data and model removes
the unknown detection prefactor, so only fringe shape is fit.

The cost landscape oscillates in od (fringe aliasing), so the bounded
trust-region least-squares solve is repeated from a log-spaced ladder of od
starting points and the best minimum kept.  tau is not fitted; it comes
from the independently measured cell temperature.  Bins within mask_radius
of the resonance on either axis are excluded: there the phase varies too
fast for the bin grid and the boxcar only approximates the averaging.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import least_squares, minimize_scalar

from .constants import CODATA, RB87
from .errors import DegenerateMap
from .interference import (
    CoincidenceMap,
    InterferenceSettings,
    MapKind,
    coincidence_probability_cosine,
    pixel_average,
)
from .spectra import JointSpectralAmplitude, WavelengthGrid
from .vapor import DispersionModel, spectral_phase

FS = 1e-15

_DEFAULT_LADDER = tuple(float(v) for v in np.logspace(0.0, 5.0, 11))


@dataclass(frozen=True)
class FitConfig:
    """Settings for the coincidence-map fit.

    tau is the Doppler-broadened lifetime fixed from the measured cell
    temperature (vapor.doppler_lifetime); it is not a fit parameter.
    """

    tau: float
    lambda0: float = RB87.d1_wavelength
    init_od: float = 100.0
    init_visibility: float = 0.9
    od_bounds: tuple[float, float] = (0.0, 1e6)
    visibility_bounds: tuple[float, float] = (0.0, 1.0)
    delay_bounds_fs: tuple[float, float] = (-100.0, 100.0)
    fit_delay: bool = True
    max_iterations: int = 400
    tol: float = 1e-12
    mask_radius: int = 2
    kernel_width: int = 1
    od_ladder: tuple[float, ...] = _DEFAULT_LADDER

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.mask_radius < 0:
            raise ValueError("mask_radius must be non-negative")
        for low, high in (self.od_bounds, self.visibility_bounds, self.delay_bounds_fs):
            if not low < high:
                raise ValueError("bounds must satisfy low < high")


@dataclass(frozen=True)
class FitResult:
    """Best-fit parameters with a local covariance estimate.

    ``covariance`` is the full parameter covariance matrix in the order
    (od, visibility[, delay_fs]); ``param_sigma`` holds its diagonal square
    roots under the parameter names.
    """

    od_hat: float
    visibility_hat: float
    delay_fs: float
    cost: float
    iterations: int
    converged: bool
    param_sigma: dict = field(default_factory=dict)
    od_visibility_correlation: float = math.nan
    covariance: np.ndarray | None = None


def resonance_mask(
    grid_p: WavelengthGrid,
    grid_m: WavelengthGrid,
    lambda0: float,
    mask_radius: int,
) -> np.ndarray:
    """Boolean matrix, True where a bin is excluded by the resonance cross."""
    i0 = grid_p.nearest_bin(lambda0)
    j0 = grid_m.nearest_bin(lambda0)
    near_p = np.abs(np.arange(grid_p.n_bins) - i0) <= mask_radius
    near_m = np.abs(np.arange(grid_m.n_bins) - j0) <= mask_radius
    return near_p[:, None] | near_m[None, :]


def phase_difference_map(
    od: float,
    tau: float,
    lambda0: float,
    grid_p: WavelengthGrid,
    grid_m: WavelengthGrid | None = None,
) -> np.ndarray:
    """Matrix of phi(lambda_+) - phi(lambda_-) over the grid pair [rad]."""
    if grid_m is None:
        grid_m = grid_p
    model = DispersionModel(od=od, tau=tau, lambda0=lambda0)
    phi_p = spectral_phase(model, grid_p.centers)
    phi_m = spectral_phase(model, grid_m.centers)
    return phi_p[:, None] - phi_m[None, :]


def phase_profile_mod_2pi(
    od: float, tau: float, lambda0: float, grid: WavelengthGrid
) -> np.ndarray:
    """Spectral phase wrapped to [0, 2*pi) on the grid's bin centers."""
    model = DispersionModel(od=od, tau=tau, lambda0=lambda0)
    return np.mod(spectral_phase(model, grid.centers), 2.0 * math.pi)


def forward_model(
    od: float,
    visibility: float,
    delay: float,
    jsa: JointSpectralAmplitude,
    tau: float,
    lambda0: float = RB87.d1_wavelength,
    kernel_width: int = 1,
) -> CoincidenceMap:
    """Normalized fringe-form coincidence map for one parameter set.

    ``delay`` is the residual idler delay in seconds.  The map is
    boxcar-averaged over kernel_width bins and scaled to unit sum (left
    untouched when identically zero, e.g. od = 0 at full visibility).
    """
    model = DispersionModel(od=od, tau=tau, lambda0=lambda0)
    cmap = coincidence_probability_cosine(
        jsa, model, InterferenceSettings(visibility), residual_delay=delay
    )
    cmap = pixel_average(cmap, kernel_width)
    total = float(np.sum(cmap.values))
    if total <= 0.0:
        return cmap
    return CoincidenceMap(
        cmap.grid_p, cmap.grid_m, cmap.values / total, MapKind.PROBABILITY
    )


class _FringeModel:
    """Precomputed pieces of the fringe model and its parameter Jacobian."""

    def __init__(self, jsa: JointSpectralAmplitude, config: FitConfig, mask: np.ndarray):
        centers = jsa.grid_s.centers
        g = spectral_phase(
            DispersionModel(od=1.0, tau=config.tau, lambda0=config.lambda0), centers
        )
        self.phase_unit = g[:, None] - g[None, :]
        inv = 1.0 / centers
        # Phase per femtosecond of residual delay.
        self.delay_unit = 2.0 * math.pi * CODATA.c * FS * (inv[:, None] - inv[None, :])
        self.jsi = np.abs(jsa.amplitude) ** 2
        self.keep = ~mask
        self.kernel = config.kernel_width
        self.fit_delay = config.fit_delay

    def _boxcar(self, arr: np.ndarray) -> np.ndarray:
        if self.kernel == 1:
            return arr
        return ndimage.uniform_filter(arr, size=self.kernel, mode="reflect")

    def normalized_model_and_jac(self, theta: np.ndarray):
        """Model vector over unmasked bins and its Jacobian columns."""
        od, vis = theta[0], theta[1]
        delay_fs = theta[2] if self.fit_delay else 0.0
        dphi = od * self.phase_unit + delay_fs * self.delay_unit
        cos = np.cos(dphi)
        sin = np.sin(dphi)
        raw = 0.5 * (1.0 - vis * cos) * self.jsi
        d_od = 0.5 * vis * sin * self.phase_unit * self.jsi
        d_vis = -0.5 * cos * self.jsi
        smooth = self._boxcar(raw)
        total = float(np.sum(smooth[self.keep]))
        if total <= 0.0:
            n = int(np.count_nonzero(self.keep))
            return np.zeros(n), np.zeros((n, 3 if self.fit_delay else 2))
        m = smooth[self.keep] / total
        cols = [self._boxcar(d_od)[self.keep], self._boxcar(d_vis)[self.keep]]
        if self.fit_delay:
            cols.append(self._boxcar(0.5 * vis * sin * self.delay_unit * self.jsi)[self.keep])
        jac = np.empty((m.size, len(cols)))
        for k, col in enumerate(cols):
            jac[:, k] = (col - m * float(np.sum(col))) / total
        return m, jac


def _estimate_weights(data: np.ndarray, kind: MapKind) -> np.ndarray:
    """Per-bin inverse-variance weights for the normalized data vector.

    Covariance estimates have a per-bin variance that tracks the underlying
    raw rate; with only the normalized map available, the positive part of
    the data plus its mean magnitude serves as a plug-in for that rate.
    Probability maps (noiseless theory) get uniform weights.
    """
    if kind is not MapKind.COVARIANCE:
        return np.ones_like(data)
    scale = float(np.mean(np.abs(data)))
    if scale <= 0.0:
        return np.ones_like(data)
    return 1.0 / (np.clip(data, 0.0, None) + scale)


def prepare_objective(cmap: CoincidenceMap, jsa: JointSpectralAmplitude, config: FitConfig):
    """Build the weighted least-squares pieces shared by fit and diagnostics.

    Returns (residual_fn, jacobian_fn, cost_fn, gradient_fn, n_params); the
    parameter vector is [od, visibility, delay_fs] (delay omitted when not
    fitted).  Raises DegenerateMap when the map carries no usable signal.
    """
    if cmap.kind not in (MapKind.COVARIANCE, MapKind.PROBABILITY):
        raise ValueError(f"fit expects a covariance or probability map, got {cmap.kind.value}")
    if not (cmap.grid_p.is_close(jsa.grid_s) and cmap.grid_m.is_close(jsa.grid_i)):
        raise ValueError("map and amplitude grids differ")
    if not np.any(cmap.values != 0.0):
        raise DegenerateMap("input map is identically zero")
    mask = resonance_mask(cmap.grid_p, cmap.grid_m, config.lambda0, config.mask_radius)
    data = cmap.values[~mask]
    total = float(np.sum(data))
    if total <= 0.0:
        raise DegenerateMap("unmasked bins sum to a non-positive total")
    data = data / total
    sqrt_w = np.sqrt(_estimate_weights(data, cmap.kind))
    model = _FringeModel(jsa, config, mask)

    def residuals(theta: np.ndarray) -> np.ndarray:
        m, _ = model.normalized_model_and_jac(theta)
        return sqrt_w * (m - data)

    def jacobian(theta: np.ndarray) -> np.ndarray:
        _, jac = model.normalized_model_and_jac(theta)
        return sqrt_w[:, None] * jac

    def cost(theta: np.ndarray) -> float:
        r = residuals(theta)
        return float(r @ r)

    def gradient(theta: np.ndarray) -> np.ndarray:
        m, jac = model.normalized_model_and_jac(theta)
        r = sqrt_w * (m - data)
        return 2.0 * (sqrt_w[:, None] * jac).T @ r

    return residuals, jacobian, cost, gradient, 3 if config.fit_delay else 2


def _interior(value: float, low: float, high: float) -> float:
    pad = 1e-9 * (high - low)
    return min(max(value, low + pad), high - pad)


def _profile_polish(residuals, jacobian, theta_best, lower, upper, config: FitConfig):
    """Global refinement by profiling the cost over od.

    The masked cost is oscillatory in od and can be nearly degenerate with
    visibility, so the trust-region runs alone are unreliable: this scans od
    geometrically over the whole ladder range with the inner (visibility,
    delay) subproblem re-solved at each point (several delay starts escape
    the fringe traps of a residual delay), then Brent-refines od between the
    scan minimum's neighbors.  Returns (theta, cost, nfev, success); the
    caller keeps the result only if it improves on the incumbent.
    """
    nfev = 0
    inner_dim = lower.size - 1
    inner_state = np.array(theta_best[1:], dtype=float)

    def inner_once(od: float, x0: np.ndarray):
        nonlocal nfev
        res = least_squares(
            lambda t: residuals(np.concatenate(([od], t))),
            np.clip(x0, lower[1:] + 1e-12, upper[1:] - 1e-12),
            jac=lambda t: jacobian(np.concatenate(([od], t)))[:, 1:],
            bounds=(lower[1:], upper[1:]),
            method="trf",
            ftol=1e-15,
            xtol=1e-15,
            gtol=1e-15,
            max_nfev=60,
        )
        nfev += res.nfev
        return 2.0 * res.cost, res.x

    def inner_starts():
        starts = [inner_state.copy()]
        if inner_dim == 2:
            for delay0 in (0.55 * lower[2], 0.55 * upper[2]):
                if abs(inner_state[1] - delay0) > 0.05 * (upper[2] - lower[2]):
                    alt = inner_state.copy()
                    alt[1] = delay0
                    starts.append(alt)
        return starts

    def profile(od: float, multi_start: bool):
        nonlocal inner_state
        best_cost, best_x = math.inf, None
        for x0 in inner_starts() if multi_start else [inner_state.copy()]:
            cost, x = inner_once(od, x0)
            if cost < best_cost:
                best_cost, best_x = cost, x
        inner_state = best_x
        return best_cost, best_x

    od_best = float(theta_best[0])
    anchor = max(abs(od_best), 1.0)
    lo = max(lower[0], min(min(config.od_ladder), anchor / 5.0))
    hi = min(upper[0], max(max(config.od_ladder), anchor * 5.0))
    lo = max(lo, hi * 1e-7)
    if not hi > lo:
        return np.array(theta_best), math.inf, nfev, False

    scan = np.unique(np.concatenate((np.geomspace(lo, hi, 33), [np.clip(anchor, lo, hi)])))
    scan_results = [profile(od, multi_start=True) for od in scan]
    scan_costs = np.array([c for c, _ in scan_results])
    k = int(np.argmin(scan_costs))
    inner_state = scan_results[k][1].copy()
    scalar = minimize_scalar(
        lambda od: profile(od, multi_start=False)[0],
        bounds=(scan[max(k - 1, 0)], scan[min(k + 1, scan.size - 1)]),
        method="bounded",
        options={"xatol": 1e-10 * max(scan[k], 1.0), "maxiter": 200},
    )
    od_star = float(scalar.x)
    cost_star, inner = profile(od_star, multi_start=False)
    if scan_costs[k] < cost_star:
        od_star = float(scan[k])
        cost_star, inner = scan_results[k]
    return np.concatenate(([od_star], inner)), cost_star, nfev, bool(scalar.success)


def fit(cmap: CoincidenceMap, jsa: JointSpectralAmplitude, config: FitConfig) -> FitResult:
    """Multi-start bounded least-squares fit of {od, visibility, delay}.

    The data map is normalized over unmasked bins (scale invariant), each od
    in the start ladder seeds a trust-region solve, and a profiled-od polish
    (inner parameters re-solved along an od scan) guards against the ridges
    and fringe traps of the oscillatory cost; the lowest-cost minimum wins.
    A failed convergence is reported through the ``converged`` flag on the
    best iterate, never as an exception.
    """
    residuals, jacobian, _, _, n_params = prepare_objective(cmap, jsa, config)

    lower = [config.od_bounds[0], config.visibility_bounds[0]]
    upper = [config.od_bounds[1], config.visibility_bounds[1]]
    if config.fit_delay:
        lower.append(config.delay_bounds_fs[0])
        upper.append(config.delay_bounds_fs[1])
    lower = np.array(lower)
    upper = np.array(upper)

    starts = []
    for od0 in tuple(config.od_ladder) + (config.init_od,):
        theta0 = [
            _interior(od0, *config.od_bounds),
            _interior(config.init_visibility, *config.visibility_bounds),
        ]
        if config.fit_delay:
            theta0.append(_interior(0.0, *config.delay_bounds_fs))
        starts.append(np.array(theta0))

    best = None
    total_nfev = 0
    for theta0 in starts:
        res = least_squares(
            residuals,
            theta0,
            jac=jacobian,
            bounds=(lower, upper),
            method="trf",
            x_scale="jac",
            ftol=config.tol,
            xtol=config.tol,
            gtol=config.tol,
            max_nfev=config.max_iterations,
        )
        total_nfev += res.nfev
        if best is None or res.cost < best.cost:
            best = res

    # The od direction can be nearly degenerate with visibility when only
    # small phases survive the resonance mask, leaving a ridge too flat for
    # the trust region's gradient test.  Polish by profiling the cost over
    # od, solving the inner (visibility, delay) subproblem exactly.
    theta, polish_cost, polish_nfev, polish_ok = _profile_polish(
        residuals, jacobian, best.x, lower, upper, config
    )
    total_nfev += polish_nfev
    converged = bool(best.status > 0)
    if polish_cost <= 2.0 * best.cost:
        cost = polish_cost
        converged = converged or polish_ok
        # One joint solve from the polished point ties the profiled od back
        # to a stationary point of the full parameter set.
        final = least_squares(
            residuals,
            np.clip(theta, lower + 1e-12, upper - 1e-12),
            jac=jacobian,
            bounds=(lower, upper),
            method="trf",
            x_scale="jac",
            ftol=config.tol,
            xtol=config.tol,
            gtol=config.tol,
            max_nfev=config.max_iterations,
        )
        total_nfev += final.nfev
        if 2.0 * final.cost <= cost:
            theta = final.x
            cost = 2.0 * final.cost
    else:
        theta = best.x
        cost = 2.0 * best.cost  # scipy reports 0.5*sum(r^2)
    jac = jacobian(theta)
    dof = max(jac.shape[0] - n_params, 1)
    sigma2 = cost / dof
    try:
        cov = np.linalg.pinv(jac.T @ jac) * sigma2
        sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        denom = sigmas[0] * sigmas[1]
        corr = float(cov[0, 1] / denom) if denom > 0.0 else math.nan
    except np.linalg.LinAlgError:
        cov = None
        sigmas = np.full(n_params, math.nan)
        corr = math.nan

    param_sigma = {"od": float(sigmas[0]), "visibility": float(sigmas[1])}
    param_sigma["delay_fs"] = float(sigmas[2]) if config.fit_delay else 0.0
    return FitResult(
        od_hat=float(theta[0]),
        visibility_hat=float(theta[1]),
        delay_fs=float(theta[2]) if config.fit_delay else 0.0,
        cost=float(cost),
        iterations=int(total_nfev),
        converged=converged,
        param_sigma=param_sigma,
        od_visibility_correlation=corr,
        covariance=cov,
    )
