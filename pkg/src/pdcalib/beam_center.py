"""Sub-millimeter beam-center estimation along a photodetector array.

A laser spot sweeping the 1-D array produces a bell-shaped peak-voltage
profile over the diode elements. Taking logs turns the Gaussian into a
quadratic, which is fit by iteratively reweighted least squares: weights
start as the squared measurements and are replaced by the squared model
predictions on subsequent passes, which suppresses the log-domain noise
amplification of the small samples. The center follows from the quadratic
coefficients as mu = -a1 / (2 a2), sigma^2 = -1 / (2 a2).

Because only four array elements are sampled by the DAQ, two synthetic
anchor samples at the noise level are appended outside the array span
before fitting; they keep the quadratic concave when the spot sits near
an array end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# anchor samples appended outside the 0-15 mm array span
AUGMENT_POSITIONS_M = (-0.005, 0.020)
AUGMENT_VALUE_V = 0.1
# fits are meaningful only near the array: span plus the anchor margin
MU_BOUNDS_M = (-0.010, 0.025)

DEFAULT_ITERATIONS = 10
CONVERGENCE_TOL_M = 1e-6  # |delta mu| between the final two passes


class GaussianFitError(ValueError):
    """Log-quadratic fit failed (non-concave or singular system)."""


@dataclass(frozen=True)
class GaussianFitResult:
    """Result of one beam-center fit.

    mu and sigma are in meters along the PD axis, amplitude in volts.
    """

    mu: float
    sigma: float
    amplitude: float
    iterations_used: int
    converged: bool

    def __post_init__(self):
        if self.sigma <= 0:
            raise GaussianFitError(f"non-positive sigma {self.sigma}")
        if not (MU_BOUNDS_M[0] <= self.mu <= MU_BOUNDS_M[1]):
            raise GaussianFitError(
                f"fitted center {self.mu * 1e3:.2f} mm outside the usable "
                f"[{MU_BOUNDS_M[0] * 1e3:.0f}, {MU_BOUNDS_M[1] * 1e3:.0f}] mm window"
            )


def augment_samples(x, y):
    """Append the two low-level anchor samples to a measurement set.

    Adds (-5 mm, 0.1 V) and (20 mm, 0.1 V) exactly once; calling it on an
    already-augmented set raises.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("augment_samples expects matching 1-D x and y")
    for xa in AUGMENT_POSITIONS_M:
        if np.any(np.isclose(x, xa, rtol=0.0, atol=1e-12)):
            raise ValueError("samples already augmented")
    x_out = np.concatenate([x, AUGMENT_POSITIONS_M])
    y_out = np.concatenate([y, [AUGMENT_VALUE_V, AUGMENT_VALUE_V]])
    return x_out, y_out


def fit_gaussian_iterative(
    x,
    y,
    k_max: int = DEFAULT_ITERATIONS,
    noise_floor: float = AUGMENT_VALUE_V,
) -> GaussianFitResult:
    """Fit a Gaussian to (position, peak-voltage) samples.

    Parameters
    ----------
    x : array
        Element positions in meters (distinct).
    y : array
        Peak voltages in volts. Values at or below ``noise_floor`` are
        clamped to it so the log is always defined.
    k_max : int
        Number of reweighting passes (weights y_(k-1)^2; pass 0 uses the
        measured values, later passes the model predictions).

    Returns
    -------
    GaussianFitResult
        With mu = -a1/(2 a2) and sigma^2 = -1/(2 a2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("fit_gaussian_iterative expects matching 1-D x and y")
    if len(np.unique(x)) != len(x):
        raise ValueError("element positions must be distinct")
    y = np.maximum(y, noise_floor)
    if np.count_nonzero(y > 0) < 3:
        raise GaussianFitError("need at least 3 positive samples")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")

    # center the abscissa so the normal equations stay well scaled and the
    # estimate is shift-equivariant
    x0 = 0.5 * (x.min() + x.max())
    u = x - x0
    ln_y = np.log(y)

    w = y * y  # pass 0: squared measurements
    mu_prev = None
    mu_local = math.nan
    a2 = a1 = a0 = math.nan
    converged = False
    iterations = 0
    for k in range(k_max):
        p4 = np.sum(u ** 4 * w)
        p3 = np.sum(u ** 3 * w)
        p2 = np.sum(u ** 2 * w)
        p1 = np.sum(u * w)
        p0 = np.sum(w)
        m = np.array([[p4, p3, p2], [p3, p2, p1], [p2, p1, p0]])
        b = np.array(
            [np.sum(u ** 2 * w * ln_y), np.sum(u * w * ln_y), np.sum(w * ln_y)]
        )
        try:
            a2, a1, a0 = np.linalg.solve(m, b)
        except np.linalg.LinAlgError as exc:
            raise GaussianFitError(f"singular normal matrix at pass {k}") from exc
        if a2 >= 0:
            raise GaussianFitError("non-concave log fit (a2 >= 0)")
        mu_local = -a1 / (2.0 * a2)
        iterations = k + 1
        if mu_prev is not None and abs(mu_local - mu_prev) < CONVERGENCE_TOL_M:
            converged = True
        mu_prev = mu_local
        w = np.exp(a2 * u * u + a1 * u + a0) ** 2  # next pass: squared model

    sigma_sq = -1.0 / (2.0 * a2)
    amplitude = math.exp(a0 - a1 * a1 / (4.0 * a2))
    return GaussianFitResult(
        mu=float(mu_local + x0),
        sigma=float(math.sqrt(sigma_sq)),
        amplitude=float(amplitude),
        iterations_used=iterations,
        converged=converged,
    )


ARRAY_CENTER_M = 0.0075  # midpoint of the 0-15 mm element span


def select_key_beam(fits) -> int:
    """Index of the fit whose center is closest to the 7.5 mm array center.

    Ties go to the earlier-fired beam (lower index). ``fits`` may contain
    None entries for failed fits; raises if none succeeded.
    """
    best = None
    best_dist = math.inf
    for i, f in enumerate(fits):
        if f is None:
            continue
        d = abs(f.mu - ARRAY_CENTER_M)
        if d < best_dist - 1e-15:
            best, best_dist = i, d
    if best is None:
        raise GaussianFitError("no successful fit to select a key beam from")
    return best


def beams_on_pd(record, firing_period: float, merge_tol: float = 10e-6):
    """Split a PD record into per-beam voltage groups by firing time.

    Events separated by roughly the firing period (~55 us between azimuth
    cycles) are distinct beams; events closer than ``merge_tol`` are merged
    by taking the element-wise peak (they belong to the same pulse group).

    Returns a list of (time, voltage-vector) tuples in firing order.
    """
    times = np.asarray(record.sample_times, dtype=float)
    volts = np.atleast_2d(np.asarray(record.element_voltages, dtype=float))
    if times.size == 0:
        return []
    order = np.argsort(times, kind="stable")
    groups = []
    for idx in order:
        t, v = times[idx], volts[idx]
        if groups and t - groups[-1][0] < merge_tol:
            t0, v0 = groups[-1]
            groups[-1] = (t0, np.maximum(v0, v))
        else:
            groups.append((t, v.copy()))
    return groups
