"""Pair PD-frame beam-center measurements with the sensor beams that made them.

Three steps per photodetector:

1. ``find_pd_beam``: the beam that struck the module shows up as a local
   reflectivity maximum in its channel row (the module surface out-reflects
   the black surround).
2. ``build_azimuth_center_model``: over repeated scans the reported azimuth
   of that beam fluctuates with the head rotation, and the PD-measured
   center moves proportionally. A RANSAC line over (azimuth, center) pairs
   rejects one-index association slips, which show up as center jumps of
   one full beam interval (~9.7 mm).
3. ``make_correspondences``: the smoothed center, converted to the board
   frame through the module's mounting offset, is paired with the beam's
   polar measurement for the pose solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PolarBeam
from .scene import PdPlacement

DEG = math.pi / 180.0
MM = 1e-3

DEFAULT_DETECTION_MARGIN = 10.0  # reflectivity counts above the row median
DEFAULT_SEARCH_WINDOW_M = 0.030
DEFAULT_RANSAC_THRESHOLD_MM = 2.0
DEFAULT_RANSAC_ITERATIONS = 200


class DetectionMiss(RuntimeError):
    """No sufficiently elevated beam near the photodetector in this scan."""


class ModelError(RuntimeError):
    """Azimuth-center model could not be built (systematic fault likely)."""


@dataclass(frozen=True)
class Correspondence:
    """One paired feature point: board-frame position vs sensor beam."""

    pd_id: str
    scan_id: int
    p_o: np.ndarray          # (3,) board-frame position, meters
    beam: PolarBeam
    weight: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.p_o, dtype=float).reshape(3)
        object.__setattr__(self, "p_o", p)
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("correspondence weight must be in [0, 1]")


@dataclass(frozen=True)
class AzimuthCenterModel:
    """Linear map center_mm = nu + tau * azimuth_deg for one PD."""

    nu: float                # mm
    tau: float               # mm / deg
    inlier_mask: np.ndarray
    fit_rms: float           # mm, on inliers

    def predict(self, alpha_deg):
        return self.nu + self.tau * np.asarray(alpha_deg)


def find_pd_beam(
    row_beams,
    row_positions: np.ndarray,
    pd: PdPlacement,
    margin: float = DEFAULT_DETECTION_MARGIN,
    window: float = DEFAULT_SEARCH_WINDOW_M,
) -> PolarBeam:
    """Identify the beam that struck a PD module from its reflectivity.

    Parameters
    ----------
    row_beams : list[PolarBeam]
        All beams of the channel row crossing the module.
    row_positions : (N, 3) array
        Their nominal board-frame positions (from the rig's nominal pose).
    pd : PdPlacement
        The module searched for.
    margin : float
        Required elevation of the peak above the row's median reflectivity.
    window : float
        Search radius around the module center on the board, meters.

    Raises
    ------
    DetectionMiss
        If no beam in the window is elevated enough; the scan is skipped
        for this PD.
    """
    if not row_beams:
        raise DetectionMiss(f"{pd.pd_id}: empty channel row")
    positions = np.atleast_2d(row_positions)
    refl = np.array([b.reflectivity for b in row_beams])
    center = np.array([pd.offset[0], 0.0, pd.offset[1]])
    dist = np.linalg.norm(positions - center, axis=1)
    near = np.nonzero(dist <= window)[0]
    if near.size == 0:
        raise DetectionMiss(f"{pd.pd_id}: no beams within {window * 1e3:.0f} mm")
    row_median = float(np.median(refl))
    best = None
    for i in near:
        level = refl[i]
        if level < row_median + margin:
            continue
        if best is None or level > refl[best] + 1e-12:
            best = i
        elif abs(level - refl[best]) <= 1e-12 and dist[i] < dist[best]:
            best = i  # tie: prefer the beam nearer the expected position
    if best is None:
        raise DetectionMiss(
            f"{pd.pd_id}: no local maximum exceeds median {row_median:.1f} + {margin:.0f}"
        )
    return row_beams[int(best)]


def _line_fit(a: np.ndarray, mu: np.ndarray) -> tuple[float, float]:
    """Least-squares (nu, tau) for mu = nu + tau * a; tau = 0 for constant a."""
    if np.ptp(a) < 1e-12:
        return float(np.mean(mu)), 0.0
    tau, nu = np.polyfit(a, mu, 1)
    return float(nu), float(tau)


def build_azimuth_center_model(
    alpha_deg,
    mu_mm,
    threshold: float = DEFAULT_RANSAC_THRESHOLD_MM,
    iterations: int = DEFAULT_RANSAC_ITERATIONS,
    seed: int = 0,
) -> AzimuthCenterModel:
    """RANSAC + refit of the linear azimuth-to-center relation for one PD.

    Inliers lie within ``threshold`` mm of the line; the final (nu, tau) is
    a least-squares refit on the inliers. Outliers are expected to be
    one-index azimuth slips showing ~9.7 mm jumps.

    Raises
    ------
    ModelError
        With fewer than 5 pairs or fewer than 50 % inliers.
    """
    a = np.asarray(alpha_deg, dtype=float)
    mu = np.asarray(mu_mm, dtype=float)
    if a.shape != mu.shape or a.ndim != 1:
        raise ValueError("alpha and mu must be matching 1-D arrays")
    n = len(a)
    if n < 5:
        raise ModelError(f"need at least 5 scan pairs, got {n}")

    if np.ptp(a) < 1e-12:
        # zero-variance regressor: degenerate but usable, tau = 0
        nu = float(np.mean(mu))
        resid = np.abs(mu - nu)
        mask = resid <= threshold
        if mask.sum() < 0.5 * n:
            raise ModelError("constant-azimuth pairs disagree beyond threshold")
        nu = float(np.mean(mu[mask]))
        rms = float(np.sqrt(np.mean((mu[mask] - nu) ** 2)))
        return AzimuthCenterModel(nu=nu, tau=0.0, inlier_mask=mask, fit_rms=rms)

    rng = np.random.default_rng(seed)
    best_mask = None
    for _ in range(iterations):
        i, k = rng.choice(n, size=2, replace=False)
        if abs(a[i] - a[k]) < 1e-12:
            continue
        tau = (mu[k] - mu[i]) / (a[k] - a[i])
        nu = mu[i] - tau * a[i]
        resid = np.abs(mu - (nu + tau * a))
        mask = resid <= threshold
        if best_mask is None or mask.sum() > best_mask.sum():
            best_mask = mask
    if best_mask is None or best_mask.sum() < max(2, 0.5 * n):
        raise ModelError(
            f"RANSAC kept {0 if best_mask is None else int(best_mask.sum())}/{n} pairs; "
            "systematic fault suspected"
        )
    nu, tau = _line_fit(a[best_mask], mu[best_mask])
    resid = np.abs(mu - (nu + tau * a))
    mask = resid <= threshold
    nu, tau = _line_fit(a[mask], mu[mask])
    rms = float(np.sqrt(np.mean((mu[mask] - (nu + tau * a[mask])) ** 2)))
    return AzimuthCenterModel(nu=nu, tau=tau, inlier_mask=mask, fit_rms=rms)


def pd_measurement_to_board(pd: PdPlacement, mu_m: float) -> np.ndarray:
    """Board-frame position of a PD-axis measurement at the centerline.

    Equivalent to the frame-conversion convention o_p = d_p - P_offset with
    d_p = (mu, 0, centerline) for horizontal modules (axes swapped for
    vertical ones).
    """
    d_p = np.array([mu_m, 0.0, 0.0]) if pd.orientation == "horizontal" else np.array([0.0, 0.0, mu_m])
    return d_p - pd.frame_offset


def make_correspondences(
    models: dict,
    key_beams: dict,
    placements,
    scan_id: int = 0,
    min_count: int = 3,
) -> list:
    """Assemble solver-ready correspondences for one scan.

    Parameters
    ----------
    models : dict
        pd_id -> AzimuthCenterModel (PDs without a model are skipped).
    key_beams : dict
        pd_id -> detected PolarBeam for this scan.
    placements : iterable[PdPlacement]
        Modules to consider.
    scan_id : int
        Scan the key beams came from.
    min_count : int
        Minimum correspondences required downstream (the pose solver needs
        at least 3 non-collinear points).
    """
    out = []
    for pd in placements:
        model = models.get(pd.pd_id)
        beam = key_beams.get(pd.pd_id)
        if model is None or beam is None:
            continue
        mu_m = float(model.predict(beam.alpha / DEG)) * MM
        p_o = pd_measurement_to_board(pd, mu_m)
        out.append(Correspondence(pd_id=pd.pd_id, scan_id=scan_id, p_o=p_o, beam=beam))
    if len(out) < min_count:
        raise ModelError(f"only {len(out)} correspondences available, need {min_count}")
    return out
