"""Deterministic scene simulator: spinning LiDAR viewing a PD-instrumented board.

The board occupies the y = 0 plane of the target frame O (x right, z up,
extents centered on the origin). The sensor sits at the pose's translation
and casts one ray per (channel, azimuth-cycle) grid cell; rays are
intersected with the board (and an optional background wall), quantized by
the sensor's angular resolution, and perturbed by range noise and a
per-revolution azimuth phase fluctuation. Beams whose footprint reaches a
photodetector module also produce per-element photocurrents that are run
through the analog front end into sampled voltage records.

Everything is a pure function of (models, pose, seed): equal seeds give
bit-identical frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .afe import TiaParams, currents_to_record
from .geometry import CartesianPoint, PolarBeam, Pose6DOF, pose_to_matrix

DEG = math.pi / 180.0

# beams whose spot center lies this far beyond the array ends still produce a
# usable voltage event; farther ones have their peak outside the sampled span
EVENT_AXIAL_MARGIN_M = 4.75e-3
EVENT_CROSS_WINDOW_M = 8.0e-3


class SimulationError(RuntimeError):
    """Degenerate viewing geometry (board behind the sensor or edge-on)."""


@dataclass(frozen=True)
class PdPlacement:
    """One 1-D photodetector array mounted on the board.

    ``offset`` is the board-frame (x, z) position of the active-area center
    measured from the board center. The PD's own coordinate runs 0..15 mm
    along the array with element CH1 at 0 and axes aligned to the board
    (+x for horizontal modules, +z for vertical ones).
    """

    pd_id: str
    offset: tuple  # (x, z) meters from board center
    orientation: str = "horizontal"  # or "vertical"
    n_elements: int = 16
    element_pitch: float = 1e-3
    active_length: float = 16e-3
    active_width: float = 1.45e-3
    sampled_channels: tuple = (0, 5, 10, 15)

    def __post_init__(self):
        if self.orientation not in ("horizontal", "vertical"):
            raise ValueError(f"unknown PD orientation {self.orientation!r}")
        if abs(self.n_elements * self.element_pitch - self.active_length) > 1e-12:
            raise ValueError("n_elements * element_pitch must equal active_length")
        ch = tuple(self.sampled_channels)
        if not ch or list(ch) != sorted(set(ch)) or ch[0] < 0 or ch[-1] >= self.n_elements:
            raise ValueError("sampled_channels must be sorted, unique and in range")

    @property
    def axis(self) -> np.ndarray:
        """Board-frame unit vector along the array (direction of increasing CH)."""
        return np.array([1.0, 0.0]) if self.orientation == "horizontal" else np.array([0.0, 1.0])

    @property
    def half_span(self) -> float:
        """Half of the active length (center to active-area end)."""
        return 0.5 * self.active_length

    @property
    def center_local(self) -> float:
        """Array center in the PD's own axis coordinate (7.5 mm)."""
        return 0.5 * (self.n_elements - 1) * self.element_pitch

    def element_positions(self) -> np.ndarray:
        """PD-frame element-center positions (0, 1, ..., 15 mm)."""
        return np.arange(self.n_elements) * self.element_pitch

    @property
    def frame_offset(self) -> np.ndarray:
        """Subtraction constant linking PD and board frames.

        A PD measurement ``d_p`` (axis coordinate mu, lateral 0 at the
        centerline) maps to the board frame as ``o_p = d_p - frame_offset``.
        """
        ax, az = self.axis
        ox, oz = self.offset
        return np.array(
            [
                self.center_local * ax - ox,
                0.0,
                self.center_local * az - oz,
            ]
        )

    def local_coords(self, xz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(along, cross) coordinates of board-frame (x, z) points, center origin."""
        xz = np.atleast_2d(xz)
        rel = xz - np.asarray(self.offset)
        if self.orientation == "horizontal":
            return rel[:, 0], rel[:, 1]
        return rel[:, 1], rel[:, 0]

    def axis_to_board(self, mu: float) -> np.ndarray:
        """Board-frame (x, 0, z) of an axis coordinate ``mu`` on the centerline."""
        d = mu - self.center_local
        ox, oz = self.offset
        if self.orientation == "horizontal":
            return np.array([ox + d, 0.0, oz])
        return np.array([ox, 0.0, oz + d])


@dataclass(frozen=True)
class BoardModel:
    """Planar target board with embedded PD modules.

    Reflectivity is on the sensor's 0-255 intensity scale; the surround is
    black (low) and the PD surfaces read higher, which is what the beam
    detector keys on.
    """

    width: float = 1.0
    height: float = 0.54
    pd_modules: tuple = ()
    surround_reflectivity: float = 10.0
    pd_reflectivity: float = 80.0

    def __post_init__(self):
        object.__setattr__(self, "pd_modules", tuple(self.pd_modules))
        if self.pd_reflectivity <= self.surround_reflectivity:
            raise ValueError("pd_reflectivity must exceed surround_reflectivity")
        for pd in self.pd_modules:
            ox, oz = pd.offset
            ax, az = pd.axis
            hx = pd.half_span * ax + 0.5 * pd.active_width * az
            hz = pd.half_span * az + 0.5 * pd.active_width * ax
            if abs(ox) + hx > 0.5 * self.width or abs(oz) + hz > 0.5 * self.height:
                raise ValueError(f"PD {pd.pd_id!r} extends beyond the board")

    def pd_by_id(self, pd_id: str) -> PdPlacement:
        for pd in self.pd_modules:
            if pd.pd_id == pd_id:
                return pd
        raise KeyError(pd_id)


@dataclass(frozen=True)
class LidarModel:
    """Spinning multi-channel sensor model.

    Defaults match a 16-channel, 0.2-degree-azimuth-resolution unit. Angles
    in the config are degrees (sensor datasheet convention); radian views
    are provided for the math. ``beam_divergence`` is the full angle giving
    a 19.6 mm spot diameter at 2.5 m by default.
    """

    n_channels: int = 16
    vertical_angles_deg: tuple = tuple(float(a) for a in range(-15, 16, 2))
    azimuth_step_deg: float = 0.2
    range_noise_sigma: float = 0.010
    azimuth_jitter_sigma_deg: float = 0.02
    beam_divergence: float = 19.6e-3 / 2.5
    firing_period: float = 55e-6
    pulse_burst_period: float = 2.3e-6

    def __post_init__(self):
        object.__setattr__(self, "vertical_angles_deg", tuple(self.vertical_angles_deg))
        if len(self.vertical_angles_deg) != self.n_channels:
            raise ValueError("one vertical angle per channel required")
        diffs = np.diff(self.vertical_angles_deg)
        if np.any(diffs <= 0):
            raise ValueError("vertical_angles must be strictly increasing")
        if self.azimuth_step_deg <= 0:
            raise ValueError("azimuth_step must be positive")
        if self.range_noise_sigma < 0 or self.azimuth_jitter_sigma_deg < 0:
            raise ValueError("noise sigmas must be non-negative")

    @property
    def vertical_angles(self) -> np.ndarray:
        return np.asarray(self.vertical_angles_deg) * DEG

    @property
    def azimuth_step(self) -> float:
        return self.azimuth_step_deg * DEG

    @property
    def vertical_step(self) -> float:
        return float(np.min(np.diff(self.vertical_angles_deg))) * DEG

    def channel_azimuth_skew(self, channel) -> np.ndarray:
        """Azimuth offset of a channel's grid from the head spinning during
        the intra-cycle firing sequence."""
        frac = self.pulse_burst_period / self.firing_period
        return np.asarray(channel) * frac * self.azimuth_step

    def spot_sigma(self, r) -> np.ndarray:
        """Gaussian irradiance sigma on a target at range r (diameter / 4)."""
        return np.asarray(r) * self.beam_divergence / 4.0


@dataclass(frozen=True)
class AfeConfig:
    """Electrical chain settings shared by every PD module in a scene."""

    tia: TiaParams = field(default_factory=TiaParams)
    pulse_width: float = 2.3e-6      # effective integration window per pulse
    voltage_noise_sigma: float = 0.1  # V
    noise_floor: float = 0.1          # V, also the fit clamp level
    peak_current: float = 100e-6      # A, centered-hit element current


@dataclass
class SimTruth:
    """Ground-truth bookkeeping attached to simulated frames (never serialized)."""

    board_positions: np.ndarray          # (n_beams, 3) frame-O landing points
    is_board: np.ndarray                 # (n_beams,) bool, False = background
    on_pd_beam: dict                     # pd_id -> beam index per the strict
    #                                      center-in-active-rectangle rule (or None)
    pd_event_beams: dict                 # pd_id -> [beam index] in event order
    pd_event_centers: dict               # pd_id -> (n_events, 3) true spot centers


@dataclass
class ScanFrame:
    """One full sensor revolution over the scene."""

    scan_id: int
    beams: list                          # list[PolarBeam]
    pd_records: list                     # list[PdSignalRecord]
    ground_truth_pose: Pose6DOF | None = None
    truth: SimTruth | None = None

    def __post_init__(self):
        seen = set()
        for b in self.beams:
            key = (b.channel, b.azimuth_index)
            if key in seen:
                raise ValueError(f"duplicate beam (channel, azimuth_index) {key}")
            seen.add(key)

    def beam_arrays(self):
        """(omega, alpha, r, channel, azimuth_index, reflectivity) arrays."""
        n = len(self.beams)
        omega = np.empty(n)
        alpha = np.empty(n)
        r = np.empty(n)
        channel = np.empty(n, dtype=int)
        azi = np.empty(n, dtype=int)
        refl = np.empty(n)
        for i, b in enumerate(self.beams):
            omega[i], alpha[i], r[i] = b.omega, b.alpha, b.r
            channel[i], azi[i], refl[i] = b.channel, b.azimuth_index, b.reflectivity
        return omega, alpha, r, channel, azi, refl


def _gauss_rect_fraction(center_a, center_c, half_a, half_c, sigma):
    """Energy fraction of a circular Gaussian spot inside a rectangle.

    Rectangle half-sizes (half_a, half_c) around the origin; spot center at
    (center_a, center_c). Separable product of 1-D normal CDFs.
    """
    fa = ndtr((half_a - center_a) / sigma) - ndtr((-half_a - center_a) / sigma)
    fc = ndtr((half_c - center_c) / sigma) - ndtr((-half_c - center_c) / sigma)
    return fa * fc


def integrate_beam_on_pd(
    spot_center: CartesianPoint,
    spot_sigma: float,
    pd: PdPlacement,
    i_max: float = 100e-6,
) -> np.ndarray:
    """Per-element photocurrents for a Gaussian spot on a PD module.

    Each element integrates the spot irradiance over its active rectangle;
    the scale is set so a spot centered exactly on an element (and on the
    array centerline) drives that element at ``i_max``.
    """
    if spot_sigma <= 0:
        raise ValueError("spot_sigma must be positive")
    spot_center.require_frame("O", "integrate_beam_on_pd")
    along, cross = pd.local_coords(np.array([[spot_center.x, spot_center.z]]))
    return _element_currents(float(along[0]), float(cross[0]), spot_sigma, pd, i_max)


def _element_currents(along, cross, sigma, pd: PdPlacement, i_max):
    """Vector of element currents for a spot at (along, cross) from the center."""
    centers = pd.element_positions() - pd.center_local  # element centers, center origin
    half_pitch = 0.5 * pd.element_pitch
    half_width = 0.5 * pd.active_width
    frac = _gauss_rect_fraction(along - centers, cross, half_pitch, half_width, sigma)
    ref = _gauss_rect_fraction(0.0, 0.0, half_pitch, half_width, sigma)
    return i_max * frac / ref


def corner_error_bound(b, lidar: LidarModel) -> tuple[float, float]:
    """Worst-case (x, z) offset of the nearest beam from a target corner.

    The miss is bounded by one azimuth / vertical resolution cell at the
    beam's range: (r tan(d_alpha), r tan(d_omega)). ``b`` is a PolarBeam or
    a bare range in meters.
    """
    r = b.r if isinstance(b, PolarBeam) else float(b)
    if r < 0:
        raise ValueError("range must be non-negative")
    return (
        r * math.tan(lidar.azimuth_step),
        r * math.tan(lidar.vertical_step),
    )


def simulate_scan(
    board: BoardModel,
    lidar: LidarModel,
    pose: Pose6DOF,
    seed: int,
    scan_id: int = 0,
    afe: AfeConfig | None = None,
    background_depth: float | None = None,
    background_reflectivity: float = 40.0,
    with_truth: bool = True,
) -> ScanFrame:
    """Simulate one revolution of the sensor viewing the board.

    ``pose`` is the ground truth mapping sensor-frame points into the board
    frame. ``background_depth``, if given, adds an infinite wall parallel to
    the board that many meters behind it. Identical seeds produce
    bit-identical frames.

    Raises
    ------
    SimulationError
        If the board is behind the sensor or viewed edge-on.
    """
    afe = afe or AfeConfig()
    rng = np.random.default_rng(seed)
    m = pose_to_matrix(pose)
    rot, t = m[:, :3], m[:, 3]

    # viewing geometry sanity: direction to the board center, in sensor frame
    to_center = rot.T @ -t
    dist = np.linalg.norm(to_center)
    if dist < 0.25 or to_center[1] <= 0.05 * dist:
        raise SimulationError("board center is behind or beside the sensor")
    corners = np.array(
        [
            [sx * 0.5 * board.width, 0.0, sz * 0.5 * board.height]
            for sx in (-1, 1)
            for sz in (-1, 1)
        ]
    )
    corners_l = (corners - t) @ rot  # == rot.T @ (corner - t), rowwise
    if np.any(corners_l[:, 1] <= 0.0):
        raise SimulationError("board extends behind the sensor")
    ray_y = corners_l[:, 1] / np.linalg.norm(corners_l, axis=1)
    if np.min(ray_y) < 0.05:
        raise SimulationError("board viewed nearly edge-on")

    # azimuth window covering the board, plus margin
    alphas_c = np.arctan2(corners_l[:, 0], corners_l[:, 1])
    step = lidar.azimuth_step
    j_lo = int(math.floor(alphas_c.min() / step)) - 3
    j_hi = int(math.ceil(alphas_c.max() / step)) + 3
    j = np.arange(j_lo, j_hi + 1)

    phase = rng.normal(0.0, lidar.azimuth_jitter_sigma_deg * DEG)

    channels = np.arange(lidar.n_channels)
    omegas = lidar.vertical_angles
    skews = lidar.channel_azimuth_skew(channels)

    # (n_channels, n_az) ray grid
    alpha = j[None, :] * step + skews[:, None] + phase
    omega = np.broadcast_to(omegas[:, None], alpha.shape)
    co = np.cos(omega)
    d_l = np.stack([co * np.sin(alpha), co * np.cos(alpha), np.sin(omega)], axis=-1)
    d_o = d_l @ rot.T

    denom = d_o[..., 1]
    hits_plane = denom > 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        t_board = np.where(hits_plane, -t[1] / denom, np.inf)
    landing = t[None, None, :] + t_board[..., None] * d_o
    on_board = (
        hits_plane
        & (t_board > 0)
        & (np.abs(landing[..., 0]) <= 0.5 * board.width)
        & (np.abs(landing[..., 2]) <= 0.5 * board.height)
    )

    if background_depth is not None:
        t_wall = np.where(hits_plane, (background_depth - t[1]) / denom, np.inf)
        wall_pts = t[None, None, :] + t_wall[..., None] * d_o
        on_wall = hits_plane & (t_wall > 0) & ~on_board
    else:
        on_wall = np.zeros_like(on_board)

    hit = on_board | on_wall
    ch_idx, az_idx = np.nonzero(hit)
    if ch_idx.size == 0:
        raise SimulationError("no ray reaches the board")
    order = np.lexsort((j[az_idx], ch_idx))
    ch_idx, az_idx = ch_idx[order], az_idx[order]
    is_board = on_board[ch_idx, az_idx]

    ranges = np.where(is_board, t_board[ch_idx, az_idx], 0.0)
    if background_depth is not None:
        ranges = np.where(is_board, ranges, t_wall[ch_idx, az_idx])
    points = np.where(
        is_board[:, None], landing[ch_idx, az_idx], (wall_pts[ch_idx, az_idx] if background_depth is not None else 0.0)
    )

    r_noise = rng.normal(0.0, lidar.range_noise_sigma, size=ranges.shape) if lidar.range_noise_sigma > 0 else np.zeros_like(ranges)

    # reflectivity: black surround with PD-module elevations weighted by the
    # fraction of the footprint energy landing on the active area
    sigma_spot = lidar.spot_sigma(ranges)
    refl = np.where(is_board, board.surround_reflectivity, background_reflectivity)
    xz = points[:, [0, 2]]
    on_pd_strict = {}
    for pd in board.pd_modules:
        along, cross = pd.local_coords(xz)
        e = _gauss_rect_fraction(along, cross, pd.half_span, 0.5 * pd.active_width, sigma_spot)
        e_ref = _gauss_rect_fraction(0.0, 0.0, pd.half_span, 0.5 * pd.active_width, sigma_spot)
        boost = (board.pd_reflectivity - board.surround_reflectivity) * e / np.maximum(e_ref, 1e-300)
        refl = np.where(is_board, np.maximum(refl, board.surround_reflectivity + boost), refl)
        inside = is_board & (np.abs(along) <= pd.half_span) & (np.abs(cross) <= 0.5 * pd.active_width)
        if np.any(inside):
            cand = np.nonzero(inside)[0]
            on_pd_strict[pd.pd_id] = int(cand[np.argmin(np.abs(along[cand]))])
        else:
            on_pd_strict[pd.pd_id] = None
    refl = refl + rng.uniform(-2.0, 2.0, size=refl.shape)
    refl = np.clip(refl, 0.0, 255.0)

    beams = [
        PolarBeam(
            omega=float(omegas[c]),
            alpha=float((j[a] * step + skews[c] + phase) % (2 * math.pi)),
            r=float(ranges[i] + r_noise[i]),
            channel=int(c),
            azimuth_index=int(j[a]),
            reflectivity=float(refl[i]),
        )
        for i, (c, a) in enumerate(zip(ch_idx, az_idx))
    ]

    # PD voltage records: beams whose footprint reaches a module
    pd_records = []
    event_beams: dict = {}
    event_centers: dict = {}
    for pd in board.pd_modules:
        along, cross = pd.local_coords(xz)
        near = (
            is_board
            & (np.abs(along) <= pd.half_span + EVENT_AXIAL_MARGIN_M)
            & (np.abs(cross) <= EVENT_CROSS_WINDOW_M)
        )
        idx = np.nonzero(near)[0]
        if idx.size == 0:
            event_beams[pd.pd_id] = []
            event_centers[pd.pd_id] = np.zeros((0, 3))
            continue
        times = (
            j[az_idx[idx]] * lidar.firing_period
            + ch_idx[idx] * lidar.pulse_burst_period
        )
        t_order = np.argsort(times, kind="stable")
        idx, times = idx[t_order], times[t_order]
        currents = np.stack(
            [
                _element_currents(along[i], cross[i], sigma_spot[i], pd, afe.peak_current)
                for i in idx
            ]
        )
        pd_records.append(
            currents_to_record(
                currents,
                afe.tia,
                afe.pulse_width,
                afe.voltage_noise_sigma,
                rng,
                pd_id=pd.pd_id,
                scan_id=scan_id,
                sampled_channels=pd.sampled_channels,
                event_times=times,
                noise_floor=afe.noise_floor,
            )
        )
        event_beams[pd.pd_id] = [int(i) for i in idx]
        event_centers[pd.pd_id] = points[idx]

    truth = None
    if with_truth:
        truth = SimTruth(
            board_positions=points,
            is_board=is_board,
            on_pd_beam=on_pd_strict,
            pd_event_beams=event_beams,
            pd_event_centers=event_centers,
        )
    return ScanFrame(
        scan_id=scan_id,
        beams=beams,
        pd_records=pd_records,
        ground_truth_pose=pose,
        truth=truth,
    )
