"""End-to-end calibration of a batch of scan frames.

One batch is a set of repeated scans of the rig at a fixed reference pose
(the bench repeats 50 revolutions per test point). Stages per frame:

1. segment the board, fit its plane, slide each return along its ray onto
   the plane (range correction);
2. per PD module: pick the channel row crossing it, detect the struck beam
   by its reflectivity, fit the beam center from the module's voltages and
   keep the (azimuth, center) pair.

The per-module pairs from the whole batch feed the RANSAC azimuth-center
model; each frame then yields correspondences and its own pose estimate,
plus one joint estimate over all frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import beam_center, correspondence, preprocess, solver
from .bench import Scene
from .geometry import PolarBeam, Pose6DOF, polar_to_cartesian_array, pose_to_matrix, transform_array
from .scene import ScanFrame

DEG = math.pi / 180.0
MM = 1e-3


class PipelineError(RuntimeError):
    """A pipeline stage failed for an entire batch."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineOptions:
    """Stage thresholds and solver settings for a calibration run."""

    cluster_tolerance: float = preprocess.DEFAULT_CLUSTER_TOLERANCE
    min_cluster_points: int = preprocess.DEFAULT_MIN_POINTS
    detection_margin: float = correspondence.DEFAULT_DETECTION_MARGIN
    search_window: float = correspondence.DEFAULT_SEARCH_WINDOW_M
    ransac_threshold_mm: float = correspondence.DEFAULT_RANSAC_THRESHOLD_MM
    ransac_iterations: int = correspondence.DEFAULT_RANSAC_ITERATIONS
    range_correction: bool = True
    # fit one plane from the whole batch instead of per scan: repeated scans
    # at a fixed rig pose see the same board, and the per-scan plane's yaw
    # error otherwise leaks into the x-translation through the ~2.5 m range
    batch_plane: bool = True
    min_correspondences: int = 3
    solver: solver.SolverConfig = field(default_factory=solver.SolverConfig)


@dataclass
class FrameFeatures:
    """Per-frame intermediate products kept for correspondence assembly."""

    scan_id: int
    key_beams: dict          # pd_id -> corrected PolarBeam
    key_centers: dict        # pd_id -> fitted center, m (PD axis coordinate)
    plane: preprocess.PlaneModel
    roi_count: int
    misses: dict             # pd_id -> reason string


@dataclass
class BatchResult:
    """Output of one batch calibration."""

    models: dict                     # pd_id -> AzimuthCenterModel
    scan_reports: list               # (scan_id, SolveReport | None, note)
    joint: solver.SolveReport
    correspondences: list            # all correspondences, every scan
    pairs: dict                      # pd_id -> (alpha_deg, mu_mm, scan_ids) arrays
    features: list                   # list[FrameFeatures]

    @property
    def scan_poses(self) -> list:
        return [(sid, rep.beta) for sid, rep, _ in self.scan_reports if rep is not None]


def _row_channel(pd, board_xz: np.ndarray, channels: np.ndarray) -> int:
    """Channel whose beams pass closest to the PD center on the board."""
    center = np.array([pd.offset[0], pd.offset[1]])
    d = np.linalg.norm(board_xz - center, axis=1)
    return int(channels[np.argmin(d)])


def _detection_windows(board, default: float) -> dict:
    """Per-PD beam-search radius: capped below half the sibling distance so
    closely mounted modules never claim each other's beams."""
    centers = {pd.pd_id: np.asarray(pd.offset) for pd in board.pd_modules}
    windows = {}
    for pd in board.pd_modules:
        others = [
            np.linalg.norm(centers[pd.pd_id] - c)
            for pid, c in centers.items()
            if pid != pd.pd_id
        ]
        cap = 0.45 * min(others) if others else default
        windows[pd.pd_id] = min(default, cap)
    return windows


def extract_frame_features(
    frame: ScanFrame,
    scene: Scene,
    nominal_pose: Pose6DOF,
    options: PipelineOptions | None = None,
    plane: preprocess.PlaneModel | None = None,
) -> FrameFeatures:
    """Run segmentation, plane fit, detection and center fitting on one frame.

    A precomputed ``plane`` (e.g. fit from the pooled batch) overrides the
    per-frame fit.
    """
    options = options or PipelineOptions()
    board = scene.board
    roi = preprocess.segment_target(
        frame,
        board.width,
        board.height,
        cluster_tolerance=options.cluster_tolerance,
        min_points=options.min_cluster_points,
    )
    omega, alpha, r, channel, azimuth_index, refl = frame.beam_arrays()
    if plane is None:
        tls = preprocess.fit_plane(
            polar_to_cartesian_array(omega[roi], alpha[roi], r[roi])
        )
        plane = preprocess.refine_plane_ranges(omega[roi], alpha[roi], r[roi], tls)
    if options.range_correction:
        r_corr = r.copy()
        r_corr[roi] = preprocess.range_to_plane(omega[roi], alpha[roi], plane)
    else:
        r_corr = r

    # nominal board positions of the corrected returns, for detection windows
    m_nom = pose_to_matrix(nominal_pose)
    pts_o = transform_array(m_nom, polar_to_cartesian_array(omega[roi], alpha[roi], r_corr[roi]))
    board_xz = pts_o[:, [0, 2]]

    records = {rec.pd_id: rec for rec in frame.pd_records}
    windows = _detection_windows(board, options.search_window)
    key_beams: dict = {}
    key_centers: dict = {}
    misses: dict = {}
    for pd in board.pd_modules:
        rec = records.get(pd.pd_id)
        if rec is None or rec.n_events == 0:
            misses[pd.pd_id] = "no voltage events"
            continue
        ch = _row_channel(pd, board_xz, channel[roi])
        row_mask = channel[roi] == ch
        row_idx = roi[row_mask]
        row_beams = [
            PolarBeam(
                omega=float(omega[i]),
                alpha=float(alpha[i]),
                r=float(r_corr[i]),
                channel=int(channel[i]),
                azimuth_index=int(azimuth_index[i]),
                reflectivity=float(refl[i]),
            )
            for i in row_idx
        ]
        try:
            beam = correspondence.find_pd_beam(
                row_beams,
                pts_o[row_mask],
                pd,
                margin=options.detection_margin,
                window=windows[pd.pd_id],
            )
        except correspondence.DetectionMiss as exc:
            misses[pd.pd_id] = str(exc)
            continue

        positions = pd.element_positions()[list(rec.sampled_channels)]
        events = beam_center.beams_on_pd(rec, scene.lidar.firing_period)
        fits = []
        for _, volts in events:
            try:
                x_aug, y_aug = beam_center.augment_samples(positions, volts)
                fits.append(
                    beam_center.fit_gaussian_iterative(x_aug, y_aug, noise_floor=rec.noise_floor)
                )
            except (beam_center.GaussianFitError, ValueError):
                fits.append(None)
        try:
            key = beam_center.select_key_beam(fits)
        except beam_center.GaussianFitError as exc:
            misses[pd.pd_id] = str(exc)
            continue
        key_beams[pd.pd_id] = beam
        key_centers[pd.pd_id] = fits[key].mu
    return FrameFeatures(
        scan_id=frame.scan_id,
        key_beams=key_beams,
        key_centers=key_centers,
        plane=plane,
        roi_count=len(roi),
        misses=misses,
    )


def calibrate_frames(
    frames,
    scene: Scene,
    nominal_pose: Pose6DOF | None = None,
    options: PipelineOptions | None = None,
) -> BatchResult:
    """Full calibration over a batch of frames taken at one rig pose.

    ``nominal_pose`` is the rig's intended pose (detection windows only; the
    estimate itself is unconstrained). Defaults to the scene's base pose.

    Raises
    ------
    PipelineError
        If no PD collects enough (azimuth, center) pairs for a model, or no
        scan yields enough correspondences to solve.
    """
    options = options or PipelineOptions()
    nominal_pose = nominal_pose or scene.base_pose
    shared_plane = None
    if options.batch_plane and len(frames) > 1:
        pooled_polar = []
        for f in frames:
            roi = preprocess.segment_target(
                f,
                scene.board.width,
                scene.board.height,
                cluster_tolerance=options.cluster_tolerance,
                min_points=options.min_cluster_points,
            )
            omega, alpha, r, _, _, _ = f.beam_arrays()
            pooled_polar.append(np.stack([omega[roi], alpha[roi], r[roi]], axis=-1))
        pooled = np.vstack(pooled_polar)
        tls = preprocess.fit_plane(
            polar_to_cartesian_array(pooled[:, 0], pooled[:, 1], pooled[:, 2])
        )
        shared_plane = preprocess.refine_plane_ranges(
            pooled[:, 0], pooled[:, 1], pooled[:, 2], tls
        )
    features = [
        extract_frame_features(f, scene, nominal_pose, options, plane=shared_plane)
        for f in frames
    ]

    pairs: dict = {}
    for pd in scene.board.pd_modules:
        a, mu, sids = [], [], []
        for ft in features:
            if pd.pd_id in ft.key_beams:
                a.append(ft.key_beams[pd.pd_id].alpha / DEG)
                mu.append(ft.key_centers[pd.pd_id] / MM)
                sids.append(ft.scan_id)
        pairs[pd.pd_id] = (np.array(a), np.array(mu), np.array(sids))

    models: dict = {}
    for pd_id, (a, mu, _) in pairs.items():
        if len(a) < 5:
            continue
        try:
            models[pd_id] = correspondence.build_azimuth_center_model(
                a,
                mu,
                threshold=options.ransac_threshold_mm,
                iterations=options.ransac_iterations,
            )
        except correspondence.ModelError:
            continue
    if not models:
        raise PipelineError("correspondence", "no PD produced an azimuth-center model")

    scan_reports = []
    all_corrs = []
    for ft in features:
        try:
            corrs = correspondence.make_correspondences(
                models,
                ft.key_beams,
                scene.board.pd_modules,
                scan_id=ft.scan_id,
                min_count=options.min_correspondences,
            )
        except correspondence.ModelError as exc:
            scan_reports.append((ft.scan_id, None, str(exc)))
            continue
        all_corrs.extend(corrs)
        try:
            report = solver.solve(corrs, options.solver)
        except (solver.SolverFailure, ValueError) as exc:
            scan_reports.append((ft.scan_id, None, str(exc)))
            continue
        note = "low-confidence (3 points)" if len(corrs) == 3 else ""
        scan_reports.append((ft.scan_id, report, note))
    if not all_corrs:
        raise PipelineError("correspondence", "no scan yielded enough correspondences")
    joint = solver.solve(all_corrs, options.solver)
    return BatchResult(
        models=models,
        scan_reports=scan_reports,
        joint=joint,
        correspondences=all_corrs,
        pairs=pairs,
        features=features,
    )
