"""File formats: scene/sweep configs (JSON), scan frames and dumps (CSV text).

Scan-frame files are line-oriented delimited text with a fixed field order:

    pdcalib-scanframe,v=1
    # beam,scan_id,channel,azimuth_index,azimuth_deg,omega_deg,range_m,reflectivity
    beam,0,5,22,4.4,-5.0,2.53,10.7
    # pd,pd_id,scan_id,event,time_s,noise_floor_v,sampled_channels,v0,v1,...
    pd,h_tl,0,0,0.0019457,0.1,0|5|10|15,2.66,1.11,0.146,0.0

Beams are sorted by (channel, azimuth index) and PD events by (pd_id, time),
so a frame always serializes byte-identically. Angles are stored in degrees
at this boundary; everything in memory is radians.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .afe import PdSignalRecord, TiaParams
from .bench import Scene
from .geometry import PolarBeam, Pose6DOF
from .scene import AfeConfig, BoardModel, LidarModel, PdPlacement, ScanFrame

DEG = math.pi / 180.0
FRAME_MAGIC = "pdcalib-scanframe,v=1"

BEAM_FIELDS = ("scan_id", "channel", "azimuth_index", "azimuth_deg", "omega_deg", "range_m", "reflectivity")
PD_FIELDS = ("pd_id", "scan_id", "event", "time_s", "noise_floor_v", "sampled_channels")


class FrameParseError(ValueError):
    """Malformed frame file; carries the offending line and field."""

    def __init__(self, path, line_no: int, field: str, message: str):
        super().__init__(f"{path}:{line_no}: field {field!r}: {message}")
        self.line_no = line_no
        self.field = field


def _fmt(x: float) -> str:
    """Shortest round-trip decimal form; deterministic for a given value."""
    return repr(float(x))


# ---------------------------------------------------------------- scene config

def scene_to_dict(scene: Scene) -> dict:
    return {
        "board": {
            "width_m": scene.board.width,
            "height_m": scene.board.height,
            "surround_reflectivity": scene.board.surround_reflectivity,
            "pd_reflectivity": scene.board.pd_reflectivity,
            "pd_modules": [
                {
                    "pd_id": pd.pd_id,
                    "offset_m": list(pd.offset),
                    "orientation": pd.orientation,
                    "n_elements": pd.n_elements,
                    "element_pitch_m": pd.element_pitch,
                    "active_length_m": pd.active_length,
                    "active_width_m": pd.active_width,
                    "sampled_channels": list(pd.sampled_channels),
                }
                for pd in scene.board.pd_modules
            ],
        },
        "lidar": {
            "n_channels": scene.lidar.n_channels,
            "vertical_angles_deg": list(scene.lidar.vertical_angles_deg),
            "azimuth_step_deg": scene.lidar.azimuth_step_deg,
            "range_noise_sigma_m": scene.lidar.range_noise_sigma,
            "azimuth_jitter_sigma_deg": scene.lidar.azimuth_jitter_sigma_deg,
            "beam_divergence_rad": scene.lidar.beam_divergence,
            "firing_period_s": scene.lidar.firing_period,
            "pulse_burst_period_s": scene.lidar.pulse_burst_period,
        },
        "afe": {
            "tia": {
                "r_f_ohm": scene.afe.tia.r_f,
                "c_f_farad": scene.afe.tia.c_f,
                "r_sh_ohm": scene.afe.tia.r_sh,
                "c_pd_farad": scene.afe.tia.c_pd,
                "c_i_amp_farad": scene.afe.tia.c_i_amp,
                "gbwp_hz": scene.afe.tia.gbwp,
                "a_ol_db": scene.afe.tia.a_ol,
            },
            "pulse_width_s": scene.afe.pulse_width,
            "voltage_noise_sigma_v": scene.afe.voltage_noise_sigma,
            "noise_floor_v": scene.afe.noise_floor,
            "peak_current_a": scene.afe.peak_current,
        },
        "base_pose": {
            "phi_deg": scene.base_pose.phi / DEG,
            "theta_deg": scene.base_pose.theta / DEG,
            "psi_deg": scene.base_pose.psi / DEG,
            "dx_m": scene.base_pose.dx,
            "dy_m": scene.base_pose.dy,
            "dz_m": scene.base_pose.dz,
        },
        "seed": scene.seed,
    }


def scene_from_dict(data: dict) -> Scene:
    b = data["board"]
    pds = tuple(
        PdPlacement(
            pd_id=p["pd_id"],
            offset=tuple(p["offset_m"]),
            orientation=p.get("orientation", "horizontal"),
            n_elements=p.get("n_elements", 16),
            element_pitch=p.get("element_pitch_m", 1e-3),
            active_length=p.get("active_length_m", 16e-3),
            active_width=p.get("active_width_m", 1.45e-3),
            sampled_channels=tuple(p.get("sampled_channels", (0, 5, 10, 15))),
        )
        for p in b.get("pd_modules", [])
    )
    board = BoardModel(
        width=b.get("width_m", 1.0),
        height=b.get("height_m", 0.54),
        pd_modules=pds,
        surround_reflectivity=b.get("surround_reflectivity", 10.0),
        pd_reflectivity=b.get("pd_reflectivity", 80.0),
    )
    ld = data.get("lidar", {})
    lidar = LidarModel(
        n_channels=ld.get("n_channels", 16),
        vertical_angles_deg=tuple(ld.get("vertical_angles_deg", tuple(float(a) for a in range(-15, 16, 2)))),
        azimuth_step_deg=ld.get("azimuth_step_deg", 0.2),
        range_noise_sigma=ld.get("range_noise_sigma_m", 0.010),
        azimuth_jitter_sigma_deg=ld.get("azimuth_jitter_sigma_deg", 0.02),
        beam_divergence=ld.get("beam_divergence_rad", 19.6e-3 / 2.5),
        firing_period=ld.get("firing_period_s", 55e-6),
        pulse_burst_period=ld.get("pulse_burst_period_s", 2.3e-6),
    )
    af = data.get("afe", {})
    tia_d = af.get("tia", {})
    afe = AfeConfig(
        tia=TiaParams(
            r_f=tia_d.get("r_f_ohm", 1e5),
            c_f=tia_d.get("c_f_farad", 68e-12),
            r_sh=tia_d.get("r_sh_ohm", 250e9),
            c_pd=tia_d.get("c_pd_farad", 200e-12),
            c_i_amp=tia_d.get("c_i_amp_farad", 1.4e-12),
            gbwp=tia_d.get("gbwp_hz", 1e6),
            a_ol=tia_d.get("a_ol_db", 106.0),
        ),
        pulse_width=af.get("pulse_width_s", 2.3e-6),
        voltage_noise_sigma=af.get("voltage_noise_sigma_v", 0.1),
        noise_floor=af.get("noise_floor_v", 0.1),
        peak_current=af.get("peak_current_a", 100e-6),
    )
    p = data.get("base_pose", {})
    pose = Pose6DOF(
        p.get("phi_deg", 0.0) * DEG,
        p.get("theta_deg", 0.0) * DEG,
        p.get("psi_deg", 0.0) * DEG,
        p.get("dx_m", -0.7),
        p.get("dy_m", -2.5),
        p.get("dz_m", 0.0),
    )
    return Scene(board=board, lidar=lidar, afe=afe, base_pose=pose, seed=int(data.get("seed", 0)))


def save_scene(scene: Scene, path):
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2, sort_keys=True) + "\n")


def load_scene(path) -> Scene:
    try:
        return scene_from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValueError(f"bad scene config {path}: {exc}") from exc


# ---------------------------------------------------------------- scan frames

def frames_to_text(frames) -> str:
    """Serialize frames to the delimited-text format (deterministic)."""
    lines = [FRAME_MAGIC]
    lines.append("# beam," + ",".join(BEAM_FIELDS))
    for frame in frames:
        for b in sorted(frame.beams, key=lambda b: (b.channel, b.azimuth_index)):
            lines.append(
                ",".join(
                    [
                        "beam",
                        str(frame.scan_id),
                        str(b.channel),
                        str(b.azimuth_index),
                        _fmt(b.alpha / DEG),
                        _fmt(b.omega / DEG),
                        _fmt(b.r),
                        _fmt(b.reflectivity),
                    ]
                )
            )
    lines.append("# pd," + ",".join(PD_FIELDS) + ",v0,v1,...")
    for frame in frames:
        for rec in sorted(frame.pd_records, key=lambda r: r.pd_id):
            for e in range(rec.n_events):
                lines.append(
                    ",".join(
                        [
                            "pd",
                            rec.pd_id,
                            str(frame.scan_id),
                            str(e),
                            _fmt(rec.sample_times[e]),
                            _fmt(rec.noise_floor),
                            "|".join(str(c) for c in rec.sampled_channels),
                        ]
                        + [_fmt(v) for v in rec.element_voltages[e]]
                    )
                )
    return "\n".join(lines) + "\n"


def write_frames(frames, path):
    Path(path).write_text(frames_to_text(frames))


def _parse_float(path, line_no, field, token):
    try:
        return float(token)
    except ValueError:
        raise FrameParseError(path, line_no, field, f"not a number: {token!r}")


def _parse_int(path, line_no, field, token):
    try:
        return int(token)
    except ValueError:
        raise FrameParseError(path, line_no, field, f"not an integer: {token!r}")


def read_frames(path) -> list:
    """Parse a scan-frame file back into ScanFrame objects (no sim truth)."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != FRAME_MAGIC:
        raise FrameParseError(path, 1, "magic", f"expected {FRAME_MAGIC!r}")
    beams: dict = {}
    pd_rows: dict = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        kind = parts[0]
        if kind == "beam":
            if len(parts) != 1 + len(BEAM_FIELDS):
                raise FrameParseError(
                    path, line_no, "beam", f"expected {len(BEAM_FIELDS)} fields, got {len(parts) - 1}"
                )
            sid = _parse_int(path, line_no, "scan_id", parts[1])
            beam = PolarBeam(
                omega=_parse_float(path, line_no, "omega_deg", parts[5]) * DEG,
                alpha=_parse_float(path, line_no, "azimuth_deg", parts[4]) * DEG,
                r=_parse_float(path, line_no, "range_m", parts[6]),
                channel=_parse_int(path, line_no, "channel", parts[2]),
                azimuth_index=_parse_int(path, line_no, "azimuth_index", parts[3]),
                reflectivity=_parse_float(path, line_no, "reflectivity", parts[7]),
            )
            beams.setdefault(sid, []).append(beam)
        elif kind == "pd":
            if len(parts) < 1 + len(PD_FIELDS) + 1:
                raise FrameParseError(path, line_no, "pd", "missing voltage fields")
            pd_id = parts[1]
            sid = _parse_int(path, line_no, "scan_id", parts[2])
            time_s = _parse_float(path, line_no, "time_s", parts[4])
            floor = _parse_float(path, line_no, "noise_floor_v", parts[5])
            try:
                channels = tuple(int(c) for c in parts[6].split("|"))
            except ValueError:
                raise FrameParseError(path, line_no, "sampled_channels", f"bad list: {parts[6]!r}")
            volts = [
                _parse_float(path, line_no, f"v{i}", tok) for i, tok in enumerate(parts[7:])
            ]
            if len(volts) != len(channels):
                raise FrameParseError(
                    path, line_no, "voltages",
                    f"{len(volts)} voltages for {len(channels)} sampled channels",
                )
            pd_rows.setdefault((sid, pd_id), []).append((time_s, floor, channels, volts))
        else:
            raise FrameParseError(path, line_no, "record", f"unknown record type {kind!r}")

    frames = []
    for sid in sorted(beams):
        records = []
        for (rsid, pd_id), rows in sorted(pd_rows.items()):
            if rsid != sid:
                continue
            rows.sort(key=lambda r: r[0])
            floor = rows[0][1]
            channels = rows[0][2]
            records.append(
                PdSignalRecord(
                    pd_id=pd_id,
                    scan_id=sid,
                    element_voltages=np.array([r[3] for r in rows]),
                    sample_times=np.array([r[0] for r in rows]),
                    sampled_channels=channels,
                    noise_floor=floor,
                )
            )
        frames.append(ScanFrame(scan_id=sid, beams=beams[sid], pd_records=records))
    return frames


# ---------------------------------------------------------------- dumps

def correspondence_dump(result, board) -> str:
    """CSV of the per-scan (azimuth, center) detections for offline inspection.

    One row per PD per detected scan: the raw measurement, the model-smoothed
    board-frame position, and whether the RANSAC kept the pair.
    """
    from .correspondence import pd_measurement_to_board

    lines = ["pd_id,scan_id,alpha_deg,mu_mm,op_x_m,op_y_m,op_z_m,inlier"]
    for pd in board.pd_modules:
        alpha_deg, mu_mm, scan_ids = result.pairs.get(pd.pd_id, ((), (), ()))
        model = result.models.get(pd.pd_id)
        for k in range(len(alpha_deg)):
            if model is not None:
                p_o = pd_measurement_to_board(pd, float(model.predict(alpha_deg[k])) * 1e-3)
                inlier = int(model.inlier_mask[k]) if k < len(model.inlier_mask) else 1
            else:
                p_o = pd_measurement_to_board(pd, mu_mm[k] * 1e-3)
                inlier = 0
            lines.append(
                ",".join(
                    [
                        pd.pd_id,
                        str(int(scan_ids[k])),
                        f"{alpha_deg[k]:.6f}",
                        f"{mu_mm[k]:.4f}",
                        f"{p_o[0]:.6f}",
                        f"{p_o[1]:.6f}",
                        f"{p_o[2]:.6f}",
                        str(inlier),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def solve_report_text(report, label: str = "calibration") -> str:
    """Human-readable solver report."""
    b = report.beta
    lines = [
        f"pdcalib {label} report",
        f"  correspondences : {report.correspondence_count}",
        f"  converged       : {report.converged} ({report.iterations} iterations)",
        f"  final cost      : {report.final_cost:.6e} m^2",
        f"  rms residual    : {report.rms_residual * 1e3:.4f} mm",
        "  pose (target frame <- sensor frame):",
        f"    yaw   phi   : {b.phi / DEG:+.5f} deg",
        f"    tilt  theta : {b.theta / DEG:+.5f} deg",
        f"    roll  psi   : {b.psi / DEG:+.5f} deg",
        f"    dx          : {b.dx:+.5f} m",
        f"    dy          : {b.dy:+.5f} m",
        f"    dz          : {b.dz:+.5f} m",
    ]
    return "\n".join(lines) + "\n"


def residual_table(report) -> str:
    """CSV of per-correspondence residuals at the solution."""
    lines = ["index,res_x_mm,res_y_mm,res_z_mm"]
    for i, row in enumerate(report.residuals):
        lines.append(f"{i},{row[0] * 1e3:.5f},{row[1] * 1e3:.5f},{row[2] * 1e3:.5f}")
    return "\n".join(lines) + "\n"
