"""Coordinate frames, rotations and rigid transforms shared by the whole pipeline.

Conventions (fixed throughout the package):

* Frames: ``L`` = sensor (LiDAR), ``O`` = board/target, ``D`` = photodetector.
* Axes: y forward (boresight), x right, z up. The board occupies the plane
  y = 0 in frame O with its surface spanned by x (width) and z (height).
* Rotation order is intrinsic Z-Y-X: ``R = Rz(phi) @ Ry(theta) @ Rx(psi)``
  with phi = yaw (about z), theta = tilt (about y), psi = roll (about x).
* All angles are radians internally; degrees appear only at CLI/file
  boundaries.
* Polar convention: ``x = r cos(omega) sin(alpha)``, ``y = r cos(omega)
  cos(alpha)``, ``z = r sin(omega)``. Note: one published form of this
  conversion prints sin(alpha) in the z row, which does not preserve range;
  the sin(omega) form used here is the physically consistent one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Pose6DOF:
    """Rigid 6-DOF pose: three Z-Y-X Euler angles plus a translation.

    Maps sensor-frame points into the target frame: ``p_O = R @ p_L + t``.

    Parameters
    ----------
    phi, theta, psi:
        Yaw, tilt and roll angles in radians (wrapped to (-pi, pi]).
    dx, dy, dz:
        Translation in meters.
    """

    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0

    def __post_init__(self):
        for name in ("phi", "theta", "psi", "dx", "dy", "dz"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"Pose6DOF.{name} must be finite, got {v!r}")
        object.__setattr__(self, "phi", wrap_angle(self.phi))
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.phi, self.theta, self.psi])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz])

    def as_vector(self) -> np.ndarray:
        """Pose as the 6-vector (phi, theta, psi, dx, dy, dz)."""
        return np.array([self.phi, self.theta, self.psi, self.dx, self.dy, self.dz])

    @classmethod
    def from_vector(cls, v) -> "Pose6DOF":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(*v)

    def compose(self, other: "Pose6DOF") -> "Pose6DOF":
        """Pose equivalent to applying ``other`` first, then ``self``."""
        ra, ta = rotation_matrix(self), self.translation
        rb, tb = rotation_matrix(other), other.translation
        return matrix_to_pose(np.column_stack([ra @ rb, ra @ tb + ta]))

    def inverse(self) -> "Pose6DOF":
        r = rotation_matrix(self)
        return matrix_to_pose(np.column_stack([r.T, -r.T @ self.translation]))


@dataclass(frozen=True)
class PolarBeam:
    """One laser return in sensor polar coordinates.

    Parameters
    ----------
    omega:
        Vertical (elevation) angle in radians.
    alpha:
        Azimuth angle in radians, in [0, 2*pi).
    r:
        Range in meters, > 0.
    channel:
        Vertical channel index.
    azimuth_index:
        Firing-cycle index of the beam within its channel.
    reflectivity:
        Return intensity, unitless in [0, 255].
    """

    omega: float
    alpha: float
    r: float
    channel: int = 0
    azimuth_index: int = 0
    reflectivity: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.omega) and math.isfinite(self.alpha) and math.isfinite(self.r)):
            raise ValueError("PolarBeam angles and range must be finite")
        if self.r <= 0:
            raise ValueError(f"PolarBeam.r must be > 0, got {self.r}")
        if abs(self.omega) >= math.pi / 2:
            raise ValueError(f"PolarBeam.omega outside vertical FOV: {self.omega}")
        if not (0.0 <= self.alpha < TWO_PI):
            object.__setattr__(self, "alpha", self.alpha % TWO_PI)


@dataclass(frozen=True)
class CartesianPoint:
    """A 3-D point tagged with the frame it lives in (L, O or D)."""

    x: float
    y: float
    z: float
    frame: str = "L"

    def __post_init__(self):
        if self.frame not in ("L", "O", "D"):
            raise ValueError(f"unknown frame tag {self.frame!r}")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("CartesianPoint coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def require_frame(self, frame: str, op: str = "operation"):
        if self.frame != frame:
            raise FrameMismatchError(
                f"{op} expects a point in frame {frame!r}, got {self.frame!r}"
            )

    def distance_to(self, other: "CartesianPoint") -> float:
        if other.frame != self.frame:
            raise FrameMismatchError(
                f"distance between frames {self.frame!r} and {other.frame!r}"
            )
        return float(np.linalg.norm(self.as_array() - other.as_array()))


class FrameMismatchError(ValueError):
    """Binary operation attempted on points from different frames."""


def polar_to_cartesian(b: PolarBeam) -> CartesianPoint:
    """Convert a polar beam to sensor-frame Cartesian coordinates.

    Uses x = r cos(omega) sin(alpha), y = r cos(omega) cos(alpha),
    z = r sin(omega); azimuth is measured clockwise from the +y boresight
    when viewed from above (compass convention).
    """
    co = math.cos(b.omega)
    return CartesianPoint(
        b.r * co * math.sin(b.alpha),
        b.r * co * math.cos(b.alpha),
        b.r * math.sin(b.omega),
        frame="L",
    )


def polar_to_cartesian_array(omega, alpha, r) -> np.ndarray:
    """Vectorized polar-to-Cartesian; returns an (N, 3) sensor-frame array."""
    omega = np.asarray(omega, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    r = np.asarray(r, dtype=float)
    co = np.cos(omega)
    return np.stack([r * co * np.sin(alpha), r * co * np.cos(alpha), r * np.sin(omega)], axis=-1)


def cartesian_to_polar(p: CartesianPoint) -> tuple[float, float, float]:
    """Inverse of :func:`polar_to_cartesian`; returns (omega, alpha, r)."""
    p.require_frame("L", "cartesian_to_polar")
    r = math.sqrt(p.x * p.x + p.y * p.y + p.z * p.z)
    if r == 0.0:
        raise ValueError("cannot convert the origin to polar coordinates")
    omega = math.asin(p.z / r)
    alpha = math.atan2(p.x, p.y) % TWO_PI
    return omega, alpha, r


def rotation_matrix(p: Pose6DOF) -> np.ndarray:
    """3x3 rotation Rz(phi) @ Ry(theta) @ Rx(psi)."""
    cf, sf = math.cos(p.phi), math.sin(p.phi)
    ct, st = math.cos(p.theta), math.sin(p.theta)
    cp, sp = math.cos(p.psi), math.sin(p.psi)
    return np.array(
        [
            [cf * ct, cf * st * sp - sf * cp, cf * st * cp + sf * sp],
            [sf * ct, sf * st * sp + cf * cp, sf * st * cp - cf * sp],
            [-st, ct * sp, ct * cp],
        ]
    )


def pose_to_matrix(p: Pose6DOF) -> np.ndarray:
    """3x4 rigid transform [R | T] mapping frame-L points to frame O."""
    return np.column_stack([rotation_matrix(p), p.translation])


def matrix_to_pose(m: np.ndarray) -> Pose6DOF:
    """Recover a Pose6DOF from a 3x4 (or 3x3 rotation-only) matrix.

    Valid away from the gimbal-lock region |theta| = pi/2.
    """
    m = np.asarray(m, dtype=float)
    if m.shape == (3, 3):
        r, t = m, np.zeros(3)
    elif m.shape == (3, 4):
        r, t = m[:, :3], m[:, 3]
    elif m.shape == (4, 4):
        r, t = m[:3, :3], m[:3, 3]
    else:
        raise ValueError(f"expected a 3x3, 3x4 or 4x4 matrix, got shape {m.shape}")
    if not np.allclose(r.T @ r, np.eye(3), atol=1e-8):
        raise ValueError("matrix_to_pose: rotation block is not orthonormal")
    theta = -math.asin(max(-1.0, min(1.0, r[2, 0])))
    phi = math.atan2(r[1, 0], r[0, 0])
    psi = math.atan2(r[2, 1], r[2, 2])
    return Pose6DOF(phi, theta, psi, t[0], t[1], t[2])


def transform_point(m: np.ndarray, p: CartesianPoint, dst_frame: str = "O") -> CartesianPoint:
    """Apply a rigid transform [R|T] to a frame-L point, yielding ``dst_frame``."""
    p.require_frame("L", "transform_point")
    m = np.asarray(m, dtype=float)
    v = m[:, :3] @ p.as_array() + m[:, 3]
    return CartesianPoint(v[0], v[1], v[2], frame=dst_frame)


def transform_array(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply a 3x4 rigid transform to an (N, 3) array of points."""
    pts = np.asarray(pts, dtype=float)
    return pts @ m[:, :3].T + m[:, 3]


def invert_rigid(m: np.ndarray) -> np.ndarray:
    """Inverse of a 3x4 rigid transform, again as 3x4."""
    r = m[:, :3]
    return np.column_stack([r.T, -r.T @ m[:, 3]])
