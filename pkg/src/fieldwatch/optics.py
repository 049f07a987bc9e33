"""Camera geometry: angle of view, per-pixel IFOV, and ground-plane visibility.

The world model is the flat ground plane seen from above. A camera is a
point with a boresight direction and a view cone; its sensor is described
by datasheet numbers (focal length in mm, pixel pitch in µm, detail range
in m). Everything downstream of this module works in two derived numbers:

* angle of view  ``2 * atan(D / P)`` for a target plane of half-width D
  at perpendicular distance P, and
* IFOV, the angle subtended by one sensor pixel, ``pixel pitch / focal
  length`` (small-angle model, both sides in the same length unit).

All types are immutable after construction and all functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]

_UNIT_NORM_TOL = 1e-9
_RATIO_CONSISTENCY_TOL = 1e-12


def _is_finite_pair(p: Point) -> bool:
    return len(p) == 2 and all(math.isfinite(c) for c in p)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Datasheet description of one camera.

    ``range_m`` is the distance at which the camera resolves useful detail;
    it is a user-supplied calibration constant, not something this library
    can measure.
    """

    camera_id: str
    focal_length_mm: float
    pixel_pitch_um: float
    range_m: float
    image_width: int
    image_height: int

    def __post_init__(self) -> None:
        if not self.camera_id:
            raise ValueError("camera_id must be non-empty")
        if not (math.isfinite(self.focal_length_mm) and self.focal_length_mm > 0):
            raise ValueError(f"focal_length_mm must be > 0, got {self.focal_length_mm}")
        if not (math.isfinite(self.pixel_pitch_um) and self.pixel_pitch_um > 0):
            raise ValueError(f"pixel_pitch_um must be > 0, got {self.pixel_pitch_um}")
        if not (math.isfinite(self.range_m) and self.range_m > 0):
            raise ValueError(f"range_m must be > 0, got {self.range_m}")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be at least 1x1 pixels")
        derived = ifov(self)
        if not (math.isfinite(derived) and derived > 0):
            raise ValueError(f"derived IFOV is not a positive finite number: {derived}")


def ifov(intrinsics: CameraIntrinsics) -> float:
    """Angle in radians subtended by a single sensor pixel.

    Pixel pitch (µm) is converted to mm so both sides of the division share
    a unit; the ratio is dimensionless and read as radians under the
    small-angle model.
    """
    pitch_mm = intrinsics.pixel_pitch_um * 1e-3
    return pitch_mm / intrinsics.focal_length_mm


def angle_of_view(half_width_d: float, perpendicular_distance_p: float) -> float:
    """Full view angle ``2 * atan(D / P)`` in radians, always in (0, pi).

    D is half the horizontal extent covered at the reference plane, P the
    perpendicular distance to that plane.
    """
    if not (math.isfinite(half_width_d) and half_width_d > 0):
        raise ValueError(f"half width D must be > 0, got {half_width_d}")
    if not (math.isfinite(perpendicular_distance_p) and perpendicular_distance_p > 0):
        raise ValueError(
            f"perpendicular distance P must be > 0, got {perpendicular_distance_p}"
        )
    return 2.0 * math.atan(half_width_d / perpendicular_distance_p)


@dataclass(frozen=True)
class FovGeometry:
    """The D / P / half-angle triangle describing one camera's view extent."""

    half_width_d: float
    perpendicular_distance_p: float
    half_angle_x: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.half_width_d) and self.half_width_d > 0):
            raise ValueError(f"half_width_d must be > 0, got {self.half_width_d}")
        if not (
            math.isfinite(self.perpendicular_distance_p)
            and self.perpendicular_distance_p > 0
        ):
            raise ValueError(
                f"perpendicular_distance_p must be > 0, got {self.perpendicular_distance_p}"
            )
        ratio = self.half_width_d / self.perpendicular_distance_p
        if not math.isclose(
            math.tan(self.half_angle_x), ratio, rel_tol=_RATIO_CONSISTENCY_TOL
        ):
            raise ValueError(
                "half_angle_x is inconsistent with half_width_d / perpendicular_distance_p"
            )

    @classmethod
    def from_extent(cls, half_width_d: float, perpendicular_distance_p: float) -> "FovGeometry":
        full = angle_of_view(half_width_d, perpendicular_distance_p)
        return cls(half_width_d, perpendicular_distance_p, full / 2.0)

    @property
    def angle_of_view(self) -> float:
        return 2.0 * self.half_angle_x

    def half_width_from_angle(self) -> float:
        """Reconstruct D as ``P * tan(x)``; round-trips with from_extent."""
        return self.perpendicular_distance_p * math.tan(self.half_angle_x)


@dataclass(frozen=True)
class CameraPose:
    """Ground-plane position, unit boresight direction, and view angle."""

    position: Point
    boresight: Point
    angle_of_view: float

    def __post_init__(self) -> None:
        if not _is_finite_pair(self.position):
            raise ValueError(f"position must be a finite 2-D point, got {self.position}")
        if not _is_finite_pair(self.boresight):
            raise ValueError(f"boresight must be a finite 2-D vector, got {self.boresight}")
        norm = math.hypot(*self.boresight)
        if abs(norm - 1.0) > _UNIT_NORM_TOL:
            raise ValueError(f"boresight must have unit norm, got |v| = {norm}")
        if not (0.0 < self.angle_of_view < math.pi):
            raise ValueError(
                f"angle_of_view must lie in (0, pi), got {self.angle_of_view}"
            )

    @classmethod
    def facing(cls, position: Point, target: Point, view_angle: float) -> "CameraPose":
        """Pose at ``position`` with the boresight aimed at ``target``."""
        dx = target[0] - position[0]
        dy = target[1] - position[1]
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            raise ValueError("target coincides with camera position")
        return cls(tuple(position), (dx / norm, dy / norm), view_angle)


def rotate_vector(v: Point, radians: float) -> Point:
    """Rotate a 2-D vector counterclockwise."""
    c, s = math.cos(radians), math.sin(radians)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def in_field_of_view(pose: CameraPose, intrinsics: CameraIntrinsics, point: Point) -> bool:
    """True when ``point`` lies inside the camera's view cone and detail range.

    Both boundaries are inclusive, and a point coincident with the camera
    position counts as inside (the bearing is undefined there, so the tie
    is resolved deterministically).
    """
    if not _is_finite_pair(point):
        raise ValueError(f"point must be a finite 2-D point, got {point}")
    vx = point[0] - pose.position[0]
    vy = point[1] - pose.position[1]
    dist = math.hypot(vx, vy)
    if dist == 0.0:
        return True
    if dist > intrinsics.range_m:
        return False
    bx, by = pose.boresight
    # atan2(|cross|, dot) is the unsigned angle between boresight and bearing.
    angle = math.atan2(abs(bx * vy - by * vx), bx * vx + by * vy)
    return angle <= pose.angle_of_view / 2.0
