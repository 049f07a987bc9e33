import math
import random

import pytest

from fieldwatch.optics import (
    CameraIntrinsics,
    CameraPose,
    FovGeometry,
    angle_of_view,
    ifov,
    in_field_of_view,
    rotate_vector,
)


def make_intrinsics(**overrides):
    base = dict(
        camera_id="c1",
        focal_length_mm=4.0,
        pixel_pitch_um=4.0,
        range_m=120.0,
        image_width=1920,
        image_height=1080,
    )
    base.update(overrides)
    return CameraIntrinsics(**base)


class TestAngleOfView:
    def test_equal_d_and_p_gives_quarter_turn(self):
        assert angle_of_view(10.0, 10.0) == math.pi / 2

    def test_sqrt3_ratio_gives_120_degrees(self):
        assert angle_of_view(math.sqrt(3) * 10.0, 10.0) == pytest.approx(
            2 * math.pi / 3, rel=1e-12
        )

    def test_half_ratio(self):
        # 2*atan(0.5), evaluated independently
        assert angle_of_view(5.0, 10.0) == pytest.approx(0.9272952180016122, rel=1e-12)

    @pytest.mark.parametrize("d,p", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_non_positive_arguments_rejected(self, d, p):
        with pytest.raises(ValueError):
            angle_of_view(d, p)

    def test_always_in_open_interval(self):
        rng = random.Random(11)
        for _ in range(200):
            aov = angle_of_view(rng.uniform(1e-6, 1e6), rng.uniform(1e-6, 1e6))
            assert 0.0 < aov < math.pi

    def test_ratio_invariance(self):
        rng = random.Random(7)
        for _ in range(100):
            d = rng.uniform(0.1, 1000.0)
            p = rng.uniform(0.1, 1000.0)
            k = rng.uniform(1e-3, 1e3)
            assert angle_of_view(k * d, k * p) == pytest.approx(
                angle_of_view(d, p), rel=1e-12
            )

    def test_monotone_in_d_and_p(self):
        rng = random.Random(13)
        for _ in range(100):
            d = rng.uniform(0.1, 100.0)
            p = rng.uniform(0.1, 100.0)
            bump = rng.uniform(0.01, 10.0)
            assert angle_of_view(d + bump, p) > angle_of_view(d, p)
            assert angle_of_view(d, p + bump) < angle_of_view(d, p)


class TestIfov:
    def test_four_micron_pitch_four_mm_focal(self):
        assert ifov(make_intrinsics()) == pytest.approx(0.001, rel=1e-12)

    def test_two_micron_pitch_eight_mm_focal(self):
        intr = make_intrinsics(pixel_pitch_um=2.0, focal_length_mm=8.0)
        assert ifov(intr) == pytest.approx(0.00025, rel=1e-12)

    def test_datasheet_example(self):
        # 5.86 um / 12 mm, cross-checked by rational arithmetic: 293/600000
        intr = make_intrinsics(pixel_pitch_um=5.86, focal_length_mm=12.0)
        assert ifov(intr) == pytest.approx(4.8833333333333335e-4, rel=1e-12)

    def test_scales_linearly_with_pitch_and_inversely_with_focal(self):
        rng = random.Random(29)
        for _ in range(100):
            pitch = rng.uniform(0.5, 20.0)
            focal = rng.uniform(1.0, 100.0)
            k = rng.uniform(0.1, 10.0)
            base = ifov(make_intrinsics(pixel_pitch_um=pitch, focal_length_mm=focal))
            assert ifov(
                make_intrinsics(pixel_pitch_um=k * pitch, focal_length_mm=focal)
            ) == pytest.approx(k * base, rel=1e-12)
            assert ifov(
                make_intrinsics(pixel_pitch_um=pitch, focal_length_mm=k * focal)
            ) == pytest.approx(base / k, rel=1e-12)


class TestCameraIntrinsics:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"focal_length_mm": 0.0},
            {"focal_length_mm": -4.0},
            {"pixel_pitch_um": 0.0},
            {"range_m": -1.0},
            {"image_width": 0},
            {"image_height": 0},
            {"camera_id": ""},
            {"focal_length_mm": math.inf},
        ],
    )
    def test_invalid_values_rejected(self, overrides):
        with pytest.raises(ValueError):
            make_intrinsics(**overrides)


class TestFovGeometry:
    def test_from_extent_consistency(self):
        geom = FovGeometry.from_extent(5.0, 10.0)
        assert geom.angle_of_view == pytest.approx(angle_of_view(5.0, 10.0), rel=1e-15)

    def test_inconsistent_half_angle_rejected(self):
        with pytest.raises(ValueError):
            FovGeometry(half_width_d=5.0, perpendicular_distance_p=10.0, half_angle_x=1.0)

    def test_half_width_round_trip(self):
        rng = random.Random(3)
        for _ in range(200):
            d = rng.uniform(0.01, 500.0)
            p = rng.uniform(0.01, 500.0)
            geom = FovGeometry.from_extent(d, p)
            assert geom.half_width_from_angle() == pytest.approx(d, rel=1e-9)


class TestCameraPose:
    def test_boresight_must_be_unit(self):
        with pytest.raises(ValueError):
            CameraPose(position=(0.0, 0.0), boresight=(1.0, 1.0), angle_of_view=1.0)

    @pytest.mark.parametrize("aov", [0.0, -1.0, math.pi, 4.0])
    def test_angle_of_view_bounds(self, aov):
        with pytest.raises(ValueError):
            CameraPose(position=(0.0, 0.0), boresight=(1.0, 0.0), angle_of_view=aov)

    def test_facing_normalizes(self):
        pose = CameraPose.facing((0.0, 0.0), (3.0, 4.0), math.pi / 2)
        assert pose.boresight == pytest.approx((0.6, 0.8))

    def test_facing_rejects_coincident_target(self):
        with pytest.raises(ValueError):
            CameraPose.facing((1.0, 1.0), (1.0, 1.0), 1.0)


class TestInFieldOfView:
    def setup_method(self):
        self.pose = CameraPose(
            position=(0.0, 0.0), boresight=(1.0, 0.0), angle_of_view=math.pi / 2
        )
        self.intr = make_intrinsics(range_m=500.0)

    def test_boundary_point_is_inside(self):
        assert in_field_of_view(self.pose, self.intr, (5.0, 5.0)) is True

    def test_point_past_half_angle_is_outside(self):
        # bearing atan(6/5) = 50.19 deg > 45 deg
        assert in_field_of_view(self.pose, self.intr, (5.0, 6.0)) is False

    def test_point_past_range_is_outside(self):
        assert in_field_of_view(self.pose, self.intr, (1000.0, 0.0)) is False

    def test_range_boundary_inclusive(self):
        assert in_field_of_view(self.pose, self.intr, (500.0, 0.0)) is True

    def test_camera_position_counts_as_inside(self):
        assert in_field_of_view(self.pose, self.intr, (0.0, 0.0)) is True

    def test_behind_camera_is_outside(self):
        assert in_field_of_view(self.pose, self.intr, (-5.0, 0.0)) is False

    def test_non_finite_point_rejected(self):
        with pytest.raises(ValueError):
            in_field_of_view(self.pose, self.intr, (math.nan, 0.0))

    def test_invariant_under_rigid_rotation(self):
        rng = random.Random(41)
        for _ in range(200):
            angle = rng.uniform(0.0, 2 * math.pi)
            point = (rng.uniform(-600.0, 600.0), rng.uniform(-600.0, 600.0))
            original = in_field_of_view(self.pose, self.intr, point)
            rotated_pose = CameraPose(
                position=(0.0, 0.0),
                boresight=rotate_vector(self.pose.boresight, angle),
                angle_of_view=self.pose.angle_of_view,
            )
            assert in_field_of_view(rotated_pose, self.intr, rotate_vector(point, angle)) == original
