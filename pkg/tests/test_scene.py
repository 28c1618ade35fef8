import math

import numpy as np
import pytest

from pdcalib.bench import make_bench_scene
from pdcalib.geometry import CartesianPoint, PolarBeam, Pose6DOF, polar_to_cartesian_array, pose_to_matrix, transform_array
from pdcalib.io import frames_to_text
from pdcalib.scene import (
    AfeConfig,
    BoardModel,
    LidarModel,
    PdPlacement,
    ScanFrame,
    SimulationError,
    corner_error_bound,
    integrate_beam_on_pd,
    simulate_scan,
)

DEG = math.pi / 180.0
MM = 1e-3

FRONTAL = Pose6DOF(0, 0, 0, 0.0, -2.5, 0.0)


def quiet_lidar(**kw):
    kw.setdefault("range_noise_sigma", 0.0)
    kw.setdefault("azimuth_jitter_sigma_deg", 0.0)
    return LidarModel(**kw)


class TestModels:
    def test_pd_within_board_enforced(self):
        pd = PdPlacement("p", offset=(0.495, 0.0))
        with pytest.raises(ValueError):
            BoardModel(pd_modules=(pd,))

    def test_pd_reflectivity_ordering(self):
        with pytest.raises(ValueError):
            BoardModel(surround_reflectivity=80, pd_reflectivity=40)

    def test_pitch_length_consistency(self):
        with pytest.raises(ValueError):
            PdPlacement("p", offset=(0, 0), element_pitch=2e-3)

    def test_sampled_channel_validation(self):
        with pytest.raises(ValueError):
            PdPlacement("p", offset=(0, 0), sampled_channels=(5, 0))
        with pytest.raises(ValueError):
            PdPlacement("p", offset=(0, 0), sampled_channels=(0, 16))

    def test_lidar_validation(self):
        with pytest.raises(ValueError):
            LidarModel(vertical_angles_deg=(1.0, 1.0), n_channels=2)
        with pytest.raises(ValueError):
            LidarModel(azimuth_step_deg=0.0)
        with pytest.raises(ValueError):
            LidarModel(range_noise_sigma=-1.0)

    def test_duplicate_beam_keys_rejected(self):
        b = PolarBeam(omega=0.01, alpha=0.0, r=1.0, channel=0, azimuth_index=0)
        with pytest.raises(ValueError):
            ScanFrame(scan_id=0, beams=[b, b], pd_records=[])

    def test_frame_offset_round_trip(self):
        # a PD at the board center maps its array-center measurement (7.5 mm)
        # to the board origin: o_p = d_p - frame_offset
        pd = PdPlacement("c", offset=(0.0, 0.0))
        d_p = np.array([7.5 * MM, 0.0, 0.0])
        np.testing.assert_allclose(d_p - pd.frame_offset, 0.0, atol=1e-15)


class TestResolutionGeometry:
    def test_horizontal_spacing_at_2p5m(self):
        board = BoardModel()
        frame = simulate_scan(board, quiet_lidar(), FRONTAL, seed=0)
        omega, alpha, r, ch, az, _ = frame.beam_arrays()
        pts = frame.truth.board_positions
        row = ch == 8  # the +1 deg channel in the default angle table
        x = np.sort(pts[row][:, 0])
        near_center = np.abs(x) < 0.05
        spacing = np.diff(x)[near_center[:-1]]
        assert spacing.mean() == pytest.approx(2.5 * math.tan(0.2 * DEG), abs=0.1 * MM)
        assert spacing.mean() == pytest.approx(8.73 * MM, abs=0.1 * MM)

    def test_vertical_spacing_at_2p5m(self):
        board = BoardModel()
        frame = simulate_scan(board, quiet_lidar(), FRONTAL, seed=0)
        _, _, _, ch, az, _ = frame.beam_arrays()
        pts = frame.truth.board_positions
        # z of the two innermost channels near the board center
        z_lo = pts[(ch == 7) & (np.abs(pts[:, 0]) < 0.02)][:, 2].mean()
        z_hi = pts[(ch == 8) & (np.abs(pts[:, 0]) < 0.02)][:, 2].mean()
        assert z_hi - z_lo == pytest.approx(2 * 2.5 * math.tan(1.0 * DEG), abs=0.1 * MM)
        assert z_hi - z_lo == pytest.approx(87.27 * MM, abs=0.1 * MM)

    def test_boresight_depth_exact(self):
        # with zero noise every return lies on the y = -T_y plane; the beam
        # fired straight down the boresight reads exactly 2.5 m of range
        # (channel 0 carries no firing-order azimuth skew)
        lidar = quiet_lidar(n_channels=3, vertical_angles_deg=(0.0, 1.0, 2.0))
        frame = simulate_scan(BoardModel(), lidar, FRONTAL, seed=0)
        omega, alpha, r, ch, az, _ = frame.beam_arrays()
        pts = polar_to_cartesian_array(omega, alpha, r)
        np.testing.assert_allclose(pts[:, 1], 2.5, atol=1e-12)
        boresight = (ch == 0) & (az == 0)
        assert boresight.sum() == 1
        assert r[boresight][0] == pytest.approx(2.5, abs=1e-12)

    def test_beam_count_matches_resolution(self):
        board = BoardModel()
        frame = simulate_scan(board, quiet_lidar(), FRONTAL, seed=0)
        n = int(frame.truth.is_board.sum())
        h_res = 2.5 * math.tan(0.2 * DEG)
        v_res = 2.5 * math.tan(2.0 * DEG)
        predicted = (board.width / h_res) * (board.height / v_res)
        assert abs(n - predicted) / predicted < 0.10


class TestSimulation:
    def test_zero_noise_points_on_plane(self):
        sc = make_bench_scene("horizontal", lidar=quiet_lidar(), afe=AfeConfig(voltage_noise_sigma=0.0))
        frame = simulate_scan(sc.board, sc.lidar, sc.base_pose, seed=1, afe=sc.afe)
        omega, alpha, r, _, _, _ = frame.beam_arrays()
        pts_o = transform_array(
            pose_to_matrix(sc.base_pose), polar_to_cartesian_array(omega, alpha, r)
        )
        np.testing.assert_allclose(pts_o[:, 1], 0.0, atol=1e-12)

    def test_seeded_determinism(self):
        sc = make_bench_scene("horizontal")
        a = simulate_scan(sc.board, sc.lidar, sc.base_pose, seed=7, afe=sc.afe)
        b = simulate_scan(sc.board, sc.lidar, sc.base_pose, seed=7, afe=sc.afe)
        assert frames_to_text([a]) == frames_to_text([b])
        c = simulate_scan(sc.board, sc.lidar, sc.base_pose, seed=8, afe=sc.afe)
        assert frames_to_text([a]) != frames_to_text([c])

    def test_at_most_three_beams_per_horizontal_pd(self):
        sc = make_bench_scene("horizontal")
        for seed in range(8):
            frame = simulate_scan(sc.board, sc.lidar, sc.base_pose, seed=seed, afe=sc.afe)
            for rec in frame.pd_records:
                assert rec.n_events <= 3

    def test_on_pd_reflectivity_elevated(self):
        sc = make_bench_scene("horizontal")
        frame = simulate_scan(sc.board, sc.lidar, sc.base_pose, seed=3, afe=sc.afe)
        _, _, _, _, _, refl = frame.beam_arrays()
        board_refl = refl[frame.truth.is_board]
        for pd_id, idx in frame.truth.on_pd_beam.items():
            assert idx is not None
            assert refl[idx] > np.median(board_refl) + 10

    def test_board_behind_sensor_rejected(self):
        with pytest.raises(SimulationError):
            simulate_scan(BoardModel(), quiet_lidar(), Pose6DOF(0, 0, 0, 0, 2.5, 0), seed=0)

    def test_edge_on_board_rejected(self):
        with pytest.raises(SimulationError):
            simulate_scan(
                BoardModel(), quiet_lidar(), Pose6DOF(math.pi / 2 * 0.99, 0, 0, 0, -2.5, 0), seed=0
            )

    def test_background_wall_beams_labeled(self):
        frame = simulate_scan(
            BoardModel(), quiet_lidar(), FRONTAL, seed=0, background_depth=5.0
        )
        assert np.any(~frame.truth.is_board)
        omega, alpha, r, _, _, _ = frame.beam_arrays()
        wall = ~frame.truth.is_board
        assert np.all(r[wall] > 5.0)


class TestBeamIntegration:
    def test_boundary_symmetry(self):
        pd = PdPlacement("p", offset=(0.0, 0.0))
        # element 7 / element 8 boundary sits at 7.5 mm, i.e. board x = 0 for
        # a centered PD
        center = CartesianPoint(0.0, 0.0, 0.0, frame="O")
        currents = integrate_beam_on_pd(center, 4.9 * MM, pd)
        for j in range(8):
            assert currents[7 - j] == pytest.approx(currents[8 + j], rel=1e-9)

    def test_far_field_negligible(self):
        pd = PdPlacement("p", offset=(0.0, 0.0))
        far = CartesianPoint(50 * MM + pd.half_span, 0.0, 0.0, frame="O")
        currents = integrate_beam_on_pd(far, 4.9 * MM, pd)
        assert np.all(currents < 1e-12)

    def test_centered_hit_peak_current(self):
        pd = PdPlacement("p", offset=(0.0, 0.0))
        # spot dead on element 3 (position 3 mm -> board x = 3 - 7.5 mm)
        spot = CartesianPoint((3 - 7.5) * MM, 0.0, 0.0, frame="O")
        currents = integrate_beam_on_pd(spot, 4.9 * MM, pd)
        assert currents[3] == pytest.approx(100e-6, rel=1e-12)
        assert np.argmax(currents) == 3

    def test_argmax_matches_dense_integration_oracle(self):
        pd = PdPlacement("p", offset=(0.0, 0.0))
        sigma = 19.6 * MM / 4
        spot_local = 7.3 * MM  # inside element 7's [6.5, 7.5) mm cell
        spot = CartesianPoint(spot_local - pd.center_local, 0.0, 0.0, frame="O")
        currents = integrate_beam_on_pd(spot, sigma, pd)

        # brute-force Riemann integration at 10 um resolution
        def dense_current(k):
            xs = np.arange(k - 0.5, k + 0.5, 0.01) * MM + 0.005 * MM
            zs = np.arange(-0.725, 0.725, 0.01) * MM + 0.005 * MM
            gx = np.exp(-((xs - spot_local) ** 2) / (2 * sigma ** 2))
            gz = np.exp(-(zs ** 2) / (2 * sigma ** 2))
            return gx.sum() * gz.sum()

        dense = np.array([dense_current(k) for k in range(16)])
        assert np.argmax(currents) == np.argmax(dense) == 7
        np.testing.assert_allclose(
            currents / currents.max(), dense / dense.max(), atol=1e-4
        )

    def test_invalid_sigma(self):
        pd = PdPlacement("p", offset=(0.0, 0.0))
        with pytest.raises(ValueError):
            integrate_beam_on_pd(CartesianPoint(0, 0, 0, "O"), 0.0, pd)

    def test_frame_tag_enforced(self):
        pd = PdPlacement("p", offset=(0.0, 0.0))
        with pytest.raises(ValueError):
            integrate_beam_on_pd(CartesianPoint(0, 0, 0, "L"), 4.9 * MM, pd)


class TestCornerErrorBound:
    def test_reference_values(self):
        b = PolarBeam(omega=0.0, alpha=0.0, r=2.5)
        ex, ez = corner_error_bound(b, LidarModel())
        assert ex == pytest.approx(8.73 * MM, abs=0.005 * MM)
        assert ez == pytest.approx(87.3 * MM, abs=0.05 * MM)

    def test_zero_range_limit(self):
        ex, ez = corner_error_bound(0.0, LidarModel())
        assert (ex, ez) == (0.0, 0.0)

    def test_linear_in_range(self):
        lidar = LidarModel()
        e1 = corner_error_bound(PolarBeam(omega=0, alpha=0, r=2.0), lidar)
        e2 = corner_error_bound(PolarBeam(omega=0, alpha=0, r=4.0), lidar)
        assert e2[0] == pytest.approx(2 * e1[0], rel=1e-12)
        assert e2[1] == pytest.approx(2 * e1[1], rel=1e-12)
