import numpy as np
import pytest

from geocalc import (
    DomainError,
    RodCurve,
    check_consistency,
    circle_rod,
    load_rod_csv,
    random_smooth_rod,
    rod_curvature,
    rod_energy,
    rod_gauge,
    save_rod_csv,
    solve_geodesic,
)
from geocalc.core import fd_gradient


def ellipse_rod(n, a, b):
    s = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return RodCurve(np.stack([a * np.cos(s), b * np.sin(s)], axis=1))


def test_rod_curve_validation():
    with pytest.raises(DomainError):
        RodCurve(np.zeros((4, 2)))  # too few nodes
    with pytest.raises(DomainError):
        RodCurve(np.zeros((16, 2)))  # coincident nodes
    nodes = circle_rod(16).nodes.copy()
    nodes[3] = np.nan
    with pytest.raises(DomainError):
        RodCurve(nodes)
    curve = circle_rod(16)
    assert curve.n_nodes == 16
    assert np.array_equal(RodCurve.from_coord(curve.coord).nodes, curve.nodes)


def test_circle_curvature_values():
    for radius in (1.0, 2.0):
        kappa = rod_curvature(circle_rod(256, radius))
        assert np.max(np.abs(kappa - 1.0 / radius)) <= 1e-3


def test_flattened_ellipse_curvature_grows():
    peaks = []
    for minor in (0.8, 0.4, 0.2):
        peaks.append(np.max(np.abs(rod_curvature(ellipse_rod(512, 1.0, minor)))))
    assert peaks[0] < peaks[1] < peaks[2]
    # analytic peak curvature of an ellipse is a / b^2 at the co-vertex
    assert peaks[2] == pytest.approx(1.0 / 0.2**2, rel=0.02)


def test_simplified_energy_zero_on_identity_and_translation():
    model = rod_energy("simplified", 32, 0.1)
    x = circle_rod(32).coord
    assert model.w(x, x) <= 1e-20
    shifted = (circle_rod(32).nodes + np.array([0.4, -1.0])).reshape(-1)
    assert model.w(x, shifted) <= 1e-14


def test_simplified_energy_positive_off_isometry():
    model = rod_energy("simplified", 32, 0.1)
    x = circle_rod(32).coord
    rng = np.random.default_rng(31)
    for _ in range(5):
        y = x + 1e-2 * rng.normal(size=x.size)
        assert model.w(x, y) > 0.0


def test_simplified_energy_matches_fine_quadrature():
    coarse = rod_energy("simplified", 64, 0.1)
    fine = rod_energy("simplified", 4096, 0.1)
    w64 = coarse.w(circle_rod(64).coord, circle_rod(64, 1.1).coord)
    w4096 = fine.w(circle_rod(4096).coord, circle_rod(4096, 1.1).coord)
    assert abs(w64 - w4096) / w4096 <= 0.01


def test_quadrature_is_second_order():
    reference = rod_energy("simplified", 4096, 0.1).w(
        ellipse_rod(4096, 1.0, 0.8).coord, ellipse_rod(4096, 1.05, 0.85).coord
    )
    errs = []
    for n in (64, 128):
        val = rod_energy("simplified", n, 0.1).w(
            ellipse_rod(n, 1.0, 0.8).coord, ellipse_rod(n, 1.05, 0.85).coord
        )
        errs.append(abs(val - reference))
    assert 2.5 <= errs[0] / errs[1] <= 6.0


def test_euclidean_motion_invariance():
    model = rod_energy("simplified", 24, 0.1)
    rng = np.random.default_rng(41)
    x = random_smooth_rod(24, rng)
    y = random_smooth_rod(24, rng)
    for _ in range(5):
        angle = rng.uniform(0, 2 * np.pi)
        rot = np.array(
            [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        )
        shift = rng.normal(size=2)
        wx = model.w(x.coord, y.coord)
        wr = model.w(
            (x.nodes @ rot.T + shift).reshape(-1), (y.nodes @ rot.T + shift).reshape(-1)
        )
        assert abs(wx - wr) <= 1e-10


def test_simplified_gradients_match_fd():
    model = rod_energy("simplified", 16, 0.1)
    rng = np.random.default_rng(51)
    x = random_smooth_rod(16, rng).coord
    y = random_smooth_rod(16, rng).coord
    g1, g2 = model.grads(x, y)
    g1_fd = fd_gradient(lambda p: model.w(p, y), x, 1e-6)
    g2_fd = fd_gradient(lambda p: model.w(x, p), y, 1e-6)
    assert np.max(np.abs(g1 - g1_fd)) <= 1e-8
    assert np.max(np.abs(g2 - g2_fd)) <= 1e-8


def test_simplified_consistency_random_rods():
    model = rod_energy("simplified", 16, 0.1)
    rng = np.random.default_rng(61)
    for _ in range(100):
        point = random_smooth_rod(16, rng).coord
        report = check_consistency(model, point, 1e-4)
        assert report.ok, report.residuals


def test_full_energy_values_and_consistency():
    model = rod_energy("full", 16, 0.1)
    x = circle_rod(16).coord
    assert model.w(x, x) <= 1e-20
    assert model.w(x, circle_rod(16, 1.2).coord) > 0
    rng = np.random.default_rng(71)
    for _ in range(3):
        point = random_smooth_rod(16, rng).coord
        report = check_consistency(model, point, 1e-4)
        assert report.ok, report.residuals


def test_full_random_consistency_bulk():
    model = rod_energy("full", 8, 0.1)
    rng = np.random.default_rng(81)
    for _ in range(100):
        point = random_smooth_rod(8, rng, modes=2).coord
        report = check_consistency(model, point, 1e-4)
        assert report.ok, report.residuals


def test_degenerate_rod_rejected():
    model = rod_energy("simplified", 16, 0.1)
    good = circle_rod(16).coord
    with pytest.raises(DomainError):
        model.w(np.zeros(32), good)
    with pytest.raises(DomainError):
        model.w(good, np.zeros(32))
    with pytest.raises(DomainError):
        rod_energy("cubic", 16, 0.1)


def test_rod_csv_round_trip(tmp_path):
    curve = random_smooth_rod(16, np.random.default_rng(91))
    target = tmp_path / "rod.csv"
    save_rod_csv(curve, target)
    loaded = load_rod_csv(target)
    assert np.array_equal(loaded.nodes, curve.nodes)
    # headerless files load too
    bare = tmp_path / "bare.csv"
    bare.write_text(
        "\n".join(f"{p[0]},{p[1]}" for p in curve.nodes) + "\n", encoding="utf-8"
    )
    assert np.allclose(load_rod_csv(bare).nodes, curve.nodes)
    broken = tmp_path / "broken.csv"
    broken.write_text("x,y\n1.0,2.0\noops,3\n", encoding="utf-8")
    with pytest.raises(DomainError):
        load_rod_csv(broken)


def test_rod_gauge_pins_interior_means():
    a = circle_rod(16).coord
    b = (circle_rod(16).nodes + np.array([1.0, 0.5])).reshape(-1)
    gauge = rod_gauge(a, b, 4)
    assert gauge.matrix.shape == (2, 32)
    assert gauge.targets.shape == (3, 2)
    assert np.allclose(gauge.targets[1], [0.5, 0.25], atol=1e-12)

    model = rod_energy("simplified", 16, 0.1)
    res = solve_geodesic(a, b, 4, model, gauge=gauge)
    assert res.converged
    for k in range(1, 4):
        mean = RodCurve.from_coord(res.path[k]).nodes.mean(axis=0)
        assert np.allclose(mean, gauge.targets[k - 1], atol=1e-9)


def test_rod_morph_energy_equidistributes():
    model = rod_energy("simplified", 32, 0.1)
    a = circle_rod(32).coord
    b = circle_rod(32, 1.2).coord
    res = solve_geodesic(a, b, 4, model, gauge=rod_gauge(a, b, 4))
    assert res.converged
    segments = [4 * model.w(res.path[k - 1], res.path[k]) for k in range(1, 5)]
    assert max(segments) / min(segments) <= 1.1
