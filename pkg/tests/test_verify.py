import numpy as np
import pytest

from geomimu.verify import (
    CheckResult,
    SUITE_NAMES,
    lloyd_kmeans,
    naive_nearest,
    run_suite,
)


def test_suite_names_are_stable():
    assert SUITE_NAMES == ("kinematics", "frames", "masking", "losses", "pq", "formats")


def test_frames_suite_passes():
    results, ok = run_suite("frames")
    assert ok
    assert results
    for r in results:
        assert r.passed
        assert r.measured <= r.tolerance


def test_unknown_suite_raises():
    with pytest.raises(ValueError, match="unknown suite"):
        run_suite("nope")


def test_check_result_line_format():
    good = CheckResult("thing", True, 1.5e-12, 1e-9)
    bad = CheckResult("other", False, 2.0, 1e-9)
    assert good.line() == "PASS thing: measured=1.500e-12 tolerance=1.000e-09"
    assert bad.line().startswith("FAIL other:")


def test_lloyd_oracle_recovers_separated_centers():
    rng = np.random.default_rng(0)
    pts = np.concatenate(
        [
            [0.0, 0.0] + 0.05 * rng.normal(size=(150, 2)),
            [6.0, 6.0] + 0.05 * rng.normal(size=(150, 2)),
        ]
    )
    centers = lloyd_kmeans(pts, 2, np.random.default_rng(1))
    centers = centers[np.argsort(centers[:, 0])]
    assert np.allclose(centers[0], [0.0, 0.0], atol=0.02)
    assert np.allclose(centers[1], [6.0, 6.0], atol=0.02)


def test_naive_nearest_breaks_ties_low():
    codebook = np.array([[1.0, 0.0], [1.0, 0.0], [9.0, 9.0]])
    assert naive_nearest(np.array([1.0, 0.0]), codebook) == 0
