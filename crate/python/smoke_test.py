"""Quick check that the `mapless` extension imports and behaves."""

import math

import mapless


def main() -> None:
    q = mapless.solve_lane_change(0.0, 1.0, 0.0, 1.0)
    expected = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0]
    assert all(abs(a - b) < 1e-9 for a, b in zip(q.coefficients, expected)), q.coefficients

    d = mapless.fbl_steering(1.0, 0.0, 2.5, gamma1=1.0, gamma2=1.0, wheelbase=1.0)
    assert abs(d - math.atan(-1.0 / 6.25)) < 1e-12, d

    _, rho = mapless.closed_loop_matrix(1.0, 2.0, 0.05)
    assert abs(rho - 0.95) < 1e-9, rho

    pts = [(x / 4.0, 0.01 * (x / 4.0) ** 2 - 0.05 * x / 4.0 + 1.2) for x in range(4, 48)]
    line, inliers = mapless.fit_quadratic(pts, seed=3)
    assert inliers == len(pts)
    assert abs(line.coefficients[2] - 1.2) < 1e-9

    tracker = mapless.LaneTracker(system_noise=[0.0, 0.0, 0.0], sources=[("steerable", [1.0, 1.0, 1.0])])
    tracker.ingest("steerable", [0.0, 0.0, 0.5], 0.0)
    assert tracker.estimate[2] > 0.0

    names = mapless.builtin_scenarios()
    assert "straight" in names, names
    run = mapless.run_scenario("straight", duration=10.0)
    assert not run["failed"]
    assert len(run["log"]["t"]) == run["steps"]
    print(f"straight: rms {run['rms_lateral']:.4f} m over {run['steps']} steps")

    results = mapless.run_acceptance(["AC5", "AC6"])
    assert all(passed for _, passed, _ in results), results
    print("smoke test passed")


if __name__ == "__main__":
    main()
