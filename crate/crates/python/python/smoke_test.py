"""Smoke test for the lshj extension module. Build with `maturin develop` first."""

import math

import lshj


def main():
    # Tukey depth of the uniform square on a 32x32 grid.
    cloud = lshj.PointCloud.grid([32, 32], stencil="ring:16")
    assert len(cloud) == 1024 and cloud.dim == 2
    density = lshj.Density.preset("square", 2)
    scheme = lshj.Scheme("tukey", 2, rhs=density)
    out = lshj.solve(scheme, cloud)
    assert out["converged"], out["stop_reason"]
    assert out["final_residual"] <= 3e-3
    assert len(out["residuals"]) == out["iterations"] + 1

    exact = [lshj.tukey_depth(density, p, 512) for p in cloud.points()]
    err = lshj.l1_error(out["u"], exact)
    assert err < 1e-2, err
    print(f"tukey 32x32: {out['iterations']} sweeps, l1 error {err:.3e}")

    # The scheme residual of the returned field matches the report.
    res = scheme.residual(cloud, out["u"])
    assert math.isclose(res, out["final_residual"], rel_tol=1e-9, abs_tol=1e-12), (res, out["final_residual"])

    # Every neighbour is a member once t exceeds all neighbour values.
    node = 16 * 32 + 16
    members = lshj.subdifferential(cloud, [0.0] * len(cloud), 1.0, node)
    assert len(members) == len(cloud.neighbors(node))

    # Eikonal on a sampled cloud.
    pts = lshj.Density.preset("unit_square", 2).sample(800, seed=7)
    knn = lshj.PointCloud.knn(pts, k=20)
    eik = lshj.solve(lshj.Scheme("eikonal", 2), knn, max_sweeps=200)
    assert eik["stop_reason"] in ("converged", "stagnated"), eik["stop_reason"]
    assert max(eik["u"]) > 0.3
    print(f"eikonal knn: {eik['iterations']} sweeps, stop {eik['stop_reason']}")

    # Bad names surface as ValueError.
    try:
        lshj.Scheme("nope", 2)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    assert lshj.linf_error([0.0, 1.0], [0.0, 1.5]) == 0.5
    print("ok")


if __name__ == "__main__":
    main()
