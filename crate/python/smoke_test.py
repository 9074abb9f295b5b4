"""Smoke test for the Python bindings. Run after `pip install crates/python`."""

import math

import multistab as ms


def main():
    p = ms.SystemParams()
    assert p.kappa == 100.0

    # two roots in region b, branch 1 unstable
    br = ms.steady_states(10.0, p)
    assert [b.branch_index for b in br] == [1, 2], br
    assert br[0].stability == "Unstable"
    assert abs(br[0].delta_ps - 88.822) < 1e-2

    # four roots in region c
    assert ms.root_count(-5.0, p) == 4
    assert ms.root_count(30.0, p) == 0

    ev = ms.eigenvalues(10.0, 1, p)
    assert len(ev) == 8 and ev[0].real > 0

    th, regions = ms.find_thresholds(p, -100.0, 100.0)
    kinds = {k: d for k, d, _, _ in th}
    assert abs(kinds["cd"] - 25.07) < 0.05 and abs(kinds["bc"] + 0.9607) < 1e-3, th
    assert [r[0] for r in regions] == ["c", "b", "a"], regions

    z = ms.chi(0.0, p)
    assert z.real == 0.0
    assert math.isclose(z.imag, p.gamma2 / (p.omega ** 2 + p.gamma1 * p.gamma2), rel_tol=1e-15)

    pts = ms.chi_sweep(p, [-1.0 + 0.01 * i for i in range(201)])
    assert pts and all(isinstance(c, complex) for _, _, c in pts)

    q = ms.SystemParams.stiffness_reduced()
    ok, times, dist = ms.basin_test(-5.0, 3, q, 1e-3)
    assert ok and dist[-1] < 1e-6
    ok, _, _ = ms.basin_test(-5.0, 1, q, 1e-3)
    assert not ok

    try:
        ms.SystemParams(alpha_in=0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha_in = 0 accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
