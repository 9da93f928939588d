"""Smoke test for the mixlab_py extension module."""

import math

import mixlab_py as m


def main():
    p = 0.75
    assert abs(m.kappa(p) - 1.0 / 3.0) < 1e-15
    assert abs(m.survival_exact(p, 1) - (1.0 - m.kappa(p))) < 1e-12
    # first-step analysis: P(hit 0 before 3 from m), solved by hand for κ = 1/3
    r1 = (1 / 3 - 1 / 27) / (1 - 1 / 27)
    assert abs(m.ruin_exact(p, 1, 0, 3) - r1) < 1e-12
    r2 = (1 / 9 - 1 / 27) / (1 - 1 / 27)
    assert abs(r1 - ((1 - p) + p * r2)) < 1e-12

    assert m.bl_distance([0.0], [0.0]) == 0.0
    assert abs(m.bl_distance([0.0], [0.5]) - 0.5) < 1e-12
    assert abs(m.bl_distance([-5.0], [5.0]) - 2.0) < 1e-12

    cells = m.kick_cells(7, [1.0, 0.5, 0.5])
    assert len(cells) == 3 and all(len(c) == 64 for c in cells)
    assert cells == m.kick_cells(7, [1.0, 0.5, 0.5])

    u = m.time_one_map([0.0] * 32, 2.0)
    assert max(abs(x) for x in u) < 1e-14
    v = m.time_one_map([0.5] * 32, 2.0)
    exact = 1.0 / math.sqrt(1.0 + 3.0 * math.exp(-2.0))
    assert abs(v[0] - exact) < 1e-4, v[0]

    eqs = m.find_equilibria(32, 2.0, random_starts=4)
    means = sorted(sum(vals) / len(vals) for vals, *_ in eqs)
    assert len(means) == 3 and abs(means[0] + 1) < 1e-10 and abs(means[2] - 1) < 1e-10
    assert eqs[-1][3], "target must be stable"

    try:
        m.survival_exact(1.5, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("p outside (1/2, 1) must be rejected")
    print("mixlab_py", m.__version__, "smoke test OK")


if __name__ == "__main__":
    main()
