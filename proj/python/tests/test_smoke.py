import csv
import io
import math

import pytest

import overlapkit as ok


def test_version():
    assert ok.__version__.count(".") == 2


def test_density_hand_value():
    # q = 1, t = 1: rho(2) = 1/(2 pi)
    assert ok.mp_density(1.0, 1.0, 1.0, 2.0) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    lo, hi = ok.mp_edges(ok.MPSpec(1.0, 1.0, 1.0))
    assert (lo, hi) == pytest.approx((0.0, 4.0))


def test_anchor():
    r = ok.ShapeRatios(0.9, 0.4, 0.8, 3.0)
    o = ok.mp_overlap_triple(r, (0.4 + 0.8 / 0.9) * 3, (1 + 1 / 0.9) * 3)
    assert o["vbar"] == pytest.approx(2.0, rel=1e-12)
    assert o["ubar"] == pytest.approx(2.5, rel=1e-12)
    assert ok.mp_kernel_overlaps(r, 3.0, 5.0)["u3"] == pytest.approx(1.40625, rel=1e-12)


def test_general_matches_closed_form():
    d = ok.Dims(300, 270, 240, 108)
    import numpy as np

    g = ok.general_overlap_triple(np.zeros((300, 270)), d, 3.0, 5.0, 3.0)
    c = ok.mp_overlap_triple(d.ratios(3.0), 3.0, 5.0)
    for k in ("vbar", "ubar", "wbar"):
        assert g[k] == pytest.approx(c[k], abs=1e-6)


def test_monte_carlo_is_seeded():
    d = ok.Dims.from_ratios(40, 0.9, 0.4, 0.8)
    a = ok.mc_rescaled_overlaps(d, 1.0, [(0.5, 0.5)], trials=4, seed=3)
    b = ok.mc_rescaled_overlaps(d, 1.0, [(0.5, 0.5)], trials=4, seed=3, threads=2)
    assert a == b
    assert a[0]["v"]["se"] > 0


def test_sde_keeps_order():
    d = ok.Dims(6, 4, 4, 2)
    e = ok.integrate_eigenvalues(d, [3.0, 2.0, 1.0, 0.5], 1.0, 32, seed=2)
    assert all(x > y for x, y in zip(e, e[1:])) and e[-1] > 0


def test_cli_roundtrip_and_errors():
    code, out, _ = ok.run_cli(["theory", "--grid", "2"])
    assert code == 0
    rows = [l for l in out.splitlines() if not l.startswith("#")]
    table = list(csv.DictReader(io.StringIO("\n".join(rows))))
    assert len(table) == 4 and "vbar" in table[0]
    assert ok.run_cli(["theory", "--q", "2"])[0] == 1
    with pytest.raises(ValueError):
        ok.ShapeRatios(1.5, 0.4, 0.8, 1.0)
