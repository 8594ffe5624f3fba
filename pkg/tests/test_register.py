import numpy as np
import pytest

import rydopt as ro
from rydopt.register import (
    CS_CONSTANTS,
    cs_rydberg_lifetime_s,
    triangle_positions_m,
)


def test_fredkin_register_dimensions_and_interactions():
    reg = ro.build_register(
        3,
        ro.THREE_LEVEL,
        ["control", "target", "target"],
        v_rad=2 * np.pi * 5e9,
        positions_m=triangle_positions_m(3e-6),
    )
    assert reg.dim == 27
    assert len(reg.pair_interactions_rad) == 3
    vs = list(reg.pair_interactions_rad.values())
    assert vs[0] == vs[1] == vs[2] == 2 * np.pi * 5e9


def test_single_atom_register():
    reg = ro.build_register(1, ro.THREE_LEVEL, ["target"])
    assert reg.dim == 3
    assert reg.pair_interactions_rad == {}


def test_c6_isosceles_interactions():
    # right isosceles triangle: legs 3 um, hypotenuse 3*sqrt(2) um
    c6 = 2 * np.pi * 870e9 * 1e-36  # rad/s m^6
    pos = [(0, 0, 0), (3e-6, 0, 0), (0, 3e-6, 0)]
    reg = ro.build_register(
        3, ro.FOUR_LEVEL, ["control", "control", "target"], c6_rad_m6=c6, positions_m=pos
    )
    # independent arithmetic: V = C6 / R^6
    v_leg = c6 / (3e-6) ** 6
    v_hyp = c6 / (3e-6 * np.sqrt(2)) ** 6
    assert reg.pair_v(0, 1) == pytest.approx(v_leg, rel=1e-12)
    assert reg.pair_v(0, 2) == pytest.approx(v_leg, rel=1e-12)
    assert reg.pair_v(1, 2) == pytest.approx(v_hyp, rel=1e-12)
    assert reg.pair_v(0, 1) != reg.pair_v(1, 2)


def test_c6_equilateral_gives_equal_v():
    c6 = 2 * np.pi * 870e9 * 1e-36
    reg = ro.build_register(
        3,
        ro.THREE_LEVEL,
        ["control", "target", "target"],
        c6_rad_m6=c6,
        positions_m=triangle_positions_m(3e-6),
    )
    vs = np.array(list(reg.pair_interactions_rad.values()))
    assert np.all(np.abs(vs / vs[0] - 1.0) < 1e-12)


def test_basis_index_examples():
    reg = ro.build_register(3, ro.THREE_LEVEL, ["control", "target", "target"], v_rad=1.0)
    assert reg.basis_index("000") == 0
    assert reg.basis_index("00r") == 2
    assert reg.basis_index("r00") == 18  # 2 * 3^2, atom 0 most significant
    assert reg.basis_labels(18) == ("r", "0", "0")


@pytest.mark.parametrize(
    "n_atoms,scheme",
    [(3, ro.THREE_LEVEL), (3, ro.FOUR_LEVEL), (4, ro.FOUR_LEVEL)],
)
def test_basis_index_roundtrip_exhaustive(n_atoms, scheme):
    roles = ["control"] + ["target"] * (n_atoms - 1)
    reg = ro.build_register(n_atoms, scheme, roles, v_rad=1.0)
    assert reg.dim <= 256
    for idx in range(reg.dim):
        assert reg.basis_index(reg.basis_labels(idx)) == idx


def test_register_errors():
    with pytest.raises(ValueError):
        ro.build_register(5, ro.THREE_LEVEL, ["target"] * 5, v_rad=1.0)
    with pytest.raises(ValueError, match="positions"):
        ro.build_register(2, ro.THREE_LEVEL, ["control", "target"], c6_rad_m6=1.0)
    with pytest.raises(ValueError, match="distance"):
        ro.build_register(
            2,
            ro.THREE_LEVEL,
            ["control", "target"],
            c6_rad_m6=1.0,
            positions_m=[(0, 0, 0), (0, 0, 0)],
        )
    with pytest.raises(KeyError, match="unknown level label"):
        reg = ro.build_register(1, ro.THREE_LEVEL, ["target"])
        reg.basis_index(("q",))


def test_computational_indices_order():
    reg = ro.build_register(2, ro.THREE_LEVEL, ["control", "target"], v_rad=1.0)
    comp = reg.computational_indices()
    labels = ["".join(reg.basis_labels(i)) for i in comp]
    assert labels == ["00", "01", "10", "11"]


def test_k_eff_counterpropagating():
    expected = 2 * np.pi * abs(1.0 / 459.4e-9 - 1.0 / 1040e-9)
    assert CS_CONSTANTS.k_eff == pytest.approx(expected, rel=1e-12)


def test_rydberg_lifetime_estimate_scale():
    # 100S at room temperature: a few hundred microseconds
    tau = cs_rydberg_lifetime_s(100, 300.0)
    assert 200e-6 < tau < 500e-6
    # radiative-only lifetime is longer
    assert cs_rydberg_lifetime_s(100, 0.0) > tau
