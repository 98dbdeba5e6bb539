import pytest

from lottree.sim.metrics import acp, rpr, tcp, treasure_contribution


def test_treasure_contribution():
    assert treasure_contribution(0, 0, False, False) == 0
    assert treasure_contribution(0, 0, False, True) == 0
    assert treasure_contribution(60, 1000, True, True) == pytest.approx(200)
    assert treasure_contribution(120, 0, False, False) == pytest.approx(60)
    # the find bonus only counts when asked for
    assert treasure_contribution(60, 1000, True, False) == pytest.approx(80)
    with pytest.raises(ValueError):
        treasure_contribution(-1, 0)


def test_rpr():
    assert rpr(10, 30) == pytest.approx(0.5)
    assert rpr(0, 7) == 0
    assert rpr(25, 50) == pytest.approx(1.0)
    for bad in ((5, 5), (6, 5)):
        with pytest.raises(ValueError):
            rpr(*bad)


def test_totals():
    assert tcp([1.5, 2.5, 6]) == 10
    assert acp([1.5, 2.5, 6]) == pytest.approx(10 / 3)
    assert acp([]) == 0
