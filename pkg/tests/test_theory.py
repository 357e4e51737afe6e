import math

import numpy as np
import pytest

from interpnn.core import RngSeed
from interpnn.errors import OutOfRegimeError
from interpnn.theory import (
    THEORY_COLUMNS,
    cis_ratio_opt_k,
    cis_ratio_same_k,
    empirical_moment_check,
    gamma_d,
    k_ratio,
    moment_limits,
    ownn_ratio,
    pr,
    theory_table,
)

# Reference values from a 50-digit mpmath evaluation of the closed forms.
PR_2_05 = 0.976046455245748667
SQRT_PR_2_05 = 0.987950634012524265
OWNN_2_0 = 0.924481699134179606
GAMMA_D = {1: 0.225695136225916611, 2: 0.585786437626904951, 3: 0.975831344605105992}
K_RATIO_2_04 = 1.10520944959211598
K_RATIO_5_1 = 1.11908734217778286


def regime_grid(d, m=200):
    return np.linspace(0.0, d / 3.0, m, endpoint=False)


class TestPr:
    @pytest.mark.parametrize("d", range(1, 21))
    def test_one_at_zero(self, d):
        assert abs(pr(d, 0.0) - 1.0) <= 1e-15

    def test_reference_value(self):
        assert pr(2, 0.5) == pytest.approx(PR_2_05, rel=1e-14)

    def test_rises_again(self):
        assert pr(2, 0.66) > pr(2, 0.4)

    @pytest.mark.parametrize("d", range(1, 11))
    def test_single_turning_point(self, d):
        vals = np.array([pr(d, g) for g in regime_grid(d, 2000)])
        signs = np.sign(np.diff(vals))
        assert signs[0] < 0
        assert np.all(signs != 0)
        assert np.count_nonzero(np.diff(signs)) == 1

    @pytest.mark.parametrize("bad", [(2, 2 / 3), (2, 1.0), (2, -0.1), (0, 0.0), (2.5, 0.1)])
    def test_out_of_regime(self, bad):
        with pytest.raises(OutOfRegimeError):
            pr(*bad)

    def test_high_dimension_washout(self):
        gaps = [1.0 - pr(d, 0.2 * d) for d in range(5, 101)]
        assert all(g > 0 for g in gaps)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))


class TestGammaD:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_root_low_dimension(self, d):
        g = gamma_d(d)
        assert 0.0 < g < d / 3.0
        assert abs(pr(d, g) - 1.0) <= 1e-12
        assert g == pytest.approx(GAMMA_D[d], abs=1e-10)

    def test_d2_closed_form(self):
        assert gamma_d(2) == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-10)

    @pytest.mark.parametrize("d", range(4, 11))
    def test_full_window_high_dimension(self, d):
        assert gamma_d(d) == d / 3.0
        assert all(pr(d, g) < 1.0 for g in regime_grid(d)[1:])

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_window(self, d):
        g = gamma_d(d)
        inside = [x for x in regime_grid(d)[1:] if x < g]
        assert inside and all(pr(d, x) < 1.0 for x in inside)
        assert pr(d, 0.9 * g) < 1.0
        assert pr(d, min(0.999 * d / 3.0, 1.1 * g)) > 1.0


class TestOtherRatios:
    def test_k_ratio_values(self):
        assert k_ratio(3, 0.0) == 1.0
        assert k_ratio(2, 0.4) == pytest.approx(K_RATIO_2_04, rel=1e-14)
        assert k_ratio(5, 1.0) == pytest.approx(K_RATIO_5_1, rel=1e-14)

    def test_cis_same_k(self):
        assert cis_ratio_same_k(2, 0.0) == 1.0
        assert cis_ratio_same_k(2, 0.5) == pytest.approx(math.sqrt(1.125), rel=1e-15)

    def test_cis_opt_k(self):
        assert cis_ratio_opt_k(2, 0.0) == 1.0
        assert cis_ratio_opt_k(2, 0.5) == pytest.approx(SQRT_PR_2_05, rel=1e-14)

    @pytest.mark.parametrize("d", range(1, 11))
    def test_ratios_above_one_inside_regime(self, d):
        for g in regime_grid(d)[1:]:
            assert k_ratio(d, g) > 1.0
            assert cis_ratio_same_k(d, g) > 1.0
            assert (cis_ratio_opt_k(d, g) < 1.0) == (pr(d, g) < 1.0)

    def test_ownn_value(self):
        assert ownn_ratio(2, 0.0) == pytest.approx(OWNN_2_0, rel=1e-14)
        assert ownn_ratio(2, 0.0) == pytest.approx(2 ** (2 / 3) * (2 / 3) ** (4 / 3), rel=1e-15)

    def test_ownn_below_one(self):
        for d in range(2, 51):
            for j in range(10):
                assert ownn_ratio(d, j * 0.1 * d / 3.0) < 1.0

    def test_ownn_large_d(self):
        assert abs(ownn_ratio(200, 0.0) - 1.0) < 0.02

    def test_out_of_regime(self):
        for f in (k_ratio, cis_ratio_same_k, cis_ratio_opt_k, ownn_ratio):
            with pytest.raises(OutOfRegimeError):
                f(3, 1.0)


class TestMoments:
    def test_zero(self):
        m = moment_limits(4, 0.0)
        assert (m.m1, m.m2, m.m1r2_coeff) == (1.0, 1.0, 4 / 6)

    def test_reference(self):
        m = moment_limits(2, 0.5)
        assert m.m1 == pytest.approx(4 / 3)
        assert m.m2 == pytest.approx(2.0)
        assert m.m1r2_coeff == pytest.approx(2 / 3.5)

    def test_moment_regime_is_half_d(self):
        moment_limits(2, 0.9)
        with pytest.raises(OutOfRegimeError):
            moment_limits(2, 1.0)

    @pytest.mark.parametrize("d", range(1, 11))
    def test_identity(self, d):
        for g in regime_grid(d):
            m = moment_limits(d, g)
            assert abs(m.m2 / m.m1 ** 2 - (1.0 + g * g / (d * (d - 2 * g)))) <= 1e-12

    def test_empirical_gamma_zero(self):
        est = empirical_moment_check(2, 0.0, 10, 1000, RngSeed(1), reps=5)
        assert est.m1_hat == 1.0 and est.m2_hat == 1.0

    def test_empirical_d5(self):
        est = empirical_moment_check(5, 1.0, 200, 100_000, RngSeed(11), reps=200)
        assert abs(est.m1_hat - 5 / 4) <= 3 * est.m1_se
        assert abs(est.m2_hat - 5 / 3) <= 3 * est.m2_se

    def test_empirical_deterministic(self):
        a = empirical_moment_check(2, 0.3, 20, 2000, RngSeed(4), reps=10)
        b = empirical_moment_check(2, 0.3, 20, 2000, RngSeed(4), reps=10)
        assert a == b


def test_table_columns():
    rows = theory_table(2, [0.0, 0.25, 0.5])
    assert len(rows) == 3
    assert tuple(rows[0]) == THEORY_COLUMNS
    assert rows[2]["pr"] == pr(2, 0.5)
