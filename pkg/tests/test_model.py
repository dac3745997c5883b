import math

import mpmath as mp
import numpy as np
import pytest

from polarport import model
from polarport.model import BUY, SELL, ModelParams

# frozen from the closed forms evaluated with mpmath at 40 digits
BETA1_5 = -0.74695557337626033
BETA2_5 = 2.3460938236070230
BETA1_SYM = -0.76101275422472977   # lam = mu = 0.05
BETA2_SYM = 2.3305590816706674
T_HAT0_5 = 2.6119464506621747
T_HAT1_5 = 1.4925484270026381
X_M_5 = -0.55357142857142857
SR_T_5 = 2.0678631506364418
EXTEND_PI4 = 2.4255161140409015    # buy extension, anchor (0, 2), theta = pi/4


class TestModelParams:
    def test_valid(self, params5):
        assert params5.gamma == 0.5

    @pytest.mark.parametrize("field,value", [
        ("sigma", 0.0), ("sigma", -1.0),
        ("gamma", 0.0), ("gamma", 1.0), ("gamma", 1.5),
        ("lam", -0.01), ("mu", -0.01), ("mu", 1.0),
        ("T", 0.0), ("T", -2.0),
    ])
    def test_field_ranges(self, field, value):
        kwargs = dict(r=0.03, alpha=0.10, sigma=0.25, gamma=0.5,
                      lam=0.08, mu=0.02, T=4.0)
        kwargs[field] = value
        with pytest.raises(ValueError):
            ModelParams(**kwargs)

    def test_standing_assumptions(self):
        with pytest.raises(ValueError):   # alpha <= r
            ModelParams(r=0.10, alpha=0.03, sigma=0.25, gamma=0.5,
                        lam=0.08, mu=0.02, T=4.0)
        with pytest.raises(ValueError):   # lam + mu = 0
            ModelParams(r=0.03, alpha=0.10, sigma=0.25, gamma=0.5,
                        lam=0.0, mu=0.0, T=4.0)


class TestDomainAngles:
    def test_reference_params(self, params5):
        b1, b2 = model.domain_angles(params5)
        assert b1 == pytest.approx(BETA1_5, abs=1e-14)
        assert b2 == pytest.approx(BETA2_5, abs=1e-14)
        assert -math.pi / 2 < b1 < 0 < math.pi / 2 < b2 < math.pi

    def test_costless_limit(self):
        p = ModelParams(r=0.03, alpha=0.10, sigma=0.25, gamma=0.5,
                        lam=0.0, mu=1e-12, T=4.0)
        b1, b2 = model.domain_angles(p)
        assert b1 == pytest.approx(-math.pi / 4, abs=1e-12)
        assert b2 == pytest.approx(3 * math.pi / 4, abs=1e-11)

    def test_symmetric_costs(self):
        p = ModelParams(r=0.03, alpha=0.10, sigma=0.25, gamma=0.5,
                        lam=0.05, mu=0.05, T=4.0)
        b1, b2 = model.domain_angles(p)
        assert b1 == pytest.approx(BETA1_SYM, abs=1e-14)
        assert b2 == pytest.approx(BETA2_SYM, abs=1e-14)
        assert b1 + b2 != pytest.approx(math.pi, abs=1e-6)


class TestCriticalQuantities:
    def test_reference_params(self, domain5):
        assert domain5.t_hat0 == pytest.approx(T_HAT0_5, abs=1e-13)
        assert domain5.t_hat1 == pytest.approx(T_HAT1_5, abs=1e-13)
        assert domain5.merton_z == pytest.approx(X_M_5, abs=1e-15)
        assert domain5.sr_terminal == pytest.approx(SR_T_5, abs=1e-13)
        assert domain5.t_hat1 < domain5.t_hat0 < 4.0

    def test_gamma_near_one(self):
        p = ModelParams(r=0.03, alpha=0.10, sigma=0.25, gamma=1 - 1e-9,
                        lam=0.08, mu=0.02, T=4.0)
        dom = model.critical_quantities(p)
        assert dom.t_hat1 == pytest.approx(dom.t_hat0, abs=1e-6)

    def test_excess_boundary(self):
        # sigma^2 = (alpha - r)/(1 - gamma) makes the crossing time vanish
        p = ModelParams(r=0.03, alpha=0.10, sigma=math.sqrt(0.07 / 0.5),
                        gamma=0.5, lam=0.08, mu=0.02, T=4.0)
        dom = model.critical_quantities(p)
        assert dom.t_hat1 is None
        assert dom.merton_z == pytest.approx(0.0, abs=1e-15)

    def test_raw_t_hat0_reported(self):
        # huge costs push the onset below zero; value is reported, not errored
        p = ModelParams(r=0.03, alpha=0.04, sigma=0.25, gamma=0.5,
                        lam=0.5, mu=0.3, T=1.0)
        dom = model.critical_quantities(p)
        assert dom.t_hat0 < 0.0


class TestCoefficients:
    def test_at_half_pi(self, params5):
        g0, g1, g2 = model.coefficients(math.pi / 2, params5)
        assert g0 == pytest.approx(0.0421875, abs=1e-16)
        assert abs(g1) < 1e-16 and abs(g2) < 1e-32

    def test_at_zero(self, params5):
        g0, g1, g2 = model.coefficients(0.0, params5)
        assert g0 == pytest.approx(params5.gamma * params5.r, abs=1e-16)
        assert g1 == 0.0 and g2 == 0.0

    def test_diffusion_quarter_pi(self, params5):
        _, _, g2 = model.coefficients(math.pi / 4, params5)
        assert g2 == pytest.approx(0.0078125, abs=1e-17)

    def test_diffusion_nonnegative(self, params5, domain5):
        theta = np.linspace(domain5.beta1 + 1e-9, domain5.beta2 - 1e-9, 2001)
        _, _, g2 = model.coefficients(theta, params5)
        assert np.all(g2 >= 0.0)
        away = (np.abs(theta) > 1e-3) & (np.abs(theta - math.pi / 2) > 1e-3)
        assert np.all(g2[away] > 0.0)


class TestTerminalValue:
    def test_at_half_pi(self, params5):
        assert model.terminal_value(math.pi / 2, params5) == \
            pytest.approx(2 * math.sqrt(0.98), abs=1e-15)

    def test_kink_value(self, params5):
        assert model.terminal_value(0.0, params5) == pytest.approx(2.0, abs=1e-15)
        assert model.terminal_value(1e-12, params5) == pytest.approx(2.0, abs=1e-10)
        assert model.terminal_value(-1e-12, params5) == pytest.approx(2.0, abs=1e-10)

    def test_one_sided_slopes_differ_by_total_cost(self, params5):
        h = 1e-7
        right = (model.terminal_value(h, params5)
                 - model.terminal_value(0.0, params5)) / h
        left = (model.terminal_value(0.0, params5)
                - model.terminal_value(-h, params5)) / h
        assert left - right == pytest.approx(params5.lam + params5.mu, abs=1e-5)

    def test_positive_on_domain(self, params5, domain5):
        theta = np.linspace(domain5.beta1 + 1e-9, domain5.beta2 - 1e-9, 401)
        assert np.all(model.terminal_value(theta, params5) > 0.0)

    def test_domain_error(self, params5, domain5):
        with pytest.raises(ValueError):
            model.terminal_value(domain5.beta1, params5)
        with pytest.raises(ValueError):
            model.terminal_value(domain5.beta2 + 0.1, params5)


class TestGradientRatio:
    def test_buy_at_zero(self, params5):
        assert model.gradient_ratio(0.0, BUY, params5) == \
            pytest.approx(0.54, abs=1e-15)

    def test_sell_root(self, params5):
        theta = math.atan(1 - params5.mu)
        assert abs(model.gradient_ratio(theta, SELL, params5)) < 1e-15

    def test_sell_at_half_pi(self, params5):
        assert model.gradient_ratio(math.pi / 2, SELL, params5) == \
            pytest.approx(-0.5 / 0.98, abs=1e-14)

    def test_buy_positive_below_its_root(self, params5):
        root = math.atan(1 + params5.lam)
        theta = np.linspace(-0.5, root - 1e-6, 100)
        assert np.all(model.gradient_ratio(theta, BUY, params5) > 0.0)

    def test_unknown_side(self, params5):
        with pytest.raises(ValueError):
            model.gradient_ratio(0.1, "hold", params5)


class TestExtend:
    def test_anchor_reproduced(self, params5):
        assert model.extend(1.1, 1.1, 3.7, SELL, params5) == 3.7

    def test_vanishes_at_wedge_edge(self, params5, domain5):
        vals = [model.extend(domain5.beta1 + eps, 0.0, 2.0, BUY, params5)
                for eps in (1e-2, 1e-4, 1e-6)]
        assert vals[0] > vals[1] > vals[2] > 0.0
        assert vals[2] < 1e-2

    def test_reference_value(self, params5):
        assert model.extend(math.pi / 4, 0.0, 2.0, BUY, params5) == \
            pytest.approx(EXTEND_PI4, rel=1e-15)

    def test_contract_errors(self, params5, domain5):
        with pytest.raises(ValueError):
            model.extend(0.1, 0.5, -1.0, BUY, params5)
        with pytest.raises(ValueError):
            model.extend(domain5.beta2 + 0.01, 2.0, 1.0, SELL, params5)

    def test_log_derivative_is_gradient_ratio(self, params5):
        # mpmath differentiates the closed form; agreement is to rounding
        mp.mp.dps = 30
        lam, mu, gamma = (mp.mpf(str(x)) for x in
                          (params5.lam, params5.mu, params5.gamma))
        for side, k in ((BUY, 1 + lam), (SELL, 1 - mu)):
            f = lambda x: (k * mp.sin(x) + mp.cos(x))**gamma
            for theta in (0.3, 0.9, 1.7):
                dlog = mp.diff(f, mp.mpf(str(theta))) / f(mp.mpf(str(theta)))
                assert model.gradient_ratio(theta, side, params5) == \
                    pytest.approx(float(dlog), rel=1e-13)


class TestToCartesian:
    def test_at_half_pi(self, params5):
        z, v = model.to_cartesian(math.pi / 2, 2.0, -0.5, params5)
        assert abs(z) < 1e-15
        assert v == pytest.approx(0.5 / (params5.gamma * 2.0), abs=1e-15)

    def test_quarter_pi(self, params5):
        z, v = model.to_cartesian(math.pi / 4, 1.0, 0.0, params5)
        assert z == pytest.approx(1.0, abs=1e-15)
        assert v == pytest.approx(0.5, abs=1e-15)

    def test_rejects_nonpositive_value(self, params5):
        with pytest.raises(ValueError):
            model.to_cartesian(1.0, 0.0, 0.1, params5)

    @pytest.mark.parametrize("side", [BUY, SELL])
    def test_extension_image_is_dai_yi_obstacle(self, params5, side):
        # along an extension, v(z) = 1/(z + k) with k the cost factor
        k = 1 + params5.lam if side == BUY else 1 - params5.mu
        theta = np.linspace(0.4, 2.1, 23)
        V = model.extend(theta, 1.0, 2.0, side, params5)
        dV = model.gradient_ratio(theta, side, params5) * V
        z, v = model.to_cartesian(theta, V, dV, params5)
        assert np.max(np.abs(v - 1.0 / (z + k))) < 1e-13

    def test_sell_image_matches_ratio_substitution(self, params5):
        # substituting the sell gradient ratio into the map directly
        theta = 1.3
        V = 2.4
        dV = model.gradient_ratio(theta, SELL, params5) * V
        _, v = model.to_cartesian(theta, V, dV, params5)
        s, c = math.sin(theta), math.cos(theta)
        expected = -(model.gradient_ratio(theta, SELL, params5) * s * s
                     - params5.gamma * s * c) / params5.gamma
        assert v == pytest.approx(expected, abs=1e-15)
