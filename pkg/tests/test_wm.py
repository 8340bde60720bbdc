import numpy as np
import pytest

from bpviral.bp_core import make_rng
from bpviral.wm import (EA, EH, EH2, EO, FAKE, REAL, MechanismDesign,
                        PostModel, UserMix, beta_bounds, delta_a_value,
                        design_ea, design_eh, design_eh2, design_for_kind,
                        eo_warning, gbeta_field, gbeta_wm, iqos_scale,
                        learned_design, limit_proportions, optimize_eo,
                        warning_value)
from bpviral.ode_engine import classify_scalar


def random_post(rng):
    ax_r = rng.uniform(0.1, 0.4)
    ax_f = ax_r + rng.uniform(0.05, 0.5)
    ay_f = ax_f * rng.uniform(0.4, 0.9)
    ay_r = min(ax_r * rng.uniform(0.4, 0.9), ay_f - 0.01)
    if ay_r <= 0:
        ay_r = ay_f / 2
    eta_r = rng.uniform(0.05, 0.4)
    eta_f = eta_r + rng.uniform(0.02, 0.2)
    return PostModel(m_f=rng.uniform(10, 40), eta_f=eta_f, eta_r=eta_r,
                     eta_a=eta_f + rng.uniform(0.01, 0.2),
                     gamma=rng.uniform(0.05, 0.2), rho=rng.uniform(0.3, 0.95),
                     alpha_x_f=ax_f, alpha_y_f=ay_f,
                     alpha_x_r=ax_r, alpha_y_r=ay_r)


def random_mix(rng):
    mu1 = rng.uniform(0.0, 0.3)
    mu2 = rng.uniform(0.2, 0.6)
    mua = rng.uniform(0.0, 0.2)
    s = mu1 + mu2 + mua
    if s > 0.95:
        mu1, mu2, mua = (v * 0.95 / s for v in (mu1, mu2, mua))
    return UserMix(mu0=1 - mu1 - mu2 - mua, mu1=mu1, mu2=mu2, mua=mua)


class TestWarningValue:
    def test_eo_anchors(self, smart_post):
        d = MechanismDesign(kind=EO, w=1.0, b=1.0)
        mix = UserMix(0.0, 0.0, 1.0, 0.0)
        post = smart_post
        assert warning_value(EO, 0.0, d, post, mix) == pytest.approx(post.gamma)
        assert warning_value(EO, 1.0, d, post, mix) == pytest.approx(1.0 + post.gamma)
        assert warning_value(EO, 0.5, d, post, mix) == pytest.approx(0.6)

    def test_zero_beta_zero_b_limit(self):
        assert eo_warning(0.0, 2.0, 0.0, 0.1) == pytest.approx(0.1)

    def test_ea_zero_boost_without_adversaries(self, naive_post):
        mix = UserMix(0.35, 0.15, 0.5, 0.0)
        d = MechanismDesign(kind=EA, w=2.0, b=0.4)
        for b in np.linspace(0, 1, 7):
            assert warning_value(EA, b, d, naive_post, mix) == pytest.approx(
                warning_value(EO, b, d, naive_post, mix))

    def test_ea_dominates_eo(self, naive_post):
        rng = make_rng(3)
        mix = UserMix(0.25, 0.15, 0.5, 0.1)
        d = MechanismDesign(kind=EA, w=2.0, b=0.4)
        for b in rng.uniform(0.001, 1, 50):
            assert (warning_value(EA, b, d, naive_post, mix)
                    > warning_value(EO, b, d, naive_post, mix))

    def test_eh_scales_ea(self, naive_post):
        mix = UserMix(0.25, 0.15, 0.5, 0.1)
        d = MechanismDesign(kind=EH, w=2.0, b=0.4, zeta=1.3)
        for b in (0.2, 0.6):
            assert warning_value(EH, b, d, naive_post, mix) == pytest.approx(
                1.3 * warning_value(EA, b, d, naive_post, mix))


class TestGbetaField:
    def test_positive_at_zero(self, naive_post):
        mix = UserMix(0.25, 0.15, 0.5, 0.1)
        d = MechanismDesign(kind=EO, w=1.0, b=0.3)
        for u in (FAKE, REAL):
            assert gbeta_wm(0.0, EO, d, naive_post, mix, u) > 0

    def test_saturation_kinks_registered(self, naive_post):
        mix = UserMix(0.25, 0.15, 0.5, 0.1)
        d = MechanismDesign(kind=EH2, w=naive_post.w_h2, b=0.5)
        field = gbeta_field(EH2, d, naive_post, mix, FAKE)
        interior = [k for k in field.kinks if 0 < k < 1]
        assert interior, "expected min{} switch points inside (0,1)"
        for k in interior:
            om = warning_value(EH2, k, d, naive_post, mix)
            assert min(abs(om * naive_post.alpha_x_f - 1.0),
                       abs(om * naive_post.alpha_y_f - 1.0)) < 1e-9

    def test_unique_sign_change_for_eo(self):
        rng = make_rng(17)
        for _ in range(40):
            post, mix = random_post(rng), random_mix(rng)
            d = MechanismDesign(kind=EO, w=min(rng.uniform(0.2, 1.0) * post.w_bar,
                                               post.w_bar),
                                b=rng.uniform(0, 2))
            rep = classify_scalar(gbeta_field(EO, d, post, mix, FAKE),
                                  grid_points=2000)
            assert len(rep.equilibria) == 1


class TestBenchmarkNumbers:
    def test_smart_qos_values(self, smart_post):
        for mua, expect in [(0.01, 0.89798), (0.02, 0.8174)]:
            mix = UserMix(mu0=0.0, mu1=0.0, mu2=1 - mua, mua=mua)
            d = optimize_eo(smart_post, mix, delta=0.02, iqos=False)
            assert d.qos == pytest.approx(expect, abs=2e-4)

    def test_smart_iqos_values(self, smart_post):
        for mua, expect in [(0.01, 0.958), (0.02, 0.9253)]:
            mix = UserMix(mu0=0.0, mu1=0.0, mu2=1 - mua, mua=mua)
            d = optimize_eo(smart_post, mix, delta=0.02, iqos=True)
            assert d.iqos == pytest.approx(expect, abs=5e-4)

    def test_w_star_value(self, smart_post):
        assert smart_post.w_bar == pytest.approx(1.0765, abs=1e-3)

    def test_naive_w_h2(self, naive_post):
        assert naive_post.w_h2 == pytest.approx(8.2333, abs=1e-3)

    def test_eh2_insensitive_to_adversaries(self, naive_post, naive_mix):
        expected = {0.0: 0.8289, 0.1: 0.8270, 0.2: 0.8257, 0.3: 0.8246}
        for mua, val in expected.items():
            mix = UserMix(mu0=max(0.35 - mua, 0.0), mu1=0.15, mu2=0.5, mua=mua)
            d = design_eh2(naive_post, mix, 0.05, iqos=True)
            assert d.iqos == pytest.approx(val, abs=1e-3)

    def test_eh_improves_on_ea_naive(self, naive_post, naive_mix):
        mix = naive_mix(0.1)
        ea, _ = design_ea(naive_post, mix, 0.05, iqos=True)
        eh = design_eh(naive_post, mix, 0.05, iqos=True)
        assert eh.iqos == pytest.approx(0.7629, abs=1e-3)
        assert eh.iqos >= ea.iqos - 1e-12
        assert ea.iqos > optimize_eo(naive_post, mix, 0.05, iqos=True).iqos

    def test_smart_ea_reaches_full_identification(self, smart_post):
        mix = UserMix(mu0=0.5 - 0.1, mu1=0.0, mu2=0.5, mua=0.1)
        ea, _ = design_ea(smart_post, mix, 0.02, iqos=True)
        assert ea.iqos >= 0.999

    def test_adversaries_degrade_eo(self, smart_post):
        base = optimize_eo(smart_post, UserMix(0.0, 0.0, 1.0, 0.0),
                           0.02, iqos=False)
        hit = optimize_eo(smart_post, UserMix(0.0, 0.0, 0.98, 0.02),
                          0.02, iqos=False)
        assert hit.qos < base.qos


class TestOptimizeEo:
    def test_constraint_saturates_in_case_one(self, naive_post, naive_mix):
        mix = naive_mix(0.1)
        d = optimize_eo(naive_post, mix, 0.05, iqos=True)
        assert d.b > 0
        assert d.predicted_limits[REAL][0] == pytest.approx(d.delta_target, abs=1e-6)

    def test_slack_constraint_keeps_b_zero(self, naive_post, naive_mix):
        d = optimize_eo(naive_post, naive_mix(0.1), delta=0.9, iqos=False)
        assert d.b == 0.0
        assert d.constraint_ok

    def test_unattainable_target_raises(self, naive_post, naive_mix):
        with pytest.raises(ValueError, match="constraint unattainable"):
            optimize_eo(naive_post, naive_mix(0.1), delta=1e-6, iqos=False)

    def test_roots_monotone_in_w_and_b(self):
        rng = make_rng(4)
        for _ in range(15):
            post, mix = random_post(rng), random_mix(rng)
            w = rng.uniform(0.3, 1.0) * post.w_bar
            b = rng.uniform(0.05, 1.5)
            dw, db = 1.05 * w, 1.3 * b
            for u in (FAKE, REAL):
                def root(w_, b_):
                    d = MechanismDesign(kind=EO, w=w_, b=b_)
                    rep = classify_scalar(gbeta_field(EO, d, post, mix, u),
                                          grid_points=2000)
                    return rep.equilibria[0].beta
                assert root(dw, b) > root(w, b)
                assert root(w, db) < root(w, b)

    def test_roots_inside_bounds(self):
        rng = make_rng(5)
        for _ in range(15):
            post, mix = random_post(rng), random_mix(rng)
            d = MechanismDesign(kind=EO, w=0.8 * post.w_bar, b=0.2)
            limit_proportions(EO, d, post, mix)
            for u in (FAKE, REAL):
                lo, hi = beta_bounds(post, mix, u)
                for r in d.predicted_limits[u]:
                    assert lo - 1e-9 < r <= hi + 1e-9

    def test_iqos_is_exact_rescale(self, naive_post, naive_mix):
        mix = naive_mix(0.15)
        d = optimize_eo(naive_post, mix, 0.05, iqos=True)
        assert d.iqos == pytest.approx(d.qos * iqos_scale(naive_post, mix))


class TestEaEh:
    def test_ea_equals_eo_without_adversaries(self, naive_post):
        mix = UserMix(0.35, 0.15, 0.5, 0.0)
        ea, thr = design_ea(naive_post, mix, 0.05, iqos=True)
        eo = optimize_eo(naive_post, mix, 0.05, iqos=True)
        assert ea.qos == pytest.approx(eo.qos, abs=1e-9)
        assert thr > 0

    def test_small_mua_recovers_no_adversary_root(self, naive_post):
        mix = UserMix(0.25, 0.15, 0.5, 0.1)
        ea, thr = design_ea(naive_post, mix, 0.05, iqos=True)
        assert 0.1 <= thr or ea.qos >= ea.extras["beta_o_na"] - 1e-9
        if 0.1 <= min(0.35, thr):
            for r in ea.predicted_limits[FAKE]:
                assert r >= ea.extras["beta_o_na"] - 1e-9
        assert ea.predicted_limits[REAL][-1] <= ea.delta_target + 1e-7

    def test_eh_zeta_exceeds_one_and_respects_target(self):
        rng = make_rng(6)
        count = 0
        for _ in range(30):
            post, mix = random_post(rng), random_mix(rng)
            if mix.mua == 0:
                continue
            delta = rng.uniform(0.03, 0.15)
            try:
                ea, _ = design_ea(post, mix, delta, iqos=True)
                eh = design_eh(post, mix, delta, iqos=True)
            except ValueError:
                continue   # unattainable target for this draw
            if not ea.constraint_ok:
                continue   # the scaled-warning guarantees presume a valid base
            count += 1
            assert eh.zeta > 1.0
            assert eh.predicted_limits[REAL][-1] <= eh.delta_target + 1e-7
            assert eh.qos >= eh.extras["ea_qos"] - 1e-9
        assert count >= 10

    def test_eh2_unique_real_root_at_target(self, naive_post, naive_mix):
        mix = naive_mix(0.2)
        d = design_eh2(naive_post, mix, 0.05, iqos=True)
        assert len(d.predicted_limits[REAL]) == 1
        assert d.predicted_limits[REAL][0] <= d.delta_target + 1e-7
        eo = optimize_eo(naive_post, mix, 0.05, iqos=True)
        assert d.qos >= eo.qos - 1e-9

    def test_design_for_kind_dispatch(self, naive_post, naive_mix):
        mix = naive_mix(0.1)
        for kind in (EO, EA, EH, EH2):
            d = design_for_kind(kind, naive_post, mix, 0.05)
            assert d.kind == kind
        with pytest.raises(ValueError):
            design_for_kind("nope", naive_post, mix, 0.05)


def test_learned_design_handles_large_w(naive_post, naive_mix):
    d = learned_design(8.0, 1.0, naive_post, naive_mix(0.1), 0.05)
    assert d.predicted_limits[FAKE]
    assert d.qos > 0


def test_crowd_signal_required_for_designs(naive_post):
    mix = UserMix(mu0=0.9, mu1=0.1, mu2=0.0, mua=0.0)
    d = MechanismDesign(kind=EO, w=1.0, b=0.1)
    with pytest.raises(ValueError, match="crowd signal"):
        limit_proportions(EO, d, naive_post, mix)


def test_delta_a_value(naive_post, naive_mix):
    mix = naive_mix(0.1)
    expected = 0.05 * (0.65 * 0.4) / (0.65 * 0.4 + 0.1 * 0.55)
    assert delta_a_value(0.05, naive_post, mix) == pytest.approx(expected)
