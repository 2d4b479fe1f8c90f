import math

import numpy as np
import pytest
from scipy.optimize import brentq

from mqubit.core_maps import Outcome, apply_kraus, build_params, gc_probability, gc_state, kraus_matrices, theta_map
from mqubit.master_equation import bin_index
from mqubit.special_cases import (
    AnalyticADF,
    NotDoubleProjective,
    NotProjective,
    NotShiftCase,
    Variant,
    classify,
    double_projective_adf,
    find_double_projective_point,
    find_projective_point,
    gamma_zero_adf,
    null_probability,
    period2_adf,
    period2_binomial_distribution,
    projective_series_adf,
    projective_series_peaks,
    shift_properties,
)

from conftest import circ_dist


class TestClassify:
    def test_frozen_by_construction(self):
        p = build_params(2.0, 2 * math.pi / math.sqrt(8.0), 1.0)
        tag = classify(p)
        assert tag.variant == Variant.FROZEN and tag.index == 1

    def test_shift_by_construction(self):
        tag = classify(build_params(1.0, math.pi, 1.0))
        assert tag.variant == Variant.SHIFT and tag.index == 1

    def test_period2_by_construction(self):
        tag = classify(build_params(1.0, math.pi / math.sqrt(5.0), 1.0))
        assert tag.variant == Variant.PERIOD2 and tag.index == 0

    def test_gamma_zero(self):
        assert classify(build_params(1.0, 1.0, 0.0)).variant == Variant.GAMMA_ZERO

    def test_generic(self):
        tag = classify(build_params(2.92, 3.0, 1.0))
        assert tag.variant == Variant.GENERIC
        assert all(d > 1e-3 for d in tag.distances.values())

    def test_double_projective_consistency(self):
        p = find_double_projective_point(l=2)
        tag = classify(p)
        assert tag.variant == Variant.DOUBLE_PROJECTIVE
        assert tag.distances["projective_minus"] < 1e-9
        assert tag.distances["projective_plus"] < 1e-9
        # both projectors force MT onto pi/2 + pi*l
        assert math.cos(p.M * p.T) == pytest.approx(0.0, abs=1e-9)


class TestGammaZero:
    def test_pole_weights(self):
        adf = gamma_zero_adf(0.0)
        assert dict(adf.peaks)[0.0] == pytest.approx(1.0)
        adf = gamma_zero_adf(math.pi / 2.0)
        w = dict(adf.peaks)
        assert w[0.0] == pytest.approx(0.5)
        assert w[-math.pi] == pytest.approx(0.5)

    def test_frozen_subcase_preserves_input(self):
        adf = gamma_zero_adf(0.8, mt=math.pi)
        assert adf.preserving
        assert adf.peaks[0][0] == pytest.approx(0.8, abs=1e-12)
        assert adf.peaks[0][1] == 1.0

    def test_null_probability_limits(self):
        assert null_probability(0.7, 1.0, 0) == pytest.approx(1.0)
        inf_limit = math.sin(0.35) ** 2
        assert null_probability(0.7, 1.0, 4000) == pytest.approx(inf_limit, abs=1e-12)

    def test_null_probability_against_chained_born(self):
        # product of per-step no-click probabilities along the null record
        theta0, mt, length = 0.7, 1.0, 10
        p = build_params(mt, 1.0, 0.0)
        st = gc_state(theta0)
        product = 1.0
        for _ in range(length):
            st, prob = apply_kraus(st, Outcome.NO_CLICK, p)
            product *= prob
        assert product == pytest.approx(null_probability(theta0, mt, length), abs=1e-12)


class TestPeriod2:
    def test_adf_weights(self):
        adf = period2_adf()
        assert sorted(adf.peaks) == [(-math.pi / 2.0, 0.5), (math.pi / 2.0, 0.5)]

    def test_limit_cycle_of_the_maps(self, period2_params):
        for mu in (Outcome.NO_CLICK, Outcome.CLICK):
            for s in (1.0, -1.0):
                out = float(theta_map(s * math.pi / 2.0, mu, period2_params))
                assert circ_dist(out, -s * math.pi / 2.0) < 1e-9

    def test_binomial_row(self, period2_params):
        w = period2_binomial_distribution(2, 0.3, period2_params, bins=4000)
        nz = np.nonzero(w.pr)[0]
        weights = sorted(w.pr[nz], reverse=True)
        assert weights[0] == pytest.approx(0.5)
        assert weights[1] == pytest.approx(0.25)
        assert weights[2] == pytest.approx(0.25)
        assert w.pr.sum() == pytest.approx(1.0, abs=1e-15)

    def test_central_mass_vanishes(self, period2_params):
        # weight away from +-pi/2 shrinks as the walk spreads
        masses = []
        for n_t in (8, 32, 128):
            w = period2_binomial_distribution(n_t, 0.3, period2_params, bins=2000)
            c = w.centers()
            central = (np.abs(circ_dist(c, math.pi / 2)) > 0.2) & (
                np.abs(circ_dist(c, -math.pi / 2)) > 0.2
            )
            masses.append(w.pr[central].sum())
        assert masses[0] > masses[1] > masses[2]
        assert masses[2] < 0.15

    def test_rejects_wrong_parameters(self):
        with pytest.raises(ValueError):
            period2_binomial_distribution(4, 0.3, build_params(2.92, 3.0, 1.0))


class TestProjectiveSeries:
    def test_satellite_decay_is_click_probability(self):
        p = find_projective_point(2.92, Outcome.NO_CLICK, t_bracket=(2.2, 2.7))
        adf = projective_series_peaks(p, n_terms=12)
        thetas = [t for t, _ in adf.peaks]
        weights = [w for _, w in adf.peaks]
        for n in range(len(weights) - 1):
            expect = float(gc_probability(thetas[n], Outcome.CLICK, p))
            assert weights[n + 1] / weights[n] == pytest.approx(expect, rel=1e-12)
            assert expect < 1.0

    def test_truncation_tail_bound(self):
        p = find_projective_point(2.92, Outcome.NO_CLICK, t_bracket=(2.2, 2.7))
        peaks = projective_series_peaks(p, n_terms=20).peaks
        max_click = max(
            float(gc_probability(t, Outcome.CLICK, p)) for t, _ in peaks
        )
        dropped = peaks[-1][1] * max_click / (1.0 - max_click)
        assert dropped < max_click**10  # geometric tail is tiny at 20 terms

    def test_fixed_point_of_exact_master_step(self):
        # push the truncated delta series through one exact ME step; the
        # residual is bounded by the truncated tail mass
        p = find_projective_point(2.92, Outcome.NO_CLICK, t_bracket=(2.2, 2.7))
        n_terms = 20
        adf = projective_series_peaks(p, n_terms=n_terms)
        bins = 2000
        before = adf.to_distribution(bins)
        pushed = np.zeros(bins)
        for theta, weight in adf.peaks:
            for mu in (Outcome.NO_CLICK, Outcome.CLICK):
                prob = float(gc_probability(theta, mu, p))
                if prob <= 0.0:
                    continue
                img = float(theta_map(theta, mu, p))
                pushed[bin_index(img, bins)] += weight * prob
        tail = adf.peaks[-1][1]
        assert np.abs(pushed - before.pr).sum() < 4 * tail + 1e-12

    def test_requires_exactly_one_projector(self):
        with pytest.raises(NotProjective):
            projective_series_peaks(build_params(2.92, 3.0, 1.0))
        with pytest.raises(NotProjective):
            projective_series_peaks(find_double_projective_point(l=2))

    def test_binned_distribution_normalized(self):
        p = find_projective_point(2.92, Outcome.NO_CLICK, t_bracket=(2.2, 2.7))
        w = projective_series_adf(p, bins=1000)
        assert w.pr.sum() == pytest.approx(1.0, abs=1e-12)

    def test_click_projector_side(self):
        p = find_projective_point(2.92, Outcome.CLICK, t_bracket=(1.85, 2.1))
        adf = projective_series_peaks(p, n_terms=10)
        assert adf.peaks[0][1] > 0
        # satellites now decay with the no-click probability
        t0, t1 = adf.peaks[0][0], adf.peaks[1][0]
        assert adf.peaks[1][1] / adf.peaks[0][1] == pytest.approx(
            float(gc_probability(t0, Outcome.NO_CLICK, p)), rel=1e-12
        )
        assert circ_dist(t1, float(theta_map(t0, Outcome.NO_CLICK, p))) < 1e-12


class TestDoubleProjective:
    def test_equal_weights_and_cross_probability(self):
        p = find_double_projective_point(l=2)
        adf, cross = double_projective_adf(p)
        assert [w for _, w in adf.peaks] == [0.5, 0.5]
        assert cross == pytest.approx(1.0 - 2.0 * p.cY**2, abs=1e-14)
        th_plus, th_minus = adf.peaks[0][0], adf.peaks[1][0]
        assert float(gc_probability(th_plus, Outcome.NO_CLICK, p)) == pytest.approx(
            cross, abs=1e-10
        )
        assert float(gc_probability(th_minus, Outcome.CLICK, p)) == pytest.approx(
            cross, abs=1e-10
        )

    def test_mc_mass_balance(self):
        from mqubit.trajectory_mc import TrajectoryConfig, simulate

        p = find_double_projective_point(l=2)
        adf, _ = double_projective_adf(p)
        res = simulate(
            TrajectoryConfig(n_steps=100_000, seed=77, initial_state=gc_state(0.3), bins=2000),
            p,
        )
        c = res.histogram.centers()
        for theta, weight in adf.peaks:
            mass = res.histogram.pr[circ_dist(c, theta) < 0.05].sum()
            assert mass == pytest.approx(weight, abs=0.03)

    def test_rejects_single_projective(self):
        p = find_projective_point(2.92, Outcome.NO_CLICK, t_bracket=(2.2, 2.7))
        with pytest.raises(NotDoubleProjective):
            double_projective_adf(p)


class TestShift:
    def test_state_independent_probability(self, shift_params):
        p = shift_params
        expect = (p.M / p.Y) ** 2 * p.sY**2
        thetas = np.linspace(-3, 3, 11)
        got = np.asarray(gc_probability(thetas, Outcome.NO_CLICK, p))
        assert np.abs(got - expect).max() < 1e-12

    def test_incommensurate_generic(self, shift_params):
        props = shift_properties(shift_params)
        assert not props.commensurate

    def test_commensurate_root_found(self):
        # tune M (at MT = pi) until the shift angle is exactly -2*pi/3
        def angle_minus_target(m):
            p = build_params(m, math.pi / m, 1.0)
            return shift_properties(p).shift_angle + 2.0 * math.pi / 3.0

        m_star = brentq(angle_minus_target, 2.8, 3.3, xtol=1e-14)
        p = build_params(m_star, math.pi / m_star, 1.0)
        props = shift_properties(p)
        assert props.commensurate
        assert (props.numerator, props.denominator) == (-2, 3)
        # commensurate shift: the click orbit of any angle is finite (period 3 here)
        theta = 0.4
        orbit = theta
        for _ in range(3):
            orbit = float(theta_map(orbit, Outcome.CLICK, p))
        assert circ_dist(orbit, theta + 3 * 2 * props.shift_angle) < 1e-9

    def test_not_shift_rejected(self):
        with pytest.raises(NotShiftCase):
            shift_properties(build_params(2.92, 3.0, 1.0))


class TestAnalyticADF:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            AnalyticADF(peaks=[(0.0, 0.7)])

    def test_binning(self):
        adf = AnalyticADF(peaks=[(0.0, 0.25), (1.0, 0.75)])
        w = adf.to_distribution(100)
        assert w.pr.sum() == pytest.approx(1.0)
        assert (w.pr > 0).sum() == 2

    def test_json(self):
        adf = period2_adf()
        js = adf.to_json()
        assert js[0].keys() == {"theta", "weight"}
