import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import published_model, recovery_config, recovery_errors
from erpaffect import irt, synth
from erpaffect.irt import CategoryMap, GrmModel


def model(slope, thresholds, used=None, rater="r", scale="pleasant"):
    used = tuple(range(1, len(thresholds) + 2)) if used is None else used
    return GrmModel(rater, scale, slope, tuple(thresholds), used)


def sample_grades(models, latent, seed):
    rng = np.random.default_rng(seed)
    cols = []
    for m in models:
        p = irt.crc(m, latent)
        u = rng.random(len(latent))[:, None]
        k = (u > np.cumsum(p, axis=1)).sum(axis=1)
        cols.append(np.asarray(m.used_categories)[np.minimum(k, m.n_categories - 1)])
    return np.column_stack(cols)


@st.composite
def grm_models(draw, max_k=9):
    k = draw(st.integers(2, max_k))
    slope = draw(st.floats(0.2, 12.0))
    start = draw(st.floats(-3.0, 1.0))
    gaps = draw(st.lists(st.floats(0.02, 1.2), min_size=k - 2, max_size=k - 2))
    th = start + np.concatenate([[0.0], np.cumsum(gaps)])
    return model(slope, th)


class TestGrmModel:
    def test_validation(self):
        with pytest.raises(ValueError, match="slope"):
            model(0.0, [0.0, 1.0])
        with pytest.raises(ValueError, match="increasing"):
            model(1.0, [0.5, 0.5])
        with pytest.raises(ValueError, match="exactly one threshold"):
            GrmModel("r", "pleasant", 1.0, (0.0, 1.0), (1, 2))

    def test_threshold_labels_follow_unused_grades(self):
        m = published_model("sub2")
        assert m.used_categories == (1, 2, 3, 4, 5, 8, 9)
        assert m.threshold_labels == (1, 2, 3, 4, 7, 8)

    def test_quadrature_integrates_moments(self):
        x, w = irt.quadrature(41)
        assert w.sum() == pytest.approx(1.0, abs=1e-14)
        assert w @ x == pytest.approx(0.0, abs=1e-13)
        assert w @ x**2 == pytest.approx(1.0, abs=1e-12)
        assert w @ x**4 == pytest.approx(3.0, abs=1e-10)


class TestOcc:
    def test_half_at_threshold(self):
        m = model(3.0, [-1.0, 0.2, 1.5])
        for i, t in enumerate(m.thresholds):
            assert irt.occ(m, t)[i] == 0.5

    def test_saturation(self):
        m = model(3.0, [-1.0, 0.2, 1.5])
        np.testing.assert_allclose(irt.occ(m, 10.0), 1.0, atol=1e-9)
        np.testing.assert_allclose(irt.occ(m, -10.0), 0.0, atol=1e-9)

    def test_published_row_decreasing(self):
        p = irt.occ(published_model("sub2"), 0.0)
        assert np.all(np.diff(p) < 0)
        assert np.all((p > 0) & (p < 1))


class TestCrc:
    def test_published_low_slope_is_flat(self):
        m = published_model("sub2", "arousal")
        assert m.slope == 1.18
        p = irt.crc(m, np.linspace(-4, 4, 2001))
        # end categories rise monotonically towards 1, so only interior peaks are bounded
        assert np.all(p[:, 1:-1].max(axis=0) < 0.6)
        assert np.all(np.diff(p[:, 0]) < 0) and np.all(np.diff(p[:, -1]) > 0)

    @pytest.mark.parametrize("i", range(1, 4))
    def test_sharp_curve_midway(self, i):
        m = model(8.0, [-1.5, -0.5, 0.5, 1.5])
        x = (m.thresholds[i - 1] + m.thresholds[i]) / 2
        assert irt.crc(m, x)[i] > 0.95

    def test_matches_occ_differences(self):
        m = published_model("sub5")
        x = np.linspace(-3, 3, 61)
        p = irt.occ(m, x)
        expected = np.column_stack([1 - p[:, 0], p[:, :-1] - p[:, 1:], p[:, -1]])
        np.testing.assert_allclose(irt.crc(m, x), expected, atol=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(grm_models(), st.floats(-8, 8))
    def test_probabilities(self, m, x):
        p = irt.crc(m, x)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(grm_models(), st.floats(-8, 8))
    def test_occ_strictly_decreasing(self, m, x):
        p, q = irt.occ(m, x), irt.occ_complement(m, x)
        # compare in whichever tail keeps precision
        assert np.all((np.diff(p) < 0) | (np.diff(q) > 0))

    def test_category_index_maps_unused_grades_down(self):
        m = published_model("sub2")
        assert irt.category_index(m, 6) == irt.category_index(m, 5) == 4
        assert irt.category_index(m, 8) == 5


@pytest.fixture(scope="module")
def recovery():
    truth = [model(s, th, rater=f"sub{k + 1}") for k, (s, th) in enumerate(
        [(2.0, [-1.5, -0.5, 0.5, 1.5]), (3.0, [-1.0, 0.0, 1.0]), (1.5, [-2.0, -0.8, 0.3, 1.2, 2.0]),
         (2.5, [-1.2, -0.3, 0.6])])]
    latent = np.random.default_rng(7).standard_normal(500)
    grades = sample_grades(truth, latent, seed=8)
    return truth, grades, irt.fit_grm_em(grades, [m.rater_id for m in truth])


class TestFitGrm:

    def test_recovers_parameters(self, recovery):
        truth, _, fit = recovery
        for t, m in zip(truth, fit.models):
            # four standard errors is a loose sampling band
            assert abs(m.slope - t.slope) < 4 * m.std_errors[0]
            assert np.all(np.abs(m.thresholds - t.thresholds) < 4 * m.std_errors[1:])

    def test_consistent_at_large_n(self):
        # 500 items leave a 7% slope SE; at 4000 the acceptance tolerances hold comfortably
        cfg = recovery_config(4000, seed=0)
        ratings, _ = synth.gen_ratings(cfg)
        fit = irt.fit_grm_em(ratings.pleasant, ratings.raters, compute_se=False)
        slope, th = recovery_errors(synth.true_models(cfg, "pleasant"), fit.models)
        assert slope <= 0.10 and th <= 0.15

    def test_loglik_nondecreasing(self, recovery):
        _, _, fit = recovery
        assert fit.converged
        assert np.all(np.diff(fit.loglik_history) >= -1e-8)

    def test_loglik_matches_marginal(self, recovery):
        _, grades, fit = recovery
        assert irt.marginal_loglik(fit.models, grades) == pytest.approx(fit.loglik_history[-1], abs=1e-6)

    def test_marginal_loglik_against_adaptive_integration(self):
        ms = [model(2.0, [-1.0, 0.0, 1.0]), model(1.2, [-0.5, 0.7])]
        y = np.array([[2, 3], [4, 1], [1, 1]])
        total = 0.0
        for row in y:
            def f(x):
                return np.prod([irt.crc(m, x)[irt.category_index(m, g)] for m, g in zip(ms, row)]) * stats.norm.pdf(x)
            total += np.log(integrate.quad(f, -12, 12, epsabs=1e-13, limit=200)[0])
        assert irt.marginal_loglik(ms, y, n_nodes=81) == pytest.approx(total, abs=1e-6)

    def test_unused_grade_dropped(self):
        truth = [model(2.5, [-1.2, -0.4, 0.4, 1.2]), model(2.0, [-1.0, 0.0, 1.0])]
        latent = np.random.default_rng(1).standard_normal(200)
        grades = sample_grades(truth, latent, 2)
        grades[:, 0] = np.where(grades[:, 0] == 4, 5, grades[:, 0])  # rater never uses 4
        grades[:, 0] = np.where(grades[:, 0] >= 5, grades[:, 0] + 3, grades[:, 0])  # 5 -> 8
        fit = irt.fit_grm_em(grades, ["a", "b"], compute_se=False)
        m = fit.models[0]
        assert 4 not in m.used_categories
        assert 8 in m.used_categories and 9 not in m.used_categories
        assert m.threshold_labels[-1] == 7

    def test_missing_top_grade_has_no_threshold(self):
        truth = [model(3.0, np.linspace(-1.6, 1.6, 8)) for _ in range(3)]
        latent = np.random.default_rng(2).standard_normal(300)
        grades = sample_grades(truth, latent, 3)
        grades[grades[:, 0] == 8, 0] = 7
        fit = irt.fit_grm_em(grades, ["a", "b", "c"], compute_se=False)
        m = fit.models[0]
        assert 8 not in m.used_categories
        assert 7 not in m.threshold_labels  # th_7 would sit below the unused grade 8
        assert m.threshold_labels[-1] == 8

    def test_degenerate_rater(self):
        grades = np.column_stack([np.full(30, 5), np.tile([1, 2, 3], 10)])
        with pytest.raises(irt.DegenerateRaterError, match="single grade"):
            irt.fit_grm_em(grades, ["a", "b"])

    def test_too_few_items(self):
        with pytest.raises(ValueError, match="at least 20"):
            irt.fit_grm_em(np.ones((10, 2), dtype=int), ["a", "b"])

    def test_non_convergence_flagged(self):
        truth = [model(2.0, [-1.0, 0.0, 1.0]) for _ in range(3)]
        grades = sample_grades(truth, np.random.default_rng(4).standard_normal(100), 5)
        with pytest.warns(RuntimeWarning, match="did not converge"):
            fit = irt.fit_grm_em(grades, ["a", "b", "c"], max_em_iter=2, compute_se=False)
        assert not fit.converged
        assert all(not m.converged for m in fit.models)

    def test_slope_bounded_for_perfect_rater(self):
        latent = np.random.default_rng(5).standard_normal(60)
        perfect = np.digitize(latent, [-1.0, 0.0, 1.0]) + 1
        noisy = sample_grades([model(1.5, [-1.0, 0.0, 1.0])] * 2, latent, 6)
        grades = np.column_stack([perfect, perfect, noisy])
        fit = irt.fit_grm_em(grades, ["a", "b", "c", "d"], compute_se=False, max_slope=20.0)
        assert max(m.slope for m in fit.models) <= 20.0 + 1e-12
        assert np.all(np.diff(fit.loglik_history) >= -1e-8)

    def test_fit_grm_on_rating_matrix(self, default_study):
        _, ratings, _ = default_study
        models = irt.fit_grm(ratings, "pleasant", compute_se=False)
        assert [m.rater_id for m in models] == list(ratings.raters)
        assert all(m.scale == "pleasant" for m in models)


class TestWald:
    def test_zero_estimate(self):
        m = GrmModel("r", "pleasant", 2.0, (0.0, 1.0), (1, 2, 3), std_errors=(0.5, 1.0, 0.2))
        res = irt.wald_significance(m)
        assert res.p_values[1] == pytest.approx(1.0)
        assert res.not_significant[1] is True

    def test_p_value_formula(self):
        m = GrmModel("r", "pleasant", 2.0, (-0.3, 1.0), (1, 2, 3), std_errors=(0.5, 0.2, 0.4))
        res = irt.wald_significance(m)
        assert res.p_values[1] == pytest.approx(2 * stats.norm.sf(1.5), rel=1e-12)
        assert res.labels == ("slope", "th_1", "th_2")

    def test_unavailable_se(self):
        m = GrmModel("r", "pleasant", 2.0, (0.0, 1.0), (1, 2, 3), std_errors=(np.nan, np.nan, np.nan))
        res = irt.wald_significance(m)
        assert res.p_values == (None, None, None)
        assert res.not_significant == (None, None, None)

    def test_large_sample_all_significant(self):
        truth = [model(s, th) for s, th in [(2.0, [-1.5, -0.6, 0.6, 1.5]), (2.5, [-1.2, -0.4, 0.5, 1.4]),
                                            (1.8, [-1.6, -0.5, 0.7, 1.6])]]
        grades = sample_grades(truth, np.random.default_rng(9).standard_normal(500), 10)
        fit = irt.fit_grm_em(grades, ["a", "b", "c"])
        for m in fit.models:
            assert all(p < 0.10 for p in irt.wald_significance(m).p_values)

    def test_coincident_thresholds_flagged(self):
        truth = [model(3.0, [-1.0, -0.025, 0.025, 1.0]) for _ in range(6)]
        grades = sample_grades(truth, np.random.default_rng(12).standard_normal(56), 13)
        fit = irt.fit_grm_em(grades, [f"s{k}" for k in range(6)])
        flags = [f for m in fit.models for f in irt.wald_significance(m).not_significant]
        assert any(f is True for f in flags)

    def test_singular_information(self):
        # two raters with identical perfect separation: slopes run to the cap and the Hessian degenerates
        latent = np.linspace(-2, 2, 40)
        g = np.digitize(latent, [0.0]) + 1
        fit = irt.fit_grm_em(np.column_stack([g, g]), ["a", "b"])
        for m in fit.models:
            res = irt.wald_significance(m)
            assert all(p is None or 0 <= p <= 1 for p in res.p_values)


class TestEap:
    def test_middle_category_near_zero(self):
        ms = [model(s, [-1.5, -0.5, 0.5, 1.5], rater=f"r{k}") for k, s in enumerate([1.5, 2.5, 3.0, 4.0])]
        score = irt.eap_score(ms, {m.rater_id: 3 for m in ms}, "7")
        assert abs(score.value) < 0.2
        assert score.posterior_sd > 0
        assert score.item_id == "7"

    def test_monotone_in_one_grade(self):
        ms = [published_model(f"sub{k}") for k in range(1, 7)]
        base = {m.rater_id: 5 for m in ms}
        prev = irt.eap_score(ms, base).value
        for g in (8, 9):  # sub2's used grades above 5
            resp = dict(base, sub2=g)
            now = irt.eap_score(ms, resp).value
            assert now > prev
            prev = now

    def test_against_adaptive_integration(self):
        ms = [published_model("sub1"), published_model("sub3")]
        resp = {"sub1": 4, "sub3": 6}

        def lik(x):
            return np.prod([irt.crc(m, x)[irt.category_index(m, resp[m.rater_id])] for m in ms]) * stats.norm.pdf(x)

        z = integrate.quad(lik, -10, 10, epsabs=1e-14, limit=400, points=[0.0])[0]
        mean = integrate.quad(lambda x: x * lik(x), -10, 10, epsabs=1e-14, limit=400, points=[0.0])[0] / z
        s = irt.eap_score(ms, resp, n_nodes=161)
        assert s.value == pytest.approx(mean, abs=2e-3)

    def test_empty_responses(self):
        with pytest.raises(ValueError, match="no responses"):
            irt.eap_score([published_model("sub1")], {})

    def test_unknown_rater(self):
        with pytest.raises(KeyError, match="sub9"):
            irt.eap_score([published_model("sub1")], {"sub9": 3})

    def test_recovers_latents(self):
        truth = [model(3.0 + 0.2 * k, np.linspace(-1.6, 1.6, 8) + 0.05 * k, rater=f"s{k}") for k in range(6)]
        latent = np.random.default_rng(21).standard_normal(56)
        grades = sample_grades(truth, latent, 22)
        fit = irt.fit_grm_em(grades, [m.rater_id for m in truth], compute_se=False)
        x_hat, sd = irt.eap_scores(fit.models, grades)
        assert np.corrcoef(x_hat, latent)[0, 1] >= 0.9
        assert np.all(sd > 0)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(1, 9), min_size=6, max_size=6), st.integers(0, 5))
    def test_monotone_property(self, grades, who):
        ms = [model(3.0, np.linspace(-1.6, 1.6, 8), rater=f"s{k}") for k in range(6)]
        if grades[who] == 9:
            return
        lo = irt.eap_score(ms, {m.rater_id: g for m, g in zip(ms, grades)}).value
        up = list(grades)
        up[who] += 1
        hi = irt.eap_score(ms, {m.rater_id: g for m, g in zip(ms, up)}).value
        assert hi > lo


class TestCollapse:
    def test_equal_masses_tie_rule(self):
        assert irt.merge_adjacent([0.25] * 4, 3) == [[0, 1], [2], [3]]
        assert irt.merge_adjacent([0.25] * 4, 2) == [[0, 1], [2, 3]]

    def test_small_blocks_merge_first(self):
        blocks = irt.merge_adjacent([0.05, 0.45, 0.45, 0.05], 3)
        assert blocks == [[0, 1], [2], [3]]

    def test_symmetric_model_deterministic(self):
        m = model(2.0, np.linspace(-2.0, 2.0, 8))
        a, b = irt.collapse_scale(m), irt.collapse_scale(m)
        assert a.cuts == b.cuts and len(a.cuts) == 3

    def test_low_mass_grade_merges_before_heavy_pairs(self):
        m = published_model("sub2")
        masses = irt.category_masses(m)
        g2 = m.used_categories.index(2)
        assert masses[g2] == min(masses[:5])
        heavy = {m.used_categories.index(g) for g in (3, 4, 5)}
        for target in range(len(masses) - 1, 3, -1):
            blocks = irt.merge_adjacent(masses, target)
            joined = next(b for b in blocks if g2 in b)
            if len(joined) > 1:
                break
            assert all(len(set(b) & heavy) < 2 for b in blocks)
        # the greedy smallest-pair rule pairs grade 2 with grade 1, its lighter neighbour
        assert joined == [0, g2]
        assert irt.collapse_scale(m).blocks[0] == (1, 2)

    def test_masses_sum_to_one(self):
        for k in range(1, 7):
            assert irt.category_masses(published_model(f"sub{k}")).sum() == pytest.approx(1.0, abs=1e-12)

    def test_target_bounds(self):
        m = model(2.0, [-1.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            irt.collapse_scale(m, 1)
        with pytest.raises(ValueError):
            irt.collapse_scale(m, 5)

    def test_relabelling_invariance(self):
        truth = [model(2.5, [-1.2, -0.3, 0.6, 1.5], rater=f"s{k}") for k in range(4)]
        grades = sample_grades(truth, np.random.default_rng(30).standard_normal(150), 31)
        relabel = np.array([0, 1, 3, 4, 7, 9])  # 1->1, 2->3, 3->4, 4->7, 5->9
        fa = irt.fit_grm_em(grades, [m.rater_id for m in truth], compute_se=False)
        fb = irt.fit_grm_em(relabel[grades], [m.rater_id for m in truth], compute_se=False)
        for ma, mb in zip(fa.models, fb.models):
            ca, cb = irt.collapse_scale(ma, 3), irt.collapse_scale(mb, 3)
            assert [[relabel[g] for g in blk] for blk in ca.blocks] == [list(b) for b in cb.blocks]


class TestApplyMap:
    cmap = CategoryMap("sub1", "pleasant", (2, 5, 7))

    def test_edges(self):
        assert irt.apply_map(self.cmap, 1) == 1
        assert irt.apply_map(self.cmap, 2) == 1
        assert irt.apply_map(self.cmap, 3) == 2
        assert irt.apply_map(self.cmap, 9) == 4

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            irt.apply_map(self.cmap, 0)
        with pytest.raises(ValueError):
            irt.apply_map(self.cmap, 10)

    def test_monotone_total(self):
        levels = irt.apply_map(self.cmap, np.arange(1, 10))
        assert np.all(np.diff(levels) >= 0)
        assert set(levels.tolist()) == {1, 2, 3, 4}

    def test_marginals_of_converted_fixture(self):
        # grade counts chosen so that cuts (2, 5, 7) give the published converted totals
        counts = {1: 20, 2: 23, 3: 60, 4: 70, 5: 53, 6: 30, 7: 31, 8: 25, 9: 24}
        grades = np.repeat(list(counts), list(counts.values()))
        levels = irt.apply_map(self.cmap, grades)
        assert np.bincount(levels, minlength=5)[1:].tolist() == [43, 183, 61, 49]
        assert len(grades) == 336

    def test_cut_validation(self):
        with pytest.raises(ValueError):
            CategoryMap("s", "pleasant", (5, 2, 7))

    def test_round_trip(self):
        assert CategoryMap.from_dict(self.cmap.to_dict()) == self.cmap
