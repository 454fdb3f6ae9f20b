import math
import statistics

import numpy as np
import pytest

from conftest import DESK_GEOMETRY, map_from_array
from oracles import (
    cohens_d_direct,
    flood_fill_components,
    mann_whitney_u_bruteforce,
    permutation_welch_p,
    t_two_sided_p_quadrature,
)
from retmap.attributes import AttributeKind, AttributeMap
from retmap.errors import (
    DomainMismatchError,
    InsufficientDataError,
    SelectionError,
)
from retmap.geometry import EnFaceDomain
from retmap.grids import cell_mask, etdrs_base_grid, summarize_cell
from retmap.stats import (
    FLAG_ABOVE,
    FLAG_BELOW,
    FLAG_INSIDE,
    FLAG_INVALID,
    ComparisonConfig,
    adjust_pvalues,
    build_control_model,
    compare_gridwise,
    compare_pointwise,
    connected_components,
    deviation_map,
    effect_size,
    extract_significant_regions,
    mann_whitney_u_test,
    measure_region,
    two_sample_test,
    welch_t_test,
)

DOMAIN = DESK_GEOMETRY.enface_domain()


def normal_scores(n: int) -> np.ndarray:
    nd = statistics.NormalDist()
    return np.array([nd.inv_cdf((i - 0.5) / n) for i in range(1, n + 1)])


def _small_domain(w=16, h=12) -> EnFaceDomain:
    return EnFaceDomain(width=w, n_bscans=h, res_lateral=100.0, res_bscan=100.0,
                        fovea_ix=(w - 1) / 2, fovea_iy=(h - 1) / 2, eye="right")


def _maps_from_stack(stack, domain) -> list[AttributeMap]:
    return [
        AttributeMap(layer_id=0, kind=AttributeKind.thickness(), values=v, domain=domain)
        for v in stack
    ]


# --- two-sample tests -----------------------------------------------------------

def test_welch_identical_samples():
    a = [1.0, 2.0, 3.0, 4.0]
    res = welch_t_test(a, list(a))
    assert res.statistic == 0.0
    assert res.p_value == 1.0


def test_welch_swap_antisymmetry():
    rng = np.random.default_rng(5)
    a = rng.normal(0, 1, 6)
    b = rng.normal(1, 2, 9)
    r1 = welch_t_test(a, b)
    r2 = welch_t_test(b, a)
    assert r1.p_value == pytest.approx(r2.p_value, abs=1e-15)
    assert r1.statistic == pytest.approx(-r2.statistic, abs=1e-15)
    assert r1.df == pytest.approx(r2.df, abs=1e-12)


def test_welch_satterthwaite_df_by_hand():
    a = [1.0, 2.0, 3.0, 4.0, 5.0]
    b = [1.0, 1.5, 2.0]
    va = statistics.variance(a) / 5
    vb = statistics.variance(b) / 3
    expected_df = (va + vb) ** 2 / (va**2 / 4 + vb**2 / 2)
    res = welch_t_test(a, b)
    assert res.df == pytest.approx(expected_df, rel=1e-12)
    assert res.statistic == pytest.approx(
        (statistics.mean(a) - statistics.mean(b)) / math.sqrt(va + vb), rel=1e-12
    )
    assert res.p_value == pytest.approx(
        t_two_sided_p_quadrature(res.statistic, res.df), abs=1e-8
    )


def test_welch_zero_variance_conventions():
    res = welch_t_test([2.0, 2.0, 2.0], [2.0, 2.0, 2.0])
    assert res.p_value == 1.0 and res.statistic == 0.0
    res = welch_t_test([3.0, 3.0, 3.0], [2.0, 2.0, 2.0])
    assert res.p_value == 0.0 and res.statistic == math.inf
    res = welch_t_test([1.0, 1.0, 1.0], [2.0, 2.0, 2.0])
    assert res.statistic == -math.inf


def test_welch_against_permutation_oracle():
    # Balanced splits of well-spread pools: the regime where the exhaustive
    # permutation distribution tracks the t reference within 0.01.
    rng = np.random.default_rng(2024)
    scores = normal_scores(16)
    worst = 0.0
    for _ in range(30):
        pool = scores * rng.uniform(0.5, 3.0) + rng.uniform(-5, 5)
        idx = rng.permutation(16)
        a, b = pool[idx[:8]], pool[idx[8:]]
        p = welch_t_test(a, b).p_value
        worst = max(worst, abs(p - permutation_welch_p(a, b)))
    assert worst < 0.01


def test_sample_size_and_finiteness_guards():
    with pytest.raises(InsufficientDataError):
        welch_t_test([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        welch_t_test([1.0, 2.0, np.nan], [1.0, 2.0, 3.0])
    with pytest.raises(InsufficientDataError):
        mann_whitney_u_test([1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        two_sample_test([1, 2, 3], [1, 2, 3], kind="anova")


def test_mann_whitney_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(100):
        na = int(rng.integers(3, 9))
        nb = int(rng.integers(3, 9))
        # Integer-valued samples force plenty of ties.
        a = rng.integers(0, 6, na).astype(float)
        b = rng.integers(0, 6, nb).astype(float)
        res = mann_whitney_u_test(a, b)
        assert res.statistic == pytest.approx(
            mann_whitney_u_bruteforce(a, b), abs=1e-9
        )
        assert 0.0 <= res.p_value <= 1.0


def test_mann_whitney_swap_symmetry():
    rng = np.random.default_rng(13)
    a = rng.normal(0, 1, 7)
    b = rng.normal(0.8, 1, 9)
    r1 = mann_whitney_u_test(a, b)
    r2 = mann_whitney_u_test(b, a)
    assert r1.p_value == pytest.approx(r2.p_value, abs=1e-12)
    assert r1.statistic + r2.statistic == pytest.approx(7 * 9, abs=1e-9)


def test_mann_whitney_all_tied():
    res = mann_whitney_u_test([5.0] * 4, [5.0] * 5)
    assert res.p_value == 1.0


def test_effect_size_examples():
    assert effect_size([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    # Means one pooled SD apart.
    assert effect_size([0.0, 1.0, 2.0], [-1.0, 0.0, 1.0]) == pytest.approx(1.0)
    rng = np.random.default_rng(17)
    for _ in range(50):
        a = rng.normal(0, 2, int(rng.integers(2, 12)))
        b = rng.normal(1, 1, int(rng.integers(2, 12)))
        assert effect_size(a, b) == pytest.approx(cohens_d_direct(a, b), rel=1e-12)
    assert effect_size([3.0, 3.0], [1.0, 1.0]) == math.inf
    assert effect_size([1.0, 1.0], [3.0, 3.0]) == -math.inf
    assert effect_size([2.0, 2.0], [2.0, 2.0]) == 0.0
    with pytest.raises(InsufficientDataError):
        effect_size([1.0], [1.0, 2.0])


# --- p-value adjustment -----------------------------------------------------------

def test_adjust_single_p():
    for method in ("none", "bonferroni", "benjamini_hochberg"):
        assert adjust_pvalues([0.04], method, 0.05).tolist() == [True]


def test_adjust_ten_equal_ps():
    p = [0.04] * 10
    assert adjust_pvalues(p, "none", 0.05).all()
    assert not adjust_pvalues(p, "bonferroni", 0.05).any()
    # BH step-up: p_(10) = 0.04 <= 10/10 * 0.05, so everything passes.
    assert adjust_pvalues(p, "benjamini_hochberg", 0.05).all()


def test_adjust_bh_hand_executed():
    flags = adjust_pvalues([0.001, 0.02, 0.9], "benjamini_hochberg", 0.05)
    assert flags.tolist() == [True, True, False]
    # Order independence.
    flags = adjust_pvalues([0.9, 0.001, 0.02], "benjamini_hochberg", 0.05)
    assert flags.tolist() == [False, True, True]


def test_adjust_bh_alpha_monotone():
    rng = np.random.default_rng(23)
    p = rng.uniform(0, 1, 200)
    low = adjust_pvalues(p, "benjamini_hochberg", 0.01)
    high = adjust_pvalues(p, "benjamini_hochberg", 0.10)
    assert not np.any(low & ~high)


def test_adjust_validates_inputs():
    with pytest.raises(ValueError):
        adjust_pvalues([1.5], "none", 0.05)
    with pytest.raises(ValueError):
        adjust_pvalues([0.5], "holm", 0.05)
    assert adjust_pvalues([], "benjamini_hochberg", 0.05).size == 0


# --- control models ----------------------------------------------------------------

def test_control_model_constant_maps():
    domain = _small_domain()
    maps = _maps_from_stack(np.full((4, 12, 16), 7.0), domain)
    model = build_control_model(maps)
    assert np.allclose(model.mean, 7.0)
    assert np.allclose(model.sd, 0.0)
    assert np.allclose(model.lower, 7.0) and np.allclose(model.upper, 7.0)
    assert model.usable.all()


def test_control_model_arithmetic():
    domain = _small_domain()
    stack = np.stack([np.full((12, 16), v) for v in (10.0, 20.0, 30.0)])
    model = build_control_model(_maps_from_stack(stack, domain))
    assert np.allclose(model.mean, 20.0)
    assert np.allclose(model.sd, 10.0)


def test_control_model_percentiles_match_sampling():
    # One point, 1000 standard-normal control values.
    domain = _small_domain(1, 1)
    rng = np.random.default_rng(31)
    stack = rng.normal(0.0, 1.0, (1000, 1, 1))
    model = build_control_model(_maps_from_stack(stack, domain))
    assert abs(float(model.lower[0, 0]) + 1.96) < 0.15
    assert abs(float(model.upper[0, 0]) - 1.96) < 0.15
    # And against numpy's own percentile on the same draws.
    assert float(model.lower[0, 0]) == pytest.approx(
        float(np.percentile(stack[:, 0, 0], 2.5)), abs=1e-12
    )
    assert float(model.upper[0, 0]) == pytest.approx(
        float(np.percentile(stack[:, 0, 0], 97.5)), abs=1e-12
    )


def test_control_model_requires_three_maps():
    domain = _small_domain()
    maps = _maps_from_stack(np.zeros((2, 12, 16)), domain)
    with pytest.raises(InsufficientDataError):
        build_control_model(maps)


def test_control_model_counts_invalid():
    domain = _small_domain()
    stack = np.full((5, 12, 16), 4.0)
    stack[0:3, 2, 2] = np.nan
    model = build_control_model(_maps_from_stack(stack, domain), min_valid=3)
    assert model.n_valid[2, 2] == 2
    assert not model.usable[2, 2]
    assert model.usable[0, 0]


# --- deviation maps ----------------------------------------------------------------

def _simple_model(domain, mean=10.0, sd=2.0):
    rng = np.random.default_rng(37)
    stack = rng.normal(mean, sd, (400,) + domain.shape)
    return build_control_model(_maps_from_stack(stack, domain))


def test_deviation_of_model_mean_is_zero():
    domain = _small_domain()
    model = _simple_model(domain)
    patient = AttributeMap(layer_id=0, kind=AttributeKind.thickness(),
                           values=model.mean.copy(), domain=domain)
    dev = deviation_map(patient, model)
    assert np.allclose(dev.z, 0.0)
    assert np.all(dev.flags == FLAG_INSIDE)


def test_deviation_two_sd_above():
    domain = _small_domain()
    model = _simple_model(domain)
    patient = AttributeMap(layer_id=0, kind=AttributeKind.thickness(),
                           values=model.mean + 2.0 * model.sd, domain=domain)
    dev = deviation_map(patient, model)
    assert np.allclose(dev.z, 2.0)
    assert np.all((dev.flags == FLAG_ABOVE) | (dev.flags == FLAG_INSIDE))


def test_deviation_zero_sd_sentinels():
    domain = _small_domain(4, 3)
    stack = np.full((3, 3, 4), 5.0)
    model = build_control_model(_maps_from_stack(stack, domain))
    values = np.full((3, 4), 5.0)
    values[0, 0] = 9.0
    values[0, 1] = 1.0
    values[0, 2] = np.nan
    patient = AttributeMap(layer_id=0, kind=AttributeKind.thickness(),
                           values=values, domain=domain)
    dev = deviation_map(patient, model)
    assert dev.z[0, 0] == math.inf and dev.flags[0, 0] == FLAG_ABOVE
    assert dev.z[0, 1] == -math.inf and dev.flags[0, 1] == FLAG_BELOW
    assert math.isnan(dev.z[0, 2]) and dev.flags[0, 2] == FLAG_INVALID
    assert dev.z[1, 1] == 0.0 and dev.flags[1, 1] == FLAG_INSIDE


def test_deviation_inside_fraction_for_null_patient():
    domain = _small_domain(40, 30)
    rng = np.random.default_rng(41)
    stack = rng.normal(10.0, 2.0, (140,) + domain.shape)
    model = build_control_model(_maps_from_stack(stack, domain))
    patient = AttributeMap(layer_id=0, kind=AttributeKind.thickness(),
                           values=rng.normal(10.0, 2.0, domain.shape), domain=domain)
    dev = deviation_map(patient, model)
    inside = float(np.mean(dev.flags == FLAG_INSIDE))
    assert abs(inside - 0.95) < 0.03


def test_deviation_domain_mismatch():
    model = _simple_model(_small_domain())
    patient = AttributeMap(layer_id=0, kind=AttributeKind.thickness(),
                           values=np.zeros((5, 5)), domain=_small_domain(5, 5))
    with pytest.raises(DomainMismatchError):
        deviation_map(patient, model)


# --- group comparisons ----------------------------------------------------------------

def _two_cohorts(domain, n=8, delta=0.0, seed=47, sd=2.0):
    rng = np.random.default_rng(seed)
    base = 30.0
    p = rng.normal(base + delta, sd, (n,) + domain.shape)
    c = rng.normal(base, sd, (n,) + domain.shape)
    return _maps_from_stack(p, domain), _maps_from_stack(c, domain)


def test_compare_pointwise_swap_negates_diff():
    domain = _small_domain()
    pmaps, cmaps = _two_cohorts(domain, delta=1.5)
    cfg = ComparisonConfig(correction="none")
    fwd = compare_pointwise(pmaps, cmaps, cfg)
    rev = compare_pointwise(cmaps, pmaps, cfg)
    assert np.allclose(fwd.diff, -rev.diff, equal_nan=True)
    assert np.allclose(fwd.p, rev.p, equal_nan=True)
    assert np.array_equal(fwd.significant, rev.significant)


def test_compare_pointwise_affine_invariance():
    domain = _small_domain()
    pmaps, cmaps = _two_cohorts(domain, delta=2.0)
    cfg = ComparisonConfig(correction="benjamini_hochberg")
    base = compare_pointwise(pmaps, cmaps, cfg)
    a, b = 3.0, -7.0
    scale = lambda m: AttributeMap(layer_id=m.layer_id, kind=m.kind,
                                   values=a * m.values + b, domain=m.domain)
    scaled = compare_pointwise([scale(m) for m in pmaps], [scale(m) for m in cmaps], cfg)
    assert np.allclose(scaled.diff, a * base.diff, equal_nan=True)
    assert np.allclose(scaled.p, base.p, equal_nan=True, atol=1e-12)
    assert np.allclose(scaled.d, base.d, equal_nan=True, atol=1e-12)
    assert np.array_equal(scaled.significant, base.significant)


def test_compare_pointwise_matches_scalar_welch():
    domain = _small_domain(6, 5)
    pmaps, cmaps = _two_cohorts(domain, delta=1.0, n=6)
    cmp = compare_pointwise(pmaps, cmaps, ComparisonConfig(correction="none"))
    pstack = np.stack([m.values for m in pmaps])
    cstack = np.stack([m.values for m in cmaps])
    for iy in range(domain.n_bscans):
        for ix in range(domain.width):
            res = welch_t_test(pstack[:, iy, ix], cstack[:, iy, ix])
            assert cmp.p[iy, ix] == pytest.approx(res.p_value, abs=1e-12)
            d = effect_size(pstack[:, iy, ix], cstack[:, iy, ix])
            assert cmp.d[iy, ix] == pytest.approx(d, abs=1e-12)


def test_compare_pointwise_mann_whitney_mode():
    domain = _small_domain(5, 4)
    pmaps, cmaps = _two_cohorts(domain, delta=3.0, n=6)
    cmp = compare_pointwise(pmaps, cmaps,
                            ComparisonConfig(test="mann_whitney_u", correction="none"))
    pstack = np.stack([m.values for m in pmaps])
    cstack = np.stack([m.values for m in cmaps])
    res = mann_whitney_u_test(pstack[:, 2, 2], cstack[:, 2, 2])
    assert cmp.p[2, 2] == pytest.approx(res.p_value, abs=1e-12)


def test_compare_pointwise_skips_thin_points():
    domain = _small_domain(6, 5)
    pmaps, cmaps = _two_cohorts(domain, n=4)
    for m in pmaps[:2]:
        m.values[0, 0] = np.nan
    cmp = compare_pointwise(pmaps, cmaps, ComparisonConfig(correction="none"))
    assert not cmp.tested[0, 0]
    assert math.isnan(cmp.p[0, 0]) and math.isnan(cmp.diff[0, 0])
    assert not cmp.significant[0, 0]
    assert cmp.tested[1, 1]


def test_compare_pointwise_group_size_guard():
    domain = _small_domain(4, 4)
    pmaps, cmaps = _two_cohorts(domain, n=3)
    with pytest.raises(InsufficientDataError):
        compare_pointwise(pmaps[:2], cmaps)


def test_compare_gridwise_nine_records(flat_thickness_map):
    rng = np.random.default_rng(53)
    noise = lambda: map_from_array(30.0 + rng.normal(0, 1, DOMAIN.shape))
    pmaps = [noise() for _ in range(4)]
    cmaps = [noise() for _ in range(4)]
    cmp = compare_gridwise(etdrs_base_grid(), pmaps, cmaps,
                           ComparisonConfig(correction="none"))
    assert len(cmp.cells) == 9
    assert all(r.tested for r in cmp.cells)


def test_compare_gridwise_equals_measure_region():
    rng = np.random.default_rng(59)
    pmaps = [map_from_array(32.0 + rng.normal(0, 2, DOMAIN.shape)) for _ in range(5)]
    cmaps = [map_from_array(30.0 + rng.normal(0, 2, DOMAIN.shape)) for _ in range(5)]
    grid = etdrs_base_grid()
    cfg = ComparisonConfig(correction="none")
    cmp = compare_gridwise(grid, pmaps, cmaps, cfg)
    for rec in cmp.cells:
        mask = cell_mask(grid.cells[rec.cell_id], DOMAIN)
        m = measure_region(pmaps, mask, control_maps=cmaps, config=cfg)
        assert rec.n_p == m.n_p and rec.n_c == m.n_c
        assert rec.diff == pytest.approx(m.diff, rel=1e-12)
        assert rec.p == pytest.approx(m.p, abs=1e-12)
        assert rec.d == pytest.approx(m.d, rel=1e-12)


def test_compare_gridwise_unreliable_cells_untested():
    rng = np.random.default_rng(61)
    values = 30.0 + rng.normal(0, 1, (6,) + DOMAIN.shape)
    # Blank out the nasal half-plane: outer-nasal loses its coverage.
    x, _ = np.meshgrid(np.arange(DOMAIN.width), np.arange(DOMAIN.n_bscans))
    for v in values:
        v[x > DOMAIN.fovea_ix + 10] = np.nan
    maps = [map_from_array(v) for v in values]
    cmp = compare_gridwise(etdrs_base_grid(), maps[:3], maps[3:],
                           ComparisonConfig(correction="none"))
    by_id = {r.cell_id: r for r in cmp.cells}
    assert not by_id["outer-nasal"].tested
    assert by_id["outer-temporal"].tested


# --- regions -------------------------------------------------------------------------

def _point_comparison_from_mask(sig_mask, domain):
    diff = np.where(sig_mask, -20.0, 0.0).astype(float)
    p = np.where(sig_mask, 1e-6, 0.5)
    return_map = None
    from retmap.stats import ComparisonMap

    return ComparisonMap(
        mode="point", domain=domain, config=ComparisonConfig(),
        diff=diff, p=p, d=diff / 5.0,
        significant=sig_mask.astype(bool), tested=np.ones(domain.shape, bool),
    )


def test_no_significant_points_yields_empty():
    domain = _small_domain()
    cmp = _point_comparison_from_mask(np.zeros(domain.shape, bool), domain)
    assert extract_significant_regions(cmp) == []


def test_two_disjoint_discs_two_regions():
    domain = DOMAIN
    from retmap.geometry import lattice_positions_mm

    x, y = lattice_positions_mm(domain)
    d1 = (x - 1.5) ** 2 + y**2 <= 0.6**2
    d2 = (x + 1.5) ** 2 + (y - 1.0) ** 2 <= 0.4**2
    cmp = _point_comparison_from_mask(d1 | d2, domain)
    regions = extract_significant_regions(cmp)
    assert len(regions) == 2
    # Largest first; areas close to the analytic disc areas.
    assert regions[0].area_mm2 > regions[1].area_mm2
    assert regions[0].area_mm2 == pytest.approx(math.pi * 0.6**2, rel=0.1)
    assert regions[1].area_mm2 == pytest.approx(math.pi * 0.4**2, rel=0.15)
    assert regions[0].centroid_mm[0] == pytest.approx(1.5, abs=0.05)
    assert regions[0].area_mm2 == regions[0].n_points * domain.pixel_area_mm2
    assert regions[0].mean_diff == pytest.approx(-20.0)
    assert regions[0].min_p == pytest.approx(1e-6)


def test_regions_match_flood_fill_oracle():
    rng = np.random.default_rng(67)
    domain = _small_domain(24, 18)
    mask = rng.random(domain.shape) < 0.3
    cmp = _point_comparison_from_mask(mask, domain)
    regions = extract_significant_regions(cmp)
    oracle = flood_fill_components(mask)
    assert len(regions) == len(oracle)
    lib = {frozenset(map(tuple, r.points.tolist())) for r in regions}
    assert lib == set(oracle)


def test_region_outlines_are_closed_and_cover_boundary():
    domain = _small_domain(20, 20)
    mask = np.zeros(domain.shape, bool)
    mask[5:9, 5:9] = True   # 4x4 block
    mask[6, 6] = True
    cmp = _point_comparison_from_mask(mask, domain)
    region = extract_significant_regions(cmp)[0]
    assert len(region.outlines) == 1
    poly = region.outlines[0]
    # 4x4 block outline: 16 corners (4 per side), closed by construction.
    assert len(poly) == 16
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    # 0.1 mm pixels: block spans 0.4 mm per side.
    assert max(xs) - min(xs) == pytest.approx(0.4)
    assert max(ys) - min(ys) == pytest.approx(0.4)


def test_single_pixel_region_outline():
    domain = _small_domain(8, 8)
    mask = np.zeros(domain.shape, bool)
    mask[3, 4] = True
    cmp = _point_comparison_from_mask(mask, domain)
    region = extract_significant_regions(cmp)[0]
    assert region.n_points == 1
    assert len(region.outlines) == 1
    assert len(region.outlines[0]) == 4


def test_diagonal_pixels_are_one_region():
    domain = _small_domain(8, 8)
    mask = np.zeros(domain.shape, bool)
    mask[2, 2] = True
    mask[3, 3] = True
    cmp = _point_comparison_from_mask(mask, domain)
    regions = extract_significant_regions(cmp)
    assert len(regions) == 1
    assert regions[0].n_points == 2


def test_region_extraction_requires_point_mode():
    from retmap.stats import ComparisonMap

    cmp = ComparisonMap(mode="cell", domain=_small_domain(),
                        config=ComparisonConfig(), cells=())
    with pytest.raises(ValueError):
        extract_significant_regions(cmp)


def test_connected_components_labels_deterministic():
    mask = np.zeros((5, 7), bool)
    mask[0, 0] = mask[4, 6] = mask[2, 3] = True
    comps = connected_components(mask)
    assert [tuple(c[0]) for c in comps] == [(0, 0), (2, 3), (4, 6)]


# --- measurement -----------------------------------------------------------------------

def test_measure_whole_constant_map(flat_thickness_map):
    mask = np.ones(DOMAIN.shape, bool)
    m = measure_region(flat_thickness_map, mask)
    assert m.mean == pytest.approx(30.0, abs=1e-3)
    assert m.sd == pytest.approx(0.0, abs=1e-6)
    assert m.n == DOMAIN.width * DOMAIN.n_bscans
    assert m.area_mm2 == pytest.approx(m.n * DOMAIN.pixel_area_mm2)
    assert m.p is None and m.d is None


def test_measure_cell_matches_cell_summary(noisy_dataset):
    from retmap.attributes import compute_attribute_map

    amap = compute_attribute_map(noisy_dataset, 2, AttributeKind.thickness())
    cell = etdrs_base_grid().cells["outer-nasal"]
    summary = summarize_cell(amap, cell)
    m = measure_region(amap, cell_mask(cell, DOMAIN))
    assert m.n == summary.n_valid
    assert m.mean == pytest.approx(summary.mean, rel=1e-12)
    assert m.sd == pytest.approx(summary.sd, rel=1e-12)
    assert m.vmin == summary.vmin and m.vmax == summary.vmax


def test_measure_with_model_reports_difference():
    domain = _small_domain()
    model = _simple_model(domain, mean=10.0, sd=1.0)
    patient = AttributeMap(layer_id=0, kind=AttributeKind.thickness(),
                           values=model.mean + 3.0, domain=domain)
    mask = np.ones(domain.shape, bool)
    m = measure_region(patient, mask, model=model)
    assert m.diff == pytest.approx(3.0, abs=1e-12)


def test_measure_rejects_bad_masks(flat_thickness_map):
    with pytest.raises(SelectionError):
        measure_region(flat_thickness_map, np.zeros(DOMAIN.shape, bool))
    with pytest.raises(SelectionError):
        measure_region(flat_thickness_map, np.ones((3, 3), bool))


def test_grid_and_map_modes_agree_in_sign_on_fully_significant_cells():
    # A defect larger than the center cell makes that cell's interior fully
    # significant point-wise; the cell-wise difference must share its sign.
    rng = np.random.default_rng(73)
    from retmap.geometry import lattice_positions_mm

    x, y = lattice_positions_mm(DOMAIN)
    disc = x**2 + y**2 <= 0.8**2  # covers the 0.5 mm-radius center cell
    cmaps = [map_from_array(30.0 + rng.normal(0, 1, DOMAIN.shape)) for _ in range(8)]
    pmaps = []
    for _ in range(8):
        v = 30.0 + rng.normal(0, 1, DOMAIN.shape)
        v[disc] -= 15.0
        pmaps.append(map_from_array(v))
    cfg = ComparisonConfig(correction="none")
    pointwise = compare_pointwise(pmaps, cmaps, cfg)
    gridwise = compare_gridwise(etdrs_base_grid(), pmaps, cmaps, cfg)
    by_id = {r.cell_id: r for r in gridwise.cells}
    checked = 0
    for cid, rec in by_id.items():
        mask = cell_mask(etdrs_base_grid().cells[cid], DOMAIN)
        if not rec.tested or not mask.any():
            continue
        if not pointwise.significant[mask].all():
            continue
        checked += 1
        assert np.sign(rec.diff) == np.sign(np.mean(pointwise.diff[mask]))
    assert checked >= 1  # the center cell qualifies by construction
