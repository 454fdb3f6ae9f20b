"""Normative models, deviation maps, group tests, and significant regions.

Two test families are provided: Welch's t (default, robust to unequal
variances) and the Mann-Whitney U with tie-corrected normal
approximation.  Effect sizes are Cohen's d with pooled SD.  Multiple
testing is handled by none / Bonferroni / Benjamini-Hochberg, always
echoed in the output config.

Zero-variance situations produce signed infinite sentinels with explicit
flags instead of NaN propagation; untested lattice points are NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attributes import AttributeMap
from .errors import DomainMismatchError, InsufficientDataError, SelectionError
from .geometry import EnFaceDomain, enface_to_physical
from .grids import (
    COVERAGE_THRESHOLD,
    RELIABLE_MIN_VALID,
    AdaptiveGrid,
    cell_mask,
)
from .special import normal_two_sided_p, student_t_two_sided_p

WELCH_T = "welch_t"
MANN_WHITNEY_U = "mann_whitney_u"
TEST_KINDS = (WELCH_T, MANN_WHITNEY_U)

CORRECTIONS = ("none", "bonferroni", "benjamini_hochberg")

FLAG_BELOW = -1
FLAG_INSIDE = 0
FLAG_ABOVE = 1
FLAG_INVALID = -128


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: float | None
    p_value: float
    kind: str


@dataclass(frozen=True)
class ComparisonConfig:
    test: str = WELCH_T
    alpha: float = 0.05
    correction: str = "benjamini_hochberg"
    min_group: int = 3

    def __post_init__(self):
        if self.test not in TEST_KINDS:
            raise ValueError(f"unknown test {self.test!r}")
        if self.correction not in CORRECTIONS:
            raise ValueError(f"unknown correction {self.correction!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


def _as_sample(values, minimum: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size < minimum:
        raise InsufficientDataError(
            f"sample {name} has {arr.size} values, needs at least {minimum}"
        )
    if not np.isfinite(arr).all():
        raise ValueError(f"sample {name} contains non-finite values")
    return arr


def welch_t_test(a, b) -> TestResult:
    """Welch's unequal-variance t test, two-sided.

    Degrees of freedom by Welch-Satterthwaite; the tail probability comes
    from the regularized incomplete beta.  Both samples having zero
    variance gives p = 1 for equal means and a signed infinite statistic
    with p = 0 otherwise.
    """
    a = _as_sample(a, 3, "a")
    b = _as_sample(b, 3, "b")
    na, nb = a.size, b.size
    ma, mb = a.mean(), b.mean()
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    sa = va / na
    sb = vb / nb
    se2 = sa + sb
    if se2 == 0.0:
        df = float(na + nb - 2)
        if ma == mb:
            return TestResult(0.0, df, 1.0, WELCH_T)
        return TestResult(math.copysign(math.inf, ma - mb), df, 0.0, WELCH_T)
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    p = student_t_two_sided_p(t, df)
    return TestResult(float(t), float(df), float(p), WELCH_T)


def _ranks_with_ties(values: np.ndarray) -> tuple[np.ndarray, list[int]]:
    order = np.argsort(values, kind="stable")
    svals = values[order]
    ranks = np.empty(values.size, dtype=float)
    tie_sizes = []
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and svals[j + 1] == svals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        tie_sizes.append(j - i + 1)
        i = j + 1
    return ranks, tie_sizes


def mann_whitney_u_test(a, b) -> TestResult:
    """Mann-Whitney U with tie-corrected normal approximation.

    The statistic is U of the first sample (ties count 1/2), identical to
    brute-force pair counting.  A continuity correction of 1/2 toward the
    mean is applied before the normal tail.
    """
    a = _as_sample(a, 3, "a")
    b = _as_sample(b, 3, "b")
    na, nb = a.size, b.size
    combined = np.concatenate([a, b])
    ranks, tie_sizes = _ranks_with_ties(combined)
    r_a = ranks[:na].sum()
    u = r_a - na * (na + 1) / 2.0
    n = na + nb
    mu = na * nb / 2.0
    tie_term = sum(t**3 - t for t in tie_sizes) / (n * (n - 1.0)) if n > 1 else 0.0
    var = na * nb / 12.0 * ((n + 1.0) - tie_term)
    if var <= 0.0:
        return TestResult(float(u), None, 1.0, MANN_WHITNEY_U)
    diff = u - mu
    if diff > 0.5:
        z = (diff - 0.5) / math.sqrt(var)
    elif diff < -0.5:
        z = (diff + 0.5) / math.sqrt(var)
    else:
        z = 0.0
    p = min(1.0, float(normal_two_sided_p(z)))
    return TestResult(float(u), None, p, MANN_WHITNEY_U)


def two_sample_test(a, b, kind: str = WELCH_T) -> TestResult:
    if kind == WELCH_T:
        return welch_t_test(a, b)
    if kind == MANN_WHITNEY_U:
        return mann_whitney_u_test(a, b)
    raise ValueError(f"unknown test kind {kind!r}")


def effect_size(a, b) -> float:
    """Cohen's d with pooled SD; zero pooled SD gives 0 or a signed infinity."""
    a = _as_sample(a, 2, "a")
    b = _as_sample(b, 2, "b")
    na, nb = a.size, b.size
    diff = a.mean() - b.mean()
    pooled = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    if pooled == 0.0:
        if diff == 0.0:
            return 0.0
        return math.copysign(math.inf, diff)
    return float(diff / math.sqrt(pooled))


def adjust_pvalues(p, method: str, alpha: float) -> np.ndarray:
    """Significance flags after multiple-testing correction.

    none: p <= alpha; bonferroni: p <= alpha/m; benjamini_hochberg: the
    standard step-up over sorted p values.
    """
    p = np.asarray(p, dtype=float).ravel()
    if p.size and (np.nanmin(p) < 0 or np.nanmax(p) > 1):
        raise ValueError("p values must lie in [0, 1]")
    if method not in CORRECTIONS:
        raise ValueError(f"unknown correction {method!r}")
    m = p.size
    if m == 0:
        return np.zeros(0, dtype=bool)
    if method == "none":
        return p <= alpha
    if method == "bonferroni":
        return p <= alpha / m
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    thresholds = alpha * (np.arange(1, m + 1) / m)
    passing = np.nonzero(sorted_p <= thresholds)[0]
    flags = np.zeros(m, dtype=bool)
    if passing.size:
        k = passing[-1]
        flags[order[: k + 1]] = True
    return flags


# ---------------------------------------------------------------------------
# Control models and deviation maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlModel:
    """Per-point normative statistics built from a control cohort."""

    domain: EnFaceDomain
    mean: np.ndarray
    sd: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_valid: np.ndarray
    percentiles: tuple[float, float]
    min_valid: int

    @property
    def usable(self) -> np.ndarray:
        return self.n_valid >= self.min_valid


def _check_shared_domain(maps: list[AttributeMap]) -> EnFaceDomain:
    domain = maps[0].domain
    for m in maps[1:]:
        if m.domain != domain:
            raise DomainMismatchError("maps do not share one en-face domain")
    return domain


def build_control_model(
    control_maps: list[AttributeMap],
    percentiles: tuple[float, float] = (2.5, 97.5),
    min_valid: int = 3,
) -> ControlModel:
    """Per-point mean/SD and empirical percentile bounds of a control cohort.

    Percentile bounds use linear interpolation over the valid values and
    are widened, if needed, to contain the mean.
    """
    if len(control_maps) < 3:
        raise InsufficientDataError(
            f"control model needs >= 3 maps, got {len(control_maps)}"
        )
    domain = _check_shared_domain(control_maps)
    stack = np.stack([m.values for m in control_maps])
    finite = np.isfinite(stack)
    counts = finite.sum(axis=0)
    sums = np.where(finite, stack, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums / counts
        dev = np.where(finite, stack - mean, 0.0)
        ss = (dev * dev).sum(axis=0)
        sd = np.sqrt(ss / (counts - 1))
    mean[counts == 0] = np.nan
    sd[counts < 2] = np.nan

    filled = np.where(finite, stack, np.nan)
    filled[:, counts == 0] = 0.0
    lower, upper = np.nanpercentile(filled, list(percentiles), axis=0)
    lower[counts == 0] = np.nan
    upper[counts == 0] = np.nan
    # The interval always contains the model center.
    lower = np.fmin(lower, mean)
    upper = np.fmax(upper, mean)
    return ControlModel(
        domain=domain,
        mean=mean,
        sd=sd,
        lower=lower,
        upper=upper,
        n_valid=counts.astype(np.int32),
        percentiles=percentiles,
        min_valid=min_valid,
    )


@dataclass(frozen=True)
class DeviationMap:
    """Per-point z-scores and control-interval flags of one patient map."""

    domain: EnFaceDomain
    z: np.ndarray      # NaN invalid, +-inf where model sd == 0
    flags: np.ndarray  # int8: FLAG_BELOW / FLAG_INSIDE / FLAG_ABOVE / FLAG_INVALID


def deviation_map(patient: AttributeMap, model: ControlModel) -> DeviationMap:
    if patient.domain != model.domain:
        raise DomainMismatchError("patient map and control model domains differ")
    v = patient.values
    valid = np.isfinite(v) & model.usable & np.isfinite(model.mean)
    diff = v - model.mean
    z = np.full(v.shape, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        zz = diff / model.sd
    sd_zero = valid & (model.sd == 0)
    regular = valid & (model.sd > 0)
    z[regular] = zz[regular]
    z[sd_zero & (diff == 0)] = 0.0
    z[sd_zero & (diff > 0)] = np.inf
    z[sd_zero & (diff < 0)] = -np.inf

    flags = np.full(v.shape, FLAG_INVALID, dtype=np.int8)
    with np.errstate(invalid="ignore"):
        flags[valid & (v < model.lower)] = FLAG_BELOW
        flags[valid & (v > model.upper)] = FLAG_ABOVE
        flags[valid & (v >= model.lower) & (v <= model.upper)] = FLAG_INSIDE
    return DeviationMap(domain=patient.domain, z=z, flags=flags)


# ---------------------------------------------------------------------------
# Group comparisons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellComparison:
    cell_id: str
    n_p: int
    n_c: int
    mean_p: float | None
    mean_c: float | None
    diff: float | None
    p: float | None
    d: float | None
    significant: bool
    tested: bool


@dataclass(frozen=True)
class ComparisonMap:
    """Point-wise or cell-wise two-group comparison results."""

    mode: str  # "point" | "cell"
    domain: EnFaceDomain
    config: ComparisonConfig
    diff: np.ndarray | None = None
    p: np.ndarray | None = None
    d: np.ndarray | None = None
    significant: np.ndarray | None = None
    tested: np.ndarray | None = None
    cells: tuple[CellComparison, ...] | None = None
    grid: AdaptiveGrid | None = field(default=None, compare=False)

    @property
    def n_significant(self) -> int:
        if self.mode == "point":
            return int(self.significant.sum())
        return sum(1 for c in self.cells if c.significant)


def _group_point_stats(stack: np.ndarray):
    finite = np.isfinite(stack)
    n = finite.sum(axis=0).astype(float)
    sums = np.where(finite, stack, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums / n
        dev = np.where(finite, stack - mean, 0.0)
        var = (dev * dev).sum(axis=0) / (n - 1)
    return n, mean, var


def _welch_arrays(mean_p, var_p, n_p, mean_c, var_c, n_c, tested):
    """Vectorized Welch t / df / two-sided p over tested lattice points."""
    with np.errstate(invalid="ignore", divide="ignore"):
        sa = var_p / n_p
        sb = var_c / n_c
        se2 = sa + sb
    diff = mean_p - mean_c
    t = np.full(diff.shape, np.nan)
    p = np.full(diff.shape, np.nan)

    degenerate = tested & (se2 == 0)
    t[degenerate & (diff == 0)] = 0.0
    p[degenerate & (diff == 0)] = 1.0
    t[degenerate & (diff > 0)] = np.inf
    t[degenerate & (diff < 0)] = -np.inf
    p[degenerate & (diff != 0)] = 0.0

    regular = tested & (se2 > 0)
    if regular.any():
        with np.errstate(invalid="ignore", divide="ignore"):
            tr = diff[regular] / np.sqrt(se2[regular])
            df = se2[regular] ** 2 / (
                sa[regular] ** 2 / (n_p[regular] - 1)
                + sb[regular] ** 2 / (n_c[regular] - 1)
            )
        t[regular] = tr
        p[regular] = student_t_two_sided_p(tr, df)
    return t, p


def _cohens_d_arrays(mean_p, var_p, n_p, mean_c, var_c, n_c, tested):
    diff = mean_p - mean_c
    with np.errstate(invalid="ignore", divide="ignore"):
        pooled = ((n_p - 1) * var_p + (n_c - 1) * var_c) / (n_p + n_c - 2)
    d = np.full(diff.shape, np.nan)
    zero = tested & (pooled == 0)
    d[zero & (diff == 0)] = 0.0
    d[zero & (diff > 0)] = np.inf
    d[zero & (diff < 0)] = -np.inf
    pos = tested & (pooled > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        d[pos] = diff[pos] / np.sqrt(pooled[pos])
    return d


def compare_pointwise(
    patient_maps: list[AttributeMap],
    control_maps: list[AttributeMap],
    config: ComparisonConfig = ComparisonConfig(),
) -> ComparisonMap:
    """Run the configured test at every lattice point.

    A point is tested when both groups have at least `config.min_group`
    valid values there; the correction runs across all tested points.
    """
    if len(patient_maps) < config.min_group or len(control_maps) < config.min_group:
        raise InsufficientDataError(
            f"need >= {config.min_group} maps per group, got "
            f"{len(patient_maps)}/{len(control_maps)}"
        )
    domain = _check_shared_domain(list(patient_maps) + list(control_maps))
    pstack = np.stack([m.values for m in patient_maps])
    cstack = np.stack([m.values for m in control_maps])
    n_p, mean_p, var_p = _group_point_stats(pstack)
    n_c, mean_c, var_c = _group_point_stats(cstack)
    tested = (n_p >= config.min_group) & (n_c >= config.min_group)

    diff = np.where(tested, mean_p - mean_c, np.nan)
    if config.test == WELCH_T:
        _, p = _welch_arrays(mean_p, var_p, n_p, mean_c, var_c, n_c, tested)
    else:
        p = np.full(domain.shape, np.nan)
        for iy, ix in np.argwhere(tested):
            a = pstack[:, iy, ix]
            b = cstack[:, iy, ix]
            res = mann_whitney_u_test(a[np.isfinite(a)], b[np.isfinite(b)])
            p[iy, ix] = res.p_value
    d = _cohens_d_arrays(mean_p, var_p, n_p, mean_c, var_c, n_c, tested)

    significant = np.zeros(domain.shape, dtype=bool)
    idx = np.argwhere(tested)
    if idx.size:
        flags = adjust_pvalues(p[tested], config.correction, config.alpha)
        significant[tested] = flags
    return ComparisonMap(
        mode="point",
        domain=domain,
        config=config,
        diff=diff,
        p=p,
        d=d,
        significant=significant,
        tested=tested,
    )


def _subject_cell_means(
    maps: list[AttributeMap], mask: np.ndarray, total: int
) -> list[float]:
    """Per-subject mask means, keeping only reliable subjects."""
    means = []
    for m in maps:
        vals = m.values[mask]
        vals = vals[np.isfinite(vals)]
        n = vals.size
        if total == 0 or n < RELIABLE_MIN_VALID or n / total < COVERAGE_THRESHOLD:
            continue
        means.append(float(vals.mean()))
    return means


def compare_gridwise(
    grid: AdaptiveGrid,
    patient_maps: list[AttributeMap],
    control_maps: list[AttributeMap],
    config: ComparisonConfig = ComparisonConfig(),
) -> ComparisonMap:
    """Test per leaf cell on per-subject cell means.

    A subject contributes a cell mean when its coverage of the cell is
    reliable; a cell is tested when both groups keep at least
    `config.min_group` subjects.  The correction runs across tested leaves.
    """
    if len(patient_maps) < config.min_group or len(control_maps) < config.min_group:
        raise InsufficientDataError(
            f"need >= {config.min_group} maps per group, got "
            f"{len(patient_maps)}/{len(control_maps)}"
        )
    # Groups may live on different domains (e.g. pooled lateralities); cells
    # are physical, so per-group masks suffice.  Within a group the domain
    # must be shared.
    domain = _check_shared_domain(patient_maps)
    _check_shared_domain(control_maps)
    records: list[CellComparison] = []
    tested_ps: list[float] = []
    for cid in grid.leaf_ids():
        cell = grid.cells[cid]
        mask_p = cell_mask(cell, domain)
        total_p = int(mask_p.sum())
        a = _subject_cell_means(patient_maps, mask_p, total_p)
        if control_maps and control_maps[0].domain != domain:
            mask_c = cell_mask(cell, control_maps[0].domain)
            total_c = int(mask_c.sum())
        else:
            mask_c, total_c = mask_p, total_p
        b = _subject_cell_means(control_maps, mask_c, total_c)
        if len(a) < config.min_group or len(b) < config.min_group:
            records.append(
                CellComparison(cid, len(a), len(b), None, None, None, None, None,
                               significant=False, tested=False)
            )
            continue
        res = two_sample_test(a, b, config.test)
        dd = effect_size(a, b)
        mean_p = float(np.mean(a))
        mean_c = float(np.mean(b))
        records.append(
            CellComparison(
                cid, len(a), len(b), mean_p, mean_c, mean_p - mean_c,
                res.p_value, dd, significant=False, tested=True,
            )
        )
        tested_ps.append(res.p_value)

    if tested_ps:
        flags = adjust_pvalues(tested_ps, config.correction, config.alpha)
        it = iter(flags)
        records = [
            CellComparison(
                r.cell_id, r.n_p, r.n_c, r.mean_p, r.mean_c, r.diff, r.p, r.d,
                significant=bool(next(it)) if r.tested else False, tested=r.tested,
            )
            for r in records
        ]
    return ComparisonMap(
        mode="cell",
        domain=domain,
        config=config,
        cells=tuple(records),
        grid=grid,
    )


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """One 8-connected set of significant points."""

    id: int
    points: np.ndarray  # [(iy, ix)] sorted row-major
    area_mm2: float
    centroid_mm: tuple[float, float]
    mean_diff: float
    min_p: float
    outlines: tuple[tuple[tuple[float, float], ...], ...]  # polygons in mm

    @property
    def n_points(self) -> int:
        return len(self.points)

    def mask(self, domain: EnFaceDomain) -> np.ndarray:
        m = np.zeros(domain.shape, dtype=bool)
        m[self.points[:, 0], self.points[:, 1]] = True
        return m


_NEIGHBORS8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def connected_components(mask: np.ndarray) -> list[np.ndarray]:
    """8-connected components of a boolean mask, in scan order."""
    h, w = mask.shape
    labels = np.full(mask.shape, -1, dtype=np.int32)
    comps: list[np.ndarray] = []
    for iy, ix in np.argwhere(mask):
        if labels[iy, ix] >= 0:
            continue
        comp_id = len(comps)
        stack = [(int(iy), int(ix))]
        labels[iy, ix] = comp_id
        pts = []
        while stack:
            y, x = stack.pop()
            pts.append((y, x))
            for dy, dx in _NEIGHBORS8:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and labels[ny, nx] < 0:
                    labels[ny, nx] = comp_id
                    stack.append((ny, nx))
        comps.append(np.array(sorted(pts), dtype=np.int64))
    return comps


def _trace_outlines(points: np.ndarray, domain: EnFaceDomain):
    """Closed outline loops of a pixel set, as polygons in mm coordinates.

    Boundary edges are directed with the region on the left and chained
    into loops; corner coordinates are doubled to stay integral.
    """
    pixels = {(int(y), int(x)) for y, x in points}
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(a, b):
        edges.setdefault(a, []).append(b)

    for y, x in sorted(pixels):
        x2, y2 = 2 * x, 2 * y
        if (y - 1, x) not in pixels:
            add((x2 - 1, y2 - 1), (x2 + 1, y2 - 1))
        if (y + 1, x) not in pixels:
            add((x2 + 1, y2 + 1), (x2 - 1, y2 + 1))
        if (y, x - 1) not in pixels:
            add((x2 - 1, y2 + 1), (x2 - 1, y2 - 1))
        if (y, x + 1) not in pixels:
            add((x2 + 1, y2 - 1), (x2 + 1, y2 + 1))

    for v in edges.values():
        v.sort()
    loops = []
    while edges:
        start = min(edges)
        prev = start
        cur = edges[start].pop(0)
        if not edges[start]:
            del edges[start]
        loop = [start]
        while cur != start:
            loop.append(cur)
            outs = edges[cur]
            if len(outs) == 1:
                nxt = outs.pop(0)
            else:
                # Pinch corner: prefer the left turn to keep loops simple.
                dx, dy = cur[0] - prev[0], cur[1] - prev[1]
                left = (cur[0] - dy, cur[1] + dx)
                nxt = left if left in outs else outs[0]
                outs.remove(nxt)
            if not edges[cur]:
                del edges[cur]
            prev, cur = cur, nxt
        loops.append(loop)

    polygons = []
    for loop in loops:
        poly = []
        for cx, cy in loop:
            px, py = enface_to_physical(cx / 2.0, cy / 2.0, domain)
            poly.append((px, py))
        polygons.append(tuple(poly))
    return tuple(polygons)


def extract_significant_regions(cmp: ComparisonMap) -> list[Region]:
    """8-connected regions of significant points, largest area first."""
    if cmp.mode != "point":
        raise ValueError("region extraction needs a point-wise comparison")
    comps = connected_components(cmp.significant)
    pixel_area = cmp.domain.pixel_area_mm2
    regions = []
    for pts in comps:
        xs, ys = enface_to_physical(pts[:, 1].astype(float), pts[:, 0].astype(float), cmp.domain)
        diffs = cmp.diff[pts[:, 0], pts[:, 1]]
        ps = cmp.p[pts[:, 0], pts[:, 1]]
        regions.append(
            Region(
                id=-1,
                points=pts,
                area_mm2=len(pts) * pixel_area,
                centroid_mm=(float(np.mean(xs)), float(np.mean(ys))),
                mean_diff=float(np.nanmean(diffs)),
                min_p=float(np.nanmin(ps)),
                outlines=_trace_outlines(pts, cmp.domain),
            )
        )
    regions.sort(key=lambda r: (-r.area_mm2, r.centroid_mm[1], r.centroid_mm[0]))
    return [
        Region(i, r.points, r.area_mm2, r.centroid_mm, r.mean_diff, r.min_p, r.outlines)
        for i, r in enumerate(regions)
    ]


# ---------------------------------------------------------------------------
# Region measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementSummary:
    n: int
    mean: float | None
    sd: float | None
    vmin: float | None
    vmax: float | None
    area_mm2: float
    diff: float | None = None
    p: float | None = None
    d: float | None = None
    n_p: int | None = None
    n_c: int | None = None
    test: str | None = None


def _check_mask(mask: np.ndarray, domain: EnFaceDomain) -> int:
    if mask.shape != domain.shape:
        raise SelectionError(
            f"mask shape {mask.shape} does not match domain {domain.shape}"
        )
    total = int(mask.sum())
    if total == 0:
        raise SelectionError("selection mask is empty")
    return total


def measure_region(
    maps,
    mask: np.ndarray,
    control_maps: list[AttributeMap] | None = None,
    model: ControlModel | None = None,
    config: ComparisonConfig = ComparisonConfig(),
) -> MeasurementSummary:
    """Statistically summarize a masked region.

    With a single map: descriptive statistics over the valid masked values
    (plus the mean difference against a control model when given).  With a
    patient map list and control_maps: the per-subject mask means feed the
    two-sample test and effect size, the same machinery as compare_gridwise
    with the mask as one cell; descriptive statistics then summarize the
    patient subject means.
    """
    if isinstance(maps, AttributeMap):
        domain = maps.domain
        total = _check_mask(mask, domain)
        area = total * domain.pixel_area_mm2
        vals = maps.values[mask]
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            return MeasurementSummary(0, None, None, None, None, area)
        diff = None
        if model is not None:
            if model.domain != domain:
                raise DomainMismatchError("control model domain differs from map")
            ok = mask & np.isfinite(maps.values) & model.usable
            if ok.any():
                diff = float(np.mean(maps.values[ok] - model.mean[ok]))
        return MeasurementSummary(
            n=int(vals.size),
            mean=float(vals.mean()),
            sd=float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0,
            vmin=float(vals.min()),
            vmax=float(vals.max()),
            area_mm2=area,
            diff=diff,
        )

    patient_maps = list(maps)
    if not patient_maps:
        raise InsufficientDataError("no patient maps given")
    if control_maps is None:
        raise InsufficientDataError("group measurement needs control_maps")
    domain = patient_maps[0].domain
    total = _check_mask(mask, domain)
    area = total * domain.pixel_area_mm2
    a = _subject_cell_means(patient_maps, mask, total)
    b = _subject_cell_means(control_maps, mask, total)
    if len(a) < config.min_group or len(b) < config.min_group:
        raise InsufficientDataError(
            f"need >= {config.min_group} reliable subjects per group in the "
            f"selection, got {len(a)}/{len(b)}"
        )
    res = two_sample_test(a, b, config.test)
    d = effect_size(a, b)
    arr = np.asarray(a)
    return MeasurementSummary(
        n=len(a),
        mean=float(arr.mean()),
        sd=float(arr.std(ddof=1)) if len(a) > 1 else 0.0,
        vmin=float(arr.min()),
        vmax=float(arr.max()),
        area_mm2=area,
        diff=float(np.mean(a) - np.mean(b)),
        p=res.p_value,
        d=d,
        n_p=len(a),
        n_c=len(b),
        test=config.test,
    )
