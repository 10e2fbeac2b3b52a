"""Global, local, and bivariate Moran statistics with permutation inference.

All statistics operate on row-standardized weights (binary input is
standardized on the fly) and exclude isolate regions from means,
variances, and counts. Every permutation draw flows from per-(region,
permutation-block) RNG streams derived from the master seed, so results
depend only on (values, weights, n_permutations, seed) and never on
evaluation order.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DegenerateScaleError, InsufficientDataError
from .weights import row_standardize

SIG_THRESHOLDS = (0.05, 0.01, 0.001)


@dataclass(frozen=True)
class MoranGlobal:
    I: float
    expected: float
    n_used: int
    pseudo_p: float = None
    n_permutations: int = 0
    seed: int = None

    def as_dict(self):
        return {
            "I": self.I,
            "expected": self.expected,
            "n_used": self.n_used,
            "pseudo_p": self.pseudo_p,
            "n_permutations": self.n_permutations,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class LisaResult:
    regions: tuple
    local_i: np.ndarray = field(repr=False)
    quadrant: tuple  # "HH"/"LL"/"LH"/"HL", None for isolates
    pseudo_p: np.ndarray = field(repr=False)
    significance_class: tuple
    n_permutations: int
    seed: int
    kind: str = "univariate"

    def as_records(self):
        recs = []
        for k, rid in enumerate(self.regions):
            li = self.local_i[k]
            p = self.pseudo_p[k]
            recs.append({
                "region": rid,
                "local_i": None if np.isnan(li) else float(li),
                "quadrant": self.quadrant[k],
                "pseudo_p": None if np.isnan(p) else float(p),
                "significance_class": self.significance_class[k],
            })
        return recs


def _prepare(values, weights, min_regions=3):
    if not weights.standardized:
        weights = row_standardize(weights)
    x = np.asarray(values, dtype=float)
    if x.shape != (weights.n,):
        raise AlignmentError(f"got {x.shape[0] if x.ndim == 1 else x.shape} values for {weights.n} regions")
    cards = weights.cardinalities()
    mask = cards > 0
    if not np.all(np.isfinite(x[mask])):
        raise ValueError("non-finite value on a connected region")
    n_used = int(mask.sum())
    if n_used < min_regions:
        raise InsufficientDataError(
            f"need >= {min_regions} connected regions, got {n_used}")
    if np.ptp(x[mask]) == 0:
        raise DegenerateScaleError("values constant over connected regions")
    z = np.where(mask, x - x[mask].mean(), np.nan)
    return weights, z, mask, n_used


def global_moran(values, weights):
    """Moran's I statistic (no inference); defined for >= 2 connected regions."""
    weights, z, mask, n_used = _prepare(values, weights, min_regions=2)
    lag = weights.lag(np.where(mask, z, 0.0))
    num = float(np.nansum(np.where(mask, z * lag, 0.0)))
    den = float(np.nansum(np.where(mask, z * z, 0.0)))
    return MoranGlobal(I=num / den, expected=-1.0 / (n_used - 1), n_used=n_used)


def _permutation_matrix(rng, m, n):
    # m independent uniform permutations of range(n)
    return np.argsort(rng.random((m, n)), axis=1)


def moran_permutation(values, weights, n_permutations=999, seed=0):
    """Moran's I with a two-sided permutation pseudo p-value.

    Extremeness is measured by |I - E[I]|; pseudo_p = (m + 1)/(M + 1).
    """
    if n_permutations < 99:
        raise ValueError(f"n_permutations must be >= 99, got {n_permutations}")
    weights, z, mask, n_used = _prepare(values, weights)
    observed = global_moran(values, weights)

    idx = np.flatnonzero(mask)
    zc = z[idx]
    ss = float(np.sum(zc * zc))
    # dense row-standardized weights restricted to connected regions
    pos = {int(g): k for k, g in enumerate(idx)}
    wd = np.zeros((n_used, n_used))
    for k, g in enumerate(idx):
        for j, w in weights.neighbors[int(g)]:
            wd[k, pos[int(j)]] = w

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    perms = _permutation_matrix(rng, n_permutations, n_used)
    stats = np.empty(n_permutations)
    for t in range(n_permutations):
        zp = zc[perms[t]]
        stats[t] = zp @ (wd @ zp) / ss
    e = observed.expected
    extreme = int(np.sum(np.abs(stats - e) >= abs(observed.I - e)))
    p = (extreme + 1) / (n_permutations + 1)
    return MoranGlobal(I=observed.I, expected=e, n_used=n_used,
                       pseudo_p=p, n_permutations=n_permutations, seed=int(seed))


def local_moran(values, weights):
    """Per-region local Moran values; NaN for isolates.

    Satisfies sum(local_i) = n_used * global I on row-standardized weights.
    """
    weights, z, mask, n_used = _prepare(values, weights)
    m2 = float(np.nansum(np.where(mask, z * z, 0.0))) / n_used
    lag = weights.lag(np.where(mask, z, 0.0))
    out = np.full(weights.n, np.nan)
    out[mask] = z[mask] * lag[mask] / m2
    return out


def _quadrants(z, lag, mask):
    quads = []
    for k in range(z.size):
        if not mask[k]:
            quads.append(None)
        elif z[k] > 0:
            quads.append("HH" if lag[k] > 0 else "HL")
        else:
            quads.append("LH" if lag[k] > 0 else "LL")
    return tuple(quads)


def classify_significance(p, thresholds=SIG_THRESHOLDS):
    """Tightest threshold the pseudo p-value passes, or 'ns'."""
    if p is None or np.isnan(p):
        return "ns"
    label = "ns"
    for t in sorted(thresholds, reverse=True):
        if p < t:
            label = f"p<{format(t, 'g').lstrip('0') if t < 1 else t}"
    return label


def _conditional_pseudo_p(stat_obs, z_own, pool, weights, mask, m2, n_permutations, seed, stream_tag):
    """Hold-one-out conditional permutation p-values, one RNG stream per region.

    pool[k] supplies the values neighbors are drawn from (all connected
    regions). Region k's own value is excluded from its pool.
    """
    n = weights.n
    p = np.full(n, np.nan)
    connected = np.flatnonzero(mask)
    for k in connected:
        links = weights.neighbors[int(k)]
        wts = np.array([w for _, w in links])
        card = len(links)
        others = pool[connected[connected != k]]
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(stream_tag), int(k)]))
        draws = np.argpartition(rng.random((n_permutations, others.size)), card - 1, axis=1)[:, :card]
        lag_sim = others[draws] @ wts
        sim = z_own[k] * lag_sim / m2
        extreme = int(np.sum(np.abs(sim) >= abs(stat_obs[k])))
        p[k] = (extreme + 1) / (n_permutations + 1)
    return p


def lisa_classify(values, weights, n_permutations=999, seed=0, thresholds=SIG_THRESHOLDS):
    """Local Moran with conditional permutation inference and quadrant labels."""
    if n_permutations < 99:
        raise ValueError(f"n_permutations must be >= 99, got {n_permutations}")
    weights, z, mask, n_used = _prepare(values, weights)
    m2 = float(np.nansum(np.where(mask, z * z, 0.0))) / n_used
    lag = weights.lag(np.where(mask, z, 0.0))
    local = np.full(weights.n, np.nan)
    local[mask] = z[mask] * lag[mask] / m2

    p = _conditional_pseudo_p(local, z, z, weights, mask, m2, n_permutations, seed, stream_tag=1)
    quads = _quadrants(z, lag, mask)
    classes = tuple(
        classify_significance(p[k], thresholds) if mask[k] else "ns"
        for k in range(weights.n)
    )
    return LisaResult(weights.regions, local, quads, p, classes,
                      n_permutations, int(seed), kind="univariate")


def bivariate_local_moran(x, y, weights, n_permutations=999, seed=0, thresholds=SIG_THRESHOLDS):
    """Local association of x with the spatial lag of y.

    Both variables are standardized internally; the permutation holds
    x_i fixed and redraws neighbor values of y.
    """
    if n_permutations < 99:
        raise ValueError(f"n_permutations must be >= 99, got {n_permutations}")
    weights_x, zx, mask, n_used = _prepare(x, weights)
    weights_y, zy, mask_y, _ = _prepare(y, weights)
    weights = weights_x
    m2y = float(np.nansum(np.where(mask, zy * zy, 0.0))) / n_used
    lag_y = weights.lag(np.where(mask, zy, 0.0))
    local = np.full(weights.n, np.nan)
    local[mask] = zx[mask] * lag_y[mask] / m2y

    p = _conditional_pseudo_p(local, zx, zy, weights, mask, m2y, n_permutations, seed, stream_tag=2)
    quads = _quadrants(zx, lag_y, mask)
    classes = tuple(
        classify_significance(p[k], thresholds) if mask[k] else "ns"
        for k in range(weights.n)
    )
    return LisaResult(weights.regions, local, quads, p, classes,
                      n_permutations, int(seed), kind="bivariate")


def significance_map(result, thresholds=SIG_THRESHOLDS):
    """Per-region significance classes keyed by region id."""
    return {
        rid: classify_significance(result.pseudo_p[k], thresholds)
        for k, rid in enumerate(result.regions)
    }


def annotate_geojson(collection, result, id_property="id"):
    """Merge LISA properties onto a GeoJSON FeatureCollection (new object)."""
    by_region = {rec["region"]: rec for rec in result.as_records()}
    features = []
    for feature in collection.get("features", []):
        f = dict(feature)
        props = dict(f.get("properties") or {})
        rid = str(props.get(id_property))
        rec = by_region.get(rid)
        if rec is not None:
            props.update({
                "local_i": rec["local_i"],
                "quadrant": rec["quadrant"],
                "pseudo_p": rec["pseudo_p"],
                "significance_class": rec["significance_class"],
            })
        f["properties"] = props
        features.append(f)
    out = dict(collection)
    out["features"] = features
    return out
