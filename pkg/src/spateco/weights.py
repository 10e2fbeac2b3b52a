"""Contiguity-based spatial weights: construction, standardization, GAL I/O.

Weights start binary (1 per contiguity link) and are row-standardized on
demand. Isolates (regions with no neighbors) are kept, flagged, and left
as all-zero rows; downstream statistics exclude them explicitly.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from shapely import STRtree
from shapely.geometry import shape as geojson_shape

from .errors import FormatError, GeometryError, ReferentialError

# shared-point snapping tolerance, as a fraction of the bbox diagonal
SNAP_FRACTION = 1e-9


@dataclass(frozen=True)
class SpatialWeights:
    """Sparse neighbor structure over an ordered list of region ids."""

    regions: tuple
    neighbors: tuple  # per region: tuple of (neighbor_index, weight)
    standardized: bool = False

    def __post_init__(self):
        n = len(self.regions)
        if len(self.neighbors) != n:
            raise ValueError("neighbors list does not match region count")
        for i, links in enumerate(self.neighbors):
            for j, w in links:
                if j == i:
                    raise ValueError(f"self-link on region {self.regions[i]!r}")
                if not 0 <= j < n:
                    raise ValueError(f"neighbor index {j} out of range")

    @property
    def n(self):
        return len(self.regions)

    def cardinalities(self):
        return np.array([len(links) for links in self.neighbors])

    def isolates(self):
        """Region ids with zero neighbors."""
        return tuple(self.regions[i] for i, links in enumerate(self.neighbors) if not links)

    def is_symmetric(self):
        pairs = {(i, j) for i, links in enumerate(self.neighbors) for j, _ in links}
        return all((j, i) in pairs for i, j in pairs)

    def to_dense(self):
        m = np.zeros((self.n, self.n))
        for i, links in enumerate(self.neighbors):
            for j, w in links:
                m[i, j] = w
        return m

    def lag(self, values):
        """Weighted neighbor average (or sum, if binary) of ``values``."""
        x = np.asarray(values, dtype=float)
        out = np.full(self.n, np.nan)
        for i, links in enumerate(self.neighbors):
            if links:
                out[i] = sum(w * x[j] for j, w in links)
        return out

    def __eq__(self, other):
        if not isinstance(other, SpatialWeights):
            return NotImplemented
        return (
            self.regions == other.regions
            and self.standardized == other.standardized
            and all(
                sorted(a) == sorted(b)
                for a, b in zip(self.neighbors, other.neighbors)
            )
        )

    def __hash__(self):
        return hash((self.regions, self.standardized))


def from_adjacency(regions, links, standardized=False):
    """Build weights from (region_id, region_id) pairs; both directions added."""
    index = {r: i for i, r in enumerate(regions)}
    sets = [set() for _ in regions]
    for a, b in links:
        i, j = index[a], index[b]
        if i == j:
            raise ValueError(f"self-link on {a!r}")
        sets[i].add(j)
        sets[j].add(i)
    neighbors = tuple(tuple((j, 1.0) for j in sorted(s)) for s in sets)
    w = SpatialWeights(tuple(regions), neighbors, standardized=False)
    return row_standardize(w) if standardized else w


def row_standardize(weights):
    """Scale each non-isolate row to sum 1; isolates stay all-zero."""
    rows = []
    for links in weights.neighbors:
        total = sum(w for _, w in links)
        if total > 0:
            rows.append(tuple((j, w / total) for j, w in links))
        else:
            rows.append(tuple())
    return SpatialWeights(weights.regions, tuple(rows), standardized=True)


def _load_geometries(features, id_property):
    geoms = {}
    for k, feature in enumerate(features):
        props = feature.get("properties") or {}
        rid = props.get(id_property)
        if rid is None:
            raise GeometryError(f"feature {k}: missing id property {id_property!r}")
        rid = str(rid)
        if feature.get("geometry") is None:
            raise GeometryError(f"region {rid!r}: empty geometry")
        geom = geojson_shape(feature["geometry"])
        if geom.is_empty:
            raise GeometryError(f"region {rid!r}: empty geometry")
        if not geom.is_valid:
            raise GeometryError(f"region {rid!r}: invalid polygon ring")
        if rid in geoms:
            raise GeometryError(f"duplicate region id {rid!r}")
        geoms[rid] = geom
    return geoms


def contiguity(geometries, rule="queen"):
    """Binary contiguity weights from a mapping region_id -> shapely geometry.

    queen: neighbors share at least one boundary point (within a snapping
    tolerance relative to the dataset bbox). rook: neighbors share a
    boundary segment of positive length.
    """
    if rule not in ("queen", "rook"):
        raise ValueError(f"unknown contiguity rule {rule!r}")
    regions = tuple(geometries.keys())
    geoms = list(geometries.values())
    for rid, g in geometries.items():
        if g.is_empty:
            raise GeometryError(f"region {rid!r}: empty geometry")
        if not g.is_valid:
            raise GeometryError(f"region {rid!r}: invalid polygon ring")
    xmin = min(g.bounds[0] for g in geoms)
    ymin = min(g.bounds[1] for g in geoms)
    xmax = max(g.bounds[2] for g in geoms)
    ymax = max(g.bounds[3] for g in geoms)
    tol = SNAP_FRACTION * math.hypot(xmax - xmin, ymax - ymin)

    tree = STRtree(geoms)
    sets = [set() for _ in geoms]
    for i, g in enumerate(geoms):
        for j in tree.query(g.buffer(tol)):
            j = int(j)
            if j <= i:
                continue
            if rule == "queen":
                linked = geoms[i].distance(geoms[j]) <= tol
            else:
                inter = geoms[i].boundary.intersection(geoms[j].boundary)
                linked = inter.length > tol
            if linked:
                sets[i].add(j)
                sets[j].add(i)
    neighbors = tuple(tuple((j, 1.0) for j in sorted(s)) for s in sets)
    return SpatialWeights(regions, neighbors)


def queen_contiguity(geometries):
    return contiguity(geometries, rule="queen")


def rook_contiguity(geometries):
    return contiguity(geometries, rule="rook")


def contiguity_from_geojson(collection, id_property="id", rule="queen"):
    """Contiguity weights from a GeoJSON FeatureCollection dict."""
    if collection.get("type") != "FeatureCollection":
        raise GeometryError("expected a GeoJSON FeatureCollection")
    geoms = _load_geometries(collection.get("features", []), id_property)
    return contiguity(geoms, rule=rule)


def lattice(nrows, ncols, rule="queen"):
    """Contiguity weights of a regular nrows x ncols grid of unit cells."""
    regions = [f"r{r}c{c}" for r in range(nrows) for c in range(ncols)]
    links = []
    for r in range(nrows):
        for c in range(ncols):
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                if rule == "rook" and dr and dc:
                    continue
                rr, cc = r + dr, c + dc
                if 0 <= rr < nrows and 0 <= cc < ncols:
                    links.append((f"r{r}c{c}", f"r{rr}c{cc}"))
    return from_adjacency(regions, links)


@dataclass(frozen=True)
class ConnectivitySummary:
    n_regions: int
    min_neighbors: int
    max_neighbors: int
    mean_neighbors: float
    median_neighbors: float
    pct_nonzero: float
    n_isolates: int
    min_nonisolate: int  # min cardinality among connected regions, 0 if none
    histogram: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "n_regions": self.n_regions,
            "min_neighbors": self.min_neighbors,
            "max_neighbors": self.max_neighbors,
            "mean_neighbors": self.mean_neighbors,
            "median_neighbors": self.median_neighbors,
            "pct_nonzero": self.pct_nonzero,
            "n_isolates": self.n_isolates,
            "min_nonisolate": self.min_nonisolate,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def connectivity_summary(weights):
    """Neighbor-cardinality summary; pct_nonzero = links / n^2 * 100."""
    cards = weights.cardinalities()
    n = weights.n
    if n == 0:
        raise ValueError("empty weights")
    mean = float(cards.mean())
    nonzero = cards[cards > 0]
    hist = {}
    for k in cards:
        hist[int(k)] = hist.get(int(k), 0) + 1
    return ConnectivitySummary(
        n_regions=n,
        min_neighbors=int(cards.min()),
        max_neighbors=int(cards.max()),
        mean_neighbors=mean,
        median_neighbors=float(np.median(cards)),
        pct_nonzero=mean / n * 100.0,
        n_isolates=int((cards == 0).sum()),
        min_nonisolate=int(nonzero.min()) if nonzero.size else 0,
        histogram=hist,
    )


def save_gal(weights, stream, dataset_name="spateco", id_variable="region_id"):
    """Write the neighbor structure in GAL text format (binary links only)."""
    stream.write(f"0 {weights.n} {dataset_name} {id_variable}\n")
    for i, links in enumerate(weights.neighbors):
        stream.write(f"{weights.regions[i]} {len(links)}\n")
        stream.write(" ".join(str(weights.regions[j]) for j, _ in links) + "\n")


def load_gal(stream):
    """Read a GAL file into binary SpatialWeights.

    Accepts both the bare ``n`` header and the 4-token GeoDa header.
    """
    lines = [ln.rstrip("\n") for ln in stream]
    pos = 0
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    if pos >= len(lines):
        raise FormatError("empty GAL file")
    header = lines[pos].split()
    pos += 1
    try:
        n = int(header[1]) if len(header) >= 2 else int(header[0])
    except ValueError:
        raise FormatError(f"bad GAL header {lines[pos - 1]!r}")

    entries = []
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        head = lines[pos].split()
        pos += 1
        if len(head) != 2:
            raise FormatError(f"bad GAL record header {lines[pos - 1]!r}")
        rid, count_s = head
        try:
            count = int(count_s)
        except ValueError:
            raise FormatError(f"bad neighbor count {count_s!r} for region {rid!r}")
        ids = []
        while len(ids) < count:
            if pos >= len(lines):
                raise FormatError(f"region {rid!r}: expected {count} neighbors, file ended")
            ids.extend(lines[pos].split())
            pos += 1
        if len(ids) != count:
            raise FormatError(f"region {rid!r}: expected {count} neighbors, got {len(ids)}")
        if count == 0 and pos < len(lines) and not lines[pos].strip():
            pos += 1
        entries.append((rid, ids))

    if len(entries) != n:
        raise FormatError(f"header announces {n} regions, file has {len(entries)}")
    regions = tuple(rid for rid, _ in entries)
    index = {rid: i for i, rid in enumerate(regions)}
    neighbors = []
    for rid, ids in entries:
        links = []
        for nid in ids:
            if nid not in index:
                raise ReferentialError(f"region {rid!r} references unknown neighbor {nid!r}")
            links.append((index[nid], 1.0))
        neighbors.append(tuple(links))
    return SpatialWeights(regions, tuple(neighbors))
