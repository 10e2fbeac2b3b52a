import json

import numpy as np
import pytest

from spateco.plssem import PathModel

PLS_LOADINGS = (0.9, 0.8, 0.7)


def two_block_model():
    return PathModel(
        ("F1", "F2"),
        {"F1": ("a1", "a2", "a3"), "F2": ("b1", "b2", "b3")},
        (("F1", "F2"),),
    )


def composite_attenuation(lam):
    """corr between a lambda-weighted composite and its common factor."""
    lam = np.asarray(lam)
    cov = lam @ lam
    var = (lam @ lam) ** 2 + lam**2 @ (1 - lam**2)
    return cov / np.sqrt(var)


def make_pls_data(seed, n=500, lam=PLS_LOADINGS, beta=0.6):
    """Two-block reflective data whose composite-level coefficient is beta.

    The factor correlation is disattenuated by the analytic composite/
    factor correlation, so beta is the estimand of a composite-based
    fit rather than the (attenuated) factor-model coefficient.
    """
    lam = np.asarray(lam)
    q = composite_attenuation(lam)
    rho = beta / q**2
    rng = np.random.default_rng(seed)
    f1 = rng.normal(size=n)
    f2 = rho * f1 + np.sqrt(1 - rho**2) * rng.normal(size=n)
    cols = [l * f1 + np.sqrt(1 - l * l) * rng.normal(size=n) for l in lam]
    cols += [l * f2 + np.sqrt(1 - l * l) * rng.normal(size=n) for l in lam]
    return np.column_stack(cols)


def make_null_pls_data(seed, n=500, lam=PLS_LOADINGS):
    """Same blocks, structurally unrelated factors (beta = 0)."""
    rng = np.random.default_rng(seed)
    f1 = rng.normal(size=n)
    f2 = rng.normal(size=n)
    lam = np.asarray(lam)
    cols = [l * f1 + np.sqrt(1 - l * l) * rng.normal(size=n) for l in lam]
    cols += [l * f2 + np.sqrt(1 - l * l) * rng.normal(size=n) for l in lam]
    return np.column_stack(cols)


def grid_codes(nrows, ncols):
    return [f"r{r}c{c}" for r in range(nrows) for c in range(ncols)]


def grid_geojson(nrows, ncols, scale=1.0, dx=0.0, dy=0.0):
    """Unit-square grid as a GeoJSON FeatureCollection, ids matching lattice()."""
    features = []
    for r in range(nrows):
        for c in range(ncols):
            x0, y0 = c * scale + dx, r * scale + dy
            ring = [[x0, y0], [x0 + scale, y0], [x0 + scale, y0 + scale],
                    [x0, y0 + scale], [x0, y0]]
            features.append({
                "type": "Feature",
                "properties": {"id": f"r{r}c{c}"},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            })
    return {"type": "FeatureCollection", "features": features}


def panel_csv_text(nrows=3, ncols=3, indicators=("TIC", "CBO", "POB", "PIB"),
                   years=range(2009, 2015), seed=5, spatial=True):
    """Long-format synthetic panel over grid region codes.

    Values carry a smooth spatial gradient plus noise and a shared latent
    trend across indicators, so Moran, PLS, and OLS stages all have
    signal to find.
    """
    rng = np.random.default_rng(seed)
    years = list(years)
    lines = ["region_code,region_name,microregion,indicator,year,value"]
    base = {}
    for r in range(nrows):
        for c in range(ncols):
            base[(r, c)] = (r + c) if spatial else 0.0
    for r in range(nrows):
        for c in range(ncols):
            code = f"r{r}c{c}"
            micro = f"M{(r * ncols + c) % 3}"
            latent = base[(r, c)] + rng.normal(scale=0.3)
            for ind_pos, ind in enumerate(indicators):
                for t, year in enumerate(years):
                    value = (
                        10.0 + 2.0 * latent + 0.5 * t
                        + (ind_pos + 1) * 0.8 * latent
                        + rng.normal(scale=0.4)
                    )
                    lines.append(f"{code},Region {code},{micro},{ind},{year},{value:.6f}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def grid_geojson_file(tmp_path):
    path = tmp_path / "grid.geojson"
    path.write_text(json.dumps(grid_geojson(3, 3)))
    return path


@pytest.fixture
def panel_file(tmp_path):
    path = tmp_path / "panel.csv"
    path.write_text(panel_csv_text())
    return path


@pytest.fixture
def model_file(tmp_path):
    spec = {
        "constructs": ["CE", "AED", "AHU", "CER"],
        "blocks": {"CE": ["TIC"], "AED": ["CBO"], "AHU": ["POB"], "CER": ["PIB"]},
        "edges": [["CE", "AED"], ["AED", "AHU"], ["AED", "CER"]],
    }
    path = tmp_path / "model.json"
    path.write_text(json.dumps(spec))
    return path
