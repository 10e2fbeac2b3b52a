"""Batch pipeline driver.

Every subcommand reads its inputs, writes JSON/CSV (and GeoJSON where
spatial) artifacts into the output directory, and records a run manifest
(input digests, seed, parameters, version). All randomness flows from
the single --seed; each stage derives its own sub-seed by hashing
(seed, stage name), so outputs are byte-reproducible and adding a stage
never perturbs another one.

Exit codes: 0 success, 1 input error, 2 internal error.
"""

import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import growth as growth_mod
from . import moran as moran_mod
from . import normality as normality_mod
from . import panel as panel_mod
from . import plssem as plssem_mod
from . import weights as weights_mod
from .errors import SpatecoError

EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def stage_seed(seed, stage):
    """Deterministic per-stage sub-seed derived from the master seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "overflow" if v > 0 else "-overflow"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_manifest(out_dir, command, inputs, seed, parameters):
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        # keyed by file name so reruns into different directories stay
        # byte-identical
        "inputs": {Path(p).name: _sha256(p) for p in inputs if p},
        "parameters": _json_safe(parameters),
    }
    _write_json(Path(out_dir) / "run_manifest.json", manifest)


def _load_dataset(path, delimiter):
    with open(path, encoding="utf-8") as fh:
        return panel_mod.load_panel(fh, delimiter=delimiter)


def _load_weights(gal=None, geometry=None, id_property="id"):
    if gal:
        with open(gal, encoding="utf-8") as fh:
            return weights_mod.load_gal(fh)
    if geometry:
        with open(geometry, encoding="utf-8") as fh:
            collection = json.load(fh)
        return weights_mod.contiguity_from_geojson(collection, id_property=id_property)
    raise click.UsageError("either --gal or --geometry is required")


def _aligned_values(dataset, w, indicator, year):
    codes = {r.code: i for i, r in enumerate(dataset.regions)}
    missing = [rid for rid in w.regions if rid not in codes]
    if missing:
        raise SpatecoError(f"weights regions absent from panel: {missing[:5]}")
    section = dataset.cross_section(indicator, year)
    return np.array([section[codes[rid]] for rid in w.regions])


class _Runner:
    """Wraps a command body with error-record emission and exit codes."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)

    def __enter__(self):
        return self.out

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            return False
        if isinstance(exc, (SpatecoError, FileNotFoundError, json.JSONDecodeError,
                            KeyError, ValueError, click.UsageError)):
            code = EXIT_INPUT_ERROR
        else:
            code = EXIT_INTERNAL_ERROR
        record = {
            "error": type(exc).__name__,
            "module": type(exc).__module__,
            "message": str(exc),
        }
        _write_json(self.out / "error.json", record)
        click.echo(json.dumps(record, sort_keys=True), err=True)
        sys.exit(code)


@click.group(context_settings={"auto_envvar_prefix": "SPATECO"})
@click.version_option(__version__)
def main():
    """Spatial-econometrics batch pipeline."""


input_opt = click.option("--input", "input_path", required=True,
                         type=click.Path(exists=True), help="Long-format panel file.")
out_opt = click.option("--out", "out_dir", required=True, type=click.Path(),
                       help="Output directory.")
delim_opt = click.option("--delimiter", default=",", show_default=True)
seed_opt = click.option("--seed", default=0, show_default=True, type=int)


@main.command("describe")
@input_opt
@out_opt
@delim_opt
def cmd_describe(input_path, out_dir, delimiter):
    """Descriptive statistics per (indicator, year) cross-section."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        table = {}
        for indicator in dataset.indicators:
            table[indicator] = {}
            for year in dataset.years:
                try:
                    table[indicator][str(year)] = panel_mod.describe(
                        dataset, indicator, year).as_dict()
                except SpatecoError as exc:
                    table[indicator][str(year)] = {"error": str(exc)}
        _write_json(out / "describe.json", _json_safe(table))
        with open(out / "describe.csv", "w", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["indicator", "year", "n", "mean", "sd", "variance",
                             "coef_var", "min", "median", "max", "range"])
            for indicator in dataset.indicators:
                for year in dataset.years:
                    s = table[indicator][str(year)]
                    if "error" in s:
                        continue
                    writer.writerow([indicator, year] + [repr(s[c]) for c in
                                    ("n", "mean", "sd", "variance", "coef_var",
                                     "min", "median", "max", "range")])
        _write_manifest(out, "describe", [input_path], None, {"delimiter": delimiter})


@main.command("standardize")
@input_opt
@out_opt
@delim_opt
def cmd_standardize(input_path, out_dir, delimiter):
    """Z-score each (indicator, year) cross-section; write the new panel."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        std = panel_mod.standardize(dataset)
        with open(out / "standardized.csv", "w", encoding="utf-8") as fh:
            panel_mod.save_panel(std, fh, delimiter=delimiter)
        _write_json(out / "panel_manifest.json", std.manifest())
        _write_manifest(out, "standardize", [input_path], None, {"delimiter": delimiter})


@main.command("normality")
@input_opt
@out_opt
@delim_opt
@click.option("--test", "which", type=click.Choice(["shapiro-wilk", "ryan-joiner", "both"]),
              default="both", show_default=True)
@click.option("--alpha", default=0.05, show_default=True, type=float)
def cmd_normality(input_path, out_dir, delimiter, which, alpha):
    """Normality tests on every (indicator, year) cross-section."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        results = []
        for indicator in dataset.indicators:
            for year in dataset.years:
                section = dataset.cross_section(indicator, year)
                section = section[np.isfinite(section)]
                for flag, name, fn in (
                        ("shapiro-wilk", "shapiro_wilk", normality_mod.shapiro_wilk),
                        ("ryan-joiner", "ryan_joiner", normality_mod.ryan_joiner)):
                    if which not in (flag, "both"):
                        continue
                    try:
                        res = fn(section, alpha=alpha).as_dict()
                    except SpatecoError as exc:
                        res = {"test": name, "error": str(exc)}
                    res.update({"indicator": indicator, "year": year})
                    results.append(res)
        _write_json(out / "normality.json", _json_safe(results))
        _write_manifest(out, "normality", [input_path], None,
                        {"test": which, "alpha": alpha, "delimiter": delimiter})


@main.command("weights")
@out_opt
@click.option("--geometry", type=click.Path(exists=True), help="GeoJSON FeatureCollection.")
@click.option("--gal", type=click.Path(exists=True), help="Existing GAL file.")
@click.option("--id-property", default="id", show_default=True)
@click.option("--rule", type=click.Choice(["queen", "rook"]), default="queen", show_default=True)
def cmd_weights(out_dir, geometry, gal, id_property, rule):
    """Build (or load) contiguity weights; write GAL + connectivity report."""
    with _Runner(out_dir) as out:
        if geometry:
            with open(geometry, encoding="utf-8") as fh:
                collection = json.load(fh)
            w = weights_mod.contiguity_from_geojson(collection, id_property=id_property, rule=rule)
        else:
            w = _load_weights(gal=gal)
        with open(out / "weights.gal", "w", encoding="utf-8") as fh:
            weights_mod.save_gal(w, fh, id_variable=id_property)
        summary = weights_mod.connectivity_summary(w)
        report = summary.as_dict()
        report["symmetric"] = w.is_symmetric()
        report["isolates"] = list(w.isolates())
        _write_json(out / "connectivity.json", _json_safe(report))
        _write_manifest(out, "weights", [geometry, gal], None,
                        {"rule": rule, "id_property": id_property})


@main.command("moran")
@input_opt
@out_opt
@delim_opt
@seed_opt
@click.option("--geometry", type=click.Path(exists=True))
@click.option("--gal", type=click.Path(exists=True))
@click.option("--id-property", default="id", show_default=True)
@click.option("--indicator", required=True)
@click.option("--year", required=True, type=int)
@click.option("--permutations", default=9999, show_default=True, type=int)
def cmd_moran(input_path, out_dir, delimiter, seed, geometry, gal, id_property,
              indicator, year, permutations):
    """Global Moran's I with permutation inference."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        w = _load_weights(gal=gal, geometry=geometry, id_property=id_property)
        values = _aligned_values(dataset, w, indicator, year)
        sub_seed = stage_seed(seed, "moran")
        result = moran_mod.moran_permutation(values, w, n_permutations=permutations,
                                             seed=sub_seed)
        record = result.as_dict()
        record.update({"indicator": indicator, "year": year, "master_seed": seed})
        _write_json(out / "moran.json", _json_safe(record))
        _write_manifest(out, "moran", [input_path, geometry, gal], seed,
                        {"indicator": indicator, "year": year,
                         "permutations": permutations})


@main.command("lisa")
@input_opt
@out_opt
@delim_opt
@seed_opt
@click.option("--geometry", type=click.Path(exists=True))
@click.option("--gal", type=click.Path(exists=True))
@click.option("--id-property", default="id", show_default=True)
@click.option("--indicator", required=True)
@click.option("--year", required=True, type=int)
@click.option("--second-indicator", default=None,
              help="If given, bivariate local statistic of --indicator vs this one's lag.")
@click.option("--permutations", default=9999, show_default=True, type=int)
@click.option("--alpha", "alphas", multiple=True, type=float,
              default=(0.05, 0.01, 0.001), show_default=True)
def cmd_lisa(input_path, out_dir, delimiter, seed, geometry, gal, id_property,
             indicator, year, second_indicator, permutations, alphas):
    """Local Moran (LISA) classification with conditional permutations."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        w = _load_weights(gal=gal, geometry=geometry, id_property=id_property)
        values = _aligned_values(dataset, w, indicator, year)
        sub_seed = stage_seed(seed, "lisa")
        if second_indicator:
            second = _aligned_values(dataset, w, second_indicator, year)
            result = moran_mod.bivariate_local_moran(
                values, second, w, n_permutations=permutations,
                seed=sub_seed, thresholds=tuple(alphas))
        else:
            result = moran_mod.lisa_classify(
                values, w, n_permutations=permutations,
                seed=sub_seed, thresholds=tuple(alphas))
        record = {
            "kind": result.kind,
            "indicator": indicator,
            "second_indicator": second_indicator,
            "year": year,
            "n_permutations": result.n_permutations,
            "seed": result.seed,
            "master_seed": seed,
            "regions": result.as_records(),
        }
        _write_json(out / "lisa.json", _json_safe(record))
        if geometry:
            with open(geometry, encoding="utf-8") as fh:
                collection = json.load(fh)
            annotated = moran_mod.annotate_geojson(collection, result, id_property=id_property)
            _write_json(out / "lisa.geojson", _json_safe(annotated))
        _write_manifest(out, "lisa", [input_path, geometry, gal], seed,
                        {"indicator": indicator, "second_indicator": second_indicator,
                         "year": year, "permutations": permutations,
                         "alphas": list(alphas)})


def _pooled_matrix(dataset, indicators):
    """Pool (region, year) rows of the given indicator columns, complete rows only."""
    cols = [dataset.indicators.index(ind) for ind in indicators]
    rows = []
    labels = []
    for i, region in enumerate(dataset.regions):
        for k, year in enumerate(dataset.years):
            row = dataset.values[i, cols, k]
            if np.all(np.isfinite(row)):
                rows.append(row)
                labels.append(f"{region.code}:{year}")
    return np.array(rows), labels


@main.command("plssem")
@input_opt
@out_opt
@delim_opt
@seed_opt
@click.option("--model", "model_path", required=True, type=click.Path(exists=True),
              help="Model spec JSON: constructs, blocks, edges, optional config.")
@click.option("--bootstrap", "bootstrap_b", default=5000, show_default=True, type=int)
@click.option("--omission-distance", default=7, show_default=True, type=int)
def cmd_plssem(input_path, out_dir, delimiter, seed, model_path, bootstrap_b,
               omission_distance):
    """Fit the reflective path model; run the full evaluation battery."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        with open(model_path, encoding="utf-8") as fh:
            spec = json.load(fh)
        model = plssem_mod.PathModel.from_dict(spec)
        config = spec.get("config", {})
        tol = config.get("tolerance", plssem_mod.DEFAULT_TOL)
        b = config.get("bootstrap", bootstrap_b)
        d = config.get("omission_distance", omission_distance)
        data, labels = _pooled_matrix(dataset, model.indicators)
        fit = plssem_mod.fit_pls(model, data, columns=model.indicators, tol=tol)
        quality = plssem_mod.measurement_quality(fit, data, columns=model.indicators)
        discriminant = plssem_mod.discriminant_validity(fit, data, columns=model.indicators)
        vif = plssem_mod.structural_collinearity(fit)
        sub_seed = stage_seed(seed, "plssem")
        boot = plssem_mod.bootstrap_paths(model, data, n_resamples=b,
                                          seed=sub_seed, columns=model.indicators, tol=tol)
        q2 = plssem_mod.blindfold_q2(model, data, omission_distance=d,
                                     columns=model.indicators, tol=tol)
        report = {
            "model": model.to_dict(),
            "n_observations": int(data.shape[0]),
            "iterations": fit.iterations,
            "loadings": fit.loadings,
            "outer_weights": fit.outer_weights,
            "path_coefficients": {f"{s}~{t}": v for (s, t), v in fit.path_coefficients.items()},
            "r_squared": fit.r_squared,
            "internal_consistency": quality.as_dict(),
            "discriminant_validity": discriminant,
            "vif": {f"{p}~{c}": v for (p, c), v in vif.items()},
            "bootstrap": boot.as_dict(),
            "q2": q2,
            "master_seed": seed,
        }
        _write_json(out / "plssem.json", _json_safe(report))
        _write_manifest(out, "plssem", [input_path, model_path], seed,
                        {"bootstrap": b, "omission_distance": d, "tolerance": tol})


@main.command("growth")
@input_opt
@out_opt
@delim_opt
@click.option("--y-indicator", default="PIB", show_default=True)
@click.option("--a-indicator", default="TIC", show_default=True)
@click.option("--k-indicator", default="CBO", show_default=True)
@click.option("--per-capita", "pop_indicator", default=None,
              help="Divide the response by this indicator (population) first.")
@click.option("--mode", type=click.Choice(list(growth_mod.MODES)),
              default="canonical", show_default=True)
def cmd_growth(input_path, out_dir, delimiter, y_indicator, a_indicator,
               k_indicator, pop_indicator, mode):
    """Cobb-Douglas growth fit over pooled positive (Y, A, K) observations."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        indicators = [y_indicator, a_indicator, k_indicator]
        if pop_indicator:
            indicators.append(pop_indicator)
        data, labels = _pooled_matrix(dataset, indicators)
        y, a, k = data[:, 0], data[:, 1], data[:, 2]
        if pop_indicator:
            y = y / data[:, 3]
        keep = (y > 0) & (a > 0) & (k > 0)
        fit = growth_mod.cobb_douglas_fit(y[keep], a[keep], k[keep])
        report = {
            "mode": mode,
            "response": y_indicator,
            "per_capita_by": pop_indicator,
            "digital_activity": a_indicator,
            "knowledge": k_indicator,
            "n_used": int(keep.sum()),
            "fit": fit.as_dict(),
        }
        _write_json(out / "growth.json", _json_safe(report))
        _write_manifest(out, "growth", [input_path], None, report | {"fit": None})


@main.command("regress")
@input_opt
@out_opt
@delim_opt
@click.option("--pairs", required=True,
              help="Comma-separated predictor:response pairs, e.g. TIC:PIB,CBO:PIB.")
@click.option("--grouping", type=click.Choice(["microregion", "mesoregion"]),
              default="microregion", show_default=True)
def cmd_regress(input_path, out_dir, delimiter, pairs, grouping):
    """Group-wise simple OLS reports."""
    with _Runner(out_dir) as out:
        dataset = _load_dataset(input_path, delimiter)
        pair_list = []
        for item in pairs.split(","):
            pred, _, resp = item.partition(":")
            if not resp:
                raise click.UsageError(f"bad pair {item!r}, expected predictor:response")
            pair_list.append((pred.strip(), resp.strip()))
        reports = growth_mod.group_ols(dataset, pair_list, grouping=grouping)
        _write_json(out / "regress.json", _json_safe([r.as_dict() for r in reports]))
        with open(out / "regress.csv", "w", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["group", "predictor", "response", "year", "slope",
                             "intercept", "r_squared", "p_value", "n",
                             "r_squared_display", "p_display", "note"])
            for r in reports:
                writer.writerow([
                    r.group, r.predictor, r.response, r.year,
                    repr(r.slope), repr(r.intercept), repr(r.r_squared),
                    repr(r.p_value), r.n,
                    "" if math.isnan(r.r_squared) else f"{r.r_squared:.3f}",
                    "" if math.isnan(r.p_value) else f"{r.p_value:.3f}",
                    r.note,
                ])
        _write_manifest(out, "regress", [input_path], None,
                        {"pairs": pairs, "grouping": grouping})


@main.command("pipeline")
@input_opt
@out_opt
@delim_opt
@seed_opt
@click.option("--geometry", type=click.Path(exists=True))
@click.option("--gal", type=click.Path())
@click.option("--id-property", default="id", show_default=True)
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--permutations", default=9999, show_default=True, type=int)
@click.option("--bootstrap", "bootstrap_b", default=5000, show_default=True, type=int)
@click.option("--indicator", "moran_indicator", default=None,
              help="Indicator for the Moran/LISA stage (default: first in the panel).")
@click.option("--pairs", default=None,
              help="Regression pairs; default pairs every non-response indicator with the last one.")
@click.option("--mode", type=click.Choice(list(growth_mod.MODES)), default="canonical",
              show_default=True)
@click.pass_context
def cmd_pipeline(ctx, input_path, out_dir, delimiter, seed, geometry, gal,
                 id_property, model_path, permutations, bootstrap_b,
                 moran_indicator, pairs, mode):
    """Run the full report bundle: describe through growth, in order.

    A stage failure halts the pipeline; artifacts of earlier stages stay
    in place.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _Runner(out_dir):
        dataset = _load_dataset(input_path, delimiter)
        moran_indicator = moran_indicator or dataset.indicators[0]
        year = dataset.years[-1]
        if pairs is None:
            response = dataset.indicators[-1]
            pairs = ",".join(f"{ind}:{response}" for ind in dataset.indicators
                             if ind != response)

    stages = []
    stages.append(("01_describe", cmd_describe,
                   {"input_path": input_path, "out_dir": str(out / "01_describe"),
                    "delimiter": delimiter}))
    stages.append(("02_standardize", cmd_standardize,
                   {"input_path": input_path, "out_dir": str(out / "02_standardize"),
                    "delimiter": delimiter}))
    stages.append(("03_normality", cmd_normality,
                   {"input_path": input_path, "out_dir": str(out / "03_normality"),
                    "delimiter": delimiter, "which": "both", "alpha": 0.05}))
    stages.append(("04_weights", cmd_weights,
                   {"out_dir": str(out / "04_weights"), "geometry": geometry,
                    "gal": gal, "id_property": id_property, "rule": "queen"}))
    spatial_gal = gal if gal else str(out / "04_weights" / "weights.gal")
    stages.append(("05_moran", _moran_lisa_stage,
                   {"input_path": input_path, "out_dir": str(out / "05_moran"),
                    "delimiter": delimiter, "seed": seed, "geometry": geometry,
                    "gal": spatial_gal, "id_property": id_property,
                    "indicator": moran_indicator, "year": year,
                    "permutations": permutations}))
    stages.append(("06_plssem", cmd_plssem,
                   {"input_path": input_path, "out_dir": str(out / "06_plssem"),
                    "delimiter": delimiter, "seed": seed, "model_path": model_path,
                    "bootstrap_b": bootstrap_b, "omission_distance": 7}))
    stages.append(("07_regress", cmd_regress,
                   {"input_path": input_path, "out_dir": str(out / "07_regress"),
                    "delimiter": delimiter, "pairs": pairs,
                    "grouping": "microregion"}))
    stages.append(("08_growth", cmd_growth,
                   {"input_path": input_path, "out_dir": str(out / "08_growth"),
                    "delimiter": delimiter, "y_indicator": dataset.indicators[-1],
                    "a_indicator": dataset.indicators[0],
                    "k_indicator": dataset.indicators[min(1, len(dataset.indicators) - 1)],
                    "pop_indicator": None, "mode": mode}))

    completed = []
    for name, command, kwargs in stages:
        if command is _moran_lisa_stage:
            _moran_lisa_stage(ctx, **kwargs)
        else:
            ctx.invoke(command, **kwargs)
        completed.append(name)
    _write_json(out / "bundle_manifest.json", {
        "stages": completed,
        "seed": seed,
        "version": __version__,
    })


def _moran_lisa_stage(ctx, input_path, out_dir, delimiter, seed, geometry, gal,
                      id_property, indicator, year, permutations):
    ctx.invoke(cmd_moran, input_path=input_path, out_dir=out_dir,
               delimiter=delimiter, seed=seed, geometry=None, gal=gal,
               id_property=id_property, indicator=indicator, year=year,
               permutations=permutations)
    ctx.invoke(cmd_lisa, input_path=input_path, out_dir=out_dir,
               delimiter=delimiter, seed=seed, geometry=geometry, gal=gal,
               id_property=id_property, indicator=indicator, year=year,
               second_indicator=None, permutations=permutations,
               alphas=(0.05, 0.01, 0.001))


if __name__ == "__main__":
    main()
