"""Reflective PLS path modeling with quality battery and bootstrap inference.

Estimation follows the classic iterative outer/inner scheme: Mode A
(correlation) outer weights, path-scheme inner weights, convergence on
the maximum outer-weight change. Structural coefficients come from OLS
on the standardized latent scores, so single-indicator single-predictor
edges reduce exactly to Pearson correlations.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as t_dist

from .errors import ConvergenceError, ParameterError, RankError

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 300
DEFAULT_BOOTSTRAP = 5000
DEFAULT_OMISSION = 7


@dataclass(frozen=True)
class PathModel:
    """Latent constructs, reflective indicator blocks, directed edges."""

    constructs: tuple
    blocks: dict  # construct -> tuple of indicator names
    edges: tuple  # (source construct, target construct)

    def __post_init__(self):
        if len(set(self.constructs)) != len(self.constructs):
            raise ValueError("duplicate construct names")
        seen = {}
        for c in self.constructs:
            block = self.blocks.get(c, ())
            if not block:
                raise ValueError(f"construct {c!r} has no indicators")
            for ind in block:
                if ind in seen:
                    raise ValueError(f"indicator {ind!r} appears in blocks {seen[ind]!r} and {c!r}")
                seen[ind] = c
        for s, t in self.edges:
            if s not in self.constructs or t not in self.constructs:
                raise ValueError(f"edge ({s!r}, {t!r}) references unknown construct")
            if s == t:
                raise ValueError(f"self-edge on {s!r}")
        if self._has_cycle():
            raise ValueError("structural graph must be acyclic")

    def _has_cycle(self):
        order = {c: 0 for c in self.constructs}  # 0 new, 1 visiting, 2 done
        adj = {c: [t for s, t in self.edges if s == c] for c in self.constructs}

        def visit(c):
            if order[c] == 1:
                return True
            if order[c] == 2:
                return False
            order[c] = 1
            if any(visit(t) for t in adj[c]):
                return True
            order[c] = 2
            return False

        return any(visit(c) for c in self.constructs)

    @property
    def indicators(self):
        out = []
        for c in self.constructs:
            out.extend(self.blocks[c])
        return tuple(out)

    def predecessors(self, construct):
        return tuple(s for s, t in self.edges if t == construct)

    def successors(self, construct):
        return tuple(t for s, t in self.edges if s == construct)

    def endogenous(self):
        return tuple(c for c in self.constructs if self.predecessors(c))

    @classmethod
    def from_dict(cls, spec):
        constructs = tuple(spec["constructs"])
        blocks = {c: tuple(spec["blocks"][c]) for c in constructs}
        edges = tuple((s, t) for s, t in spec["edges"])
        return cls(constructs, blocks, edges)

    def to_dict(self):
        return {
            "constructs": list(self.constructs),
            "blocks": {c: list(b) for c, b in self.blocks.items()},
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class PathEstimates:
    model: PathModel
    loadings: dict  # indicator -> loading on its construct
    outer_weights: dict  # indicator -> weight
    path_coefficients: dict  # (source, target) -> beta
    r_squared: dict  # endogenous construct -> R^2
    scores: np.ndarray = field(repr=False)  # n_obs x n_constructs, unit variance
    iterations: int = 0

    def score(self, construct):
        return self.scores[:, self.model.constructs.index(construct)]


def _standardize_columns(x):
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    if np.any(sd == 0):
        bad = int(np.flatnonzero(sd == 0)[0])
        raise RankError(f"zero-variance indicator at column {bad}")
    return (x - mu) / sd


def _column_map(model, columns):
    if columns is None:
        columns = model.indicators
    columns = list(columns)
    missing = [ind for ind in model.indicators if ind not in columns]
    if missing:
        raise ValueError(f"data is missing indicators: {missing}")
    return {ind: columns.index(ind) for ind in model.indicators}


def _normalize_weight(w):
    w = w / np.linalg.norm(w)
    dominant = np.argmax(np.abs(w))
    return w if w[dominant] >= 0 else -w


def _ols(y, x):
    """Coefficients of y on columns of x (no intercept; data centered)."""
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise RankError("singular structural predictor set")
    return coef


def fit_pls(model, data, columns=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Estimate the path model on an observations x indicators matrix.

    ``columns`` names the data columns; defaults to the model's indicator
    order. Data are standardized internally (sample sd).
    """
    colmap = _column_map(model, columns)
    raw = np.asarray(data, dtype=float)
    if raw.ndim != 2:
        raise ValueError("data must be a 2-D observations x indicators matrix")
    n = raw.shape[0]
    max_block = max(len(b) for b in model.blocks.values())
    if n <= max_block:
        raise ValueError(f"need more observations ({n}) than the largest block ({max_block})")
    x = _standardize_columns(raw[:, [colmap[ind] for ind in model.indicators]])

    slices = {}
    offset = 0
    for c in model.constructs:
        k = len(model.blocks[c])
        slices[c] = slice(offset, offset + k)
        offset += k

    weights = {c: _normalize_weight(np.ones(len(model.blocks[c]))) for c in model.constructs}
    trace = []
    for iteration in range(1, max_iter + 1):
        scores = np.column_stack([
            x[:, slices[c]] @ weights[c] for c in model.constructs
        ])
        scores = scores / scores.std(axis=0, ddof=1)

        # inner approximation: path scheme
        inner = np.zeros((len(model.constructs), len(model.constructs)))
        for ci, c in enumerate(model.constructs):
            preds = model.predecessors(c)
            if preds:
                xp = scores[:, [model.constructs.index(p) for p in preds]]
                coef = _ols(scores[:, ci], xp)
                for p, b in zip(preds, coef):
                    inner[ci, model.constructs.index(p)] = b
            for s in model.successors(c):
                si = model.constructs.index(s)
                inner[ci, si] = float(np.corrcoef(scores[:, ci], scores[:, si])[0, 1])
        proxies = scores @ inner.T
        psd = proxies.std(axis=0, ddof=1)
        if np.any(psd == 0):
            raise ConvergenceError("degenerate inner proxy (zero variance)", trace=trace)
        proxies = proxies / psd

        delta = 0.0
        new_weights = {}
        for ci, c in enumerate(model.constructs):
            # Mode A: covariance of indicators with the inner proxy
            w = x[:, slices[c]].T @ proxies[:, ci] / (n - 1)
            w = _normalize_weight(w)
            delta = max(delta, float(np.max(np.abs(w - weights[c]))))
            new_weights[c] = w
        weights = new_weights
        trace.append(delta)
        if delta < tol:
            break
    else:
        raise ConvergenceError(
            f"outer weights did not converge in {max_iter} iterations", trace=trace)

    scores = np.column_stack([x[:, slices[c]] @ weights[c] for c in model.constructs])
    scores = scores / scores.std(axis=0, ddof=1)

    # sign alignment: dominant loading of each block positive
    for ci, c in enumerate(model.constructs):
        lam = x[:, slices[c]].T @ scores[:, ci] / (n - 1)
        if lam[np.argmax(np.abs(lam))] < 0:
            scores[:, ci] = -scores[:, ci]
            weights[c] = -weights[c]

    loadings = {}
    outer_weights = {}
    for ci, c in enumerate(model.constructs):
        lam = x[:, slices[c]].T @ scores[:, ci] / (n - 1)
        for ind, l, w in zip(model.blocks[c], lam, weights[c]):
            loadings[ind] = float(l)
            outer_weights[ind] = float(w)

    paths = {}
    r2 = {}
    for c in model.endogenous():
        preds = model.predecessors(c)
        xp = scores[:, [model.constructs.index(p) for p in preds]]
        y = scores[:, model.constructs.index(c)]
        coef = _ols(y, xp)
        for p, b in zip(preds, coef):
            paths[(p, c)] = float(b)
        resid = y - xp @ coef
        r2[c] = float(1.0 - resid @ resid / (y @ y))

    return PathEstimates(model, loadings, outer_weights, paths, r2, scores, iteration)


@dataclass(frozen=True)
class QualityReport:
    cronbach_alpha: dict
    composite_reliability: dict
    ave: dict
    flags: dict  # construct -> {"reliable": bool, "convergent": bool}

    def as_dict(self):
        return {
            "cronbach_alpha": self.cronbach_alpha,
            "composite_reliability": self.composite_reliability,
            "ave": self.ave,
            "flags": self.flags,
        }


def measurement_quality(estimates, data, columns=None):
    """Cronbach's alpha (standardized items), CR, and AVE per construct.

    Single-indicator constructs report alpha = CR = AVE = 1 by convention.
    Reliability flag uses the 0.7 threshold, convergent-validity flag the
    0.5 AVE threshold.
    """
    model = estimates.model
    colmap = _column_map(model, columns)
    x = np.asarray(data, dtype=float)
    alpha = {}
    cr = {}
    ave = {}
    flags = {}
    for c in model.constructs:
        block = model.blocks[c]
        k = len(block)
        lam = np.array([estimates.loadings[ind] for ind in block])
        if k == 1:
            alpha[c] = cr[c] = ave[c] = 1.0
        else:
            r = np.corrcoef(x[:, [colmap[ind] for ind in block]], rowvar=False)
            rbar = float((r.sum() - k) / (k * (k - 1)))
            alpha[c] = k * rbar / (1.0 + (k - 1) * rbar)
            s = float(lam.sum())
            cr[c] = s * s / (s * s + float(np.sum(1.0 - lam**2)))
            ave[c] = float(np.mean(lam**2))
        flags[c] = {"reliable": alpha[c] > 0.7 and cr[c] > 0.7, "convergent": ave[c] > 0.5}
    return QualityReport(alpha, cr, ave, flags)


def discriminant_validity(estimates, data, columns=None):
    """HTMT matrix and Fornell-Larcker table.

    HTMT: mean absolute heterotrait correlation over the geometric mean
    of the within-block means; single-indicator blocks contribute a
    monotrait mean of 1, so two single-indicator constructs compare by
    their absolute inter-indicator correlation.
    """
    model = estimates.model
    colmap = _column_map(model, columns)
    x = np.asarray(data, dtype=float)
    quality = measurement_quality(estimates, data, columns=columns)

    def block_cols(c):
        return [colmap[ind] for ind in model.blocks[c]]

    htmt = {}
    for i, ci in enumerate(model.constructs):
        for cj in model.constructs[i + 1:]:
            r = np.abs(np.corrcoef(
                x[:, block_cols(ci) + block_cols(cj)], rowvar=False))
            ki, kj = len(model.blocks[ci]), len(model.blocks[cj])
            hetero = float(r[:ki, ki:].mean())

            def mono(sub, k):
                if k == 1:
                    return 1.0
                return float((sub.sum() - k) / (k * (k - 1)))

            mono_i = mono(r[:ki, :ki], ki)
            mono_j = mono(r[ki:, ki:], kj)
            htmt[(ci, cj)] = hetero / math.sqrt(mono_i * mono_j)

    n_c = len(model.constructs)
    score_corr = np.corrcoef(estimates.scores, rowvar=False).reshape(n_c, n_c)
    fornell = np.array(score_corr)
    for i, c in enumerate(model.constructs):
        fornell[i, i] = math.sqrt(quality.ave[c])
    return {
        "htmt": {f"{a}~{b}": v for (a, b), v in htmt.items()},
        "fornell_larcker": {
            "constructs": list(model.constructs),
            "matrix": fornell.tolist(),
        },
    }


def structural_collinearity(estimates):
    """VIF of each predictor within each endogenous construct's predictor set."""
    model = estimates.model
    vif = {}
    for c in model.endogenous():
        preds = model.predecessors(c)
        for p in preds:
            others = [q for q in preds if q != p]
            if not others:
                vif[(p, c)] = 1.0
                continue
            xo = np.column_stack([estimates.score(q) for q in others])
            y = estimates.score(p)
            coef, _, _, _ = np.linalg.lstsq(xo, y, rcond=None)
            resid = y - xo @ coef
            r2 = 1.0 - float(resid @ resid / (y @ y))
            vif[(p, c)] = math.inf if r2 >= 1.0 else 1.0 / (1.0 - r2)
    return vif


@dataclass(frozen=True)
class BootstrapPathResult:
    edges: dict  # (source, target) -> record dict
    n_resamples: int
    n_redrawn: int
    seed: int

    def as_dict(self):
        return {
            "edges": {f"{s}~{t}": rec for (s, t), rec in self.edges.items()},
            "n_resamples": self.n_resamples,
            "n_redrawn": self.n_redrawn,
            "seed": self.seed,
        }


def bootstrap_paths(model, data, n_resamples=DEFAULT_BOOTSTRAP, seed=0,
                    columns=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Bootstrap standard errors, t and p values for the path coefficients.

    t = original beta / bootstrap SE; two-tailed p against the t
    distribution with n_resamples - 1 degrees of freedom. Resamples with
    a zero-variance indicator column are redrawn (and counted). Each
    resample has its own RNG stream derived from (seed, resample index),
    so results are schedule-independent.
    """
    if n_resamples < 500:
        raise ValueError(f"n_resamples must be >= 500, got {n_resamples}")
    original = fit_pls(model, data, columns=columns, tol=tol, max_iter=max_iter)
    colmap = _column_map(model, columns)
    x = np.asarray(data, dtype=float)[:, [colmap[ind] for ind in model.indicators]]
    n = x.shape[0]

    edge_samples = {e: np.empty(n_resamples) for e in original.path_coefficients}
    n_redrawn = 0
    for b in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), b]))
        while True:
            idx = rng.integers(0, n, size=n)
            xb = x[idx]
            if np.all(xb.std(axis=0) > 0):
                break
            n_redrawn += 1
        fit_b = fit_pls(model, xb, columns=model.indicators, tol=tol, max_iter=max_iter)
        # sign correction per construct against the original loadings
        sign = {}
        for c in model.constructs:
            lam_o = np.array([original.loadings[i] for i in model.blocks[c]])
            lam_b = np.array([fit_b.loadings[i] for i in model.blocks[c]])
            sign[c] = -1.0 if float(lam_o @ lam_b) < 0 else 1.0
        for (s, t), beta in fit_b.path_coefficients.items():
            edge_samples[(s, t)][b] = sign[s] * sign[t] * beta

    records = {}
    for edge, samples in edge_samples.items():
        beta = original.path_coefficients[edge]
        se = float(samples.std(ddof=1))
        tval = beta / se if se > 0 else math.inf * np.sign(beta)
        p = float(2.0 * t_dist.sf(abs(tval), df=n_resamples - 1)) if math.isfinite(tval) else 0.0
        lo, hi = np.percentile(samples, [2.5, 97.5])
        records[edge] = {
            "beta": beta,
            "boot_mean": float(samples.mean()),
            "se": se,
            "t": float(tval),
            "p": p,
            "ci95": [float(lo), float(hi)],
        }
    return BootstrapPathResult(records, n_resamples, n_redrawn, int(seed))


def blindfold_q2(model, data, omission_distance=DEFAULT_OMISSION, columns=None,
                 tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Stone-Geisser cross-validated redundancy Q^2 per endogenous construct.

    Every omission_distance-th cell of the endogenous indicator columns is
    omitted round-robin, imputed by the column mean of the remaining
    cells, the model refit, and the omitted (standardized) values
    predicted as loading x structurally-predicted score. Q^2 > 0 flags
    predictive relevance.
    """
    d = int(omission_distance)
    if d < 2:
        raise ParameterError(f"omission distance must be >= 2, got {d}")
    colmap = _column_map(model, columns)
    raw = np.asarray(data, dtype=float)
    n = raw.shape[0]
    if n % d == 0:
        raise ParameterError(
            f"omission distance {d} divides n = {n} evenly; use {d - 1} or {d + 1}")
    x = _standardize_columns(raw[:, [colmap[ind] for ind in model.indicators]])
    order = {ind: k for k, ind in enumerate(model.indicators)}

    endo = model.endogenous()
    endo_cols = {}
    j = 0
    for c in endo:
        for ind in model.blocks[c]:
            endo_cols[ind] = j
            j += 1

    sse = {c: 0.0 for c in endo}
    sso = {c: 0.0 for c in endo}
    for round_d in range(d):
        work = np.array(x)
        omitted = {}
        for c in endo:
            for ind in model.blocks[c]:
                col = order[ind]
                rows = np.flatnonzero((np.arange(n) + endo_cols[ind]) % d == round_d)
                keep = np.setdiff1d(np.arange(n), rows)
                mean_rest = float(work[keep, col].mean())
                omitted[(c, ind)] = (rows, col, mean_rest)
                work[rows, col] = mean_rest
        fit = fit_pls(model, work, columns=model.indicators, tol=tol, max_iter=max_iter)
        for c in endo:
            preds = model.predecessors(c)
            y_hat = np.zeros(n)
            for p in preds:
                y_hat += fit.path_coefficients[(p, c)] * fit.score(p)
            for ind in model.blocks[c]:
                rows, col, mean_rest = omitted[(c, ind)]
                pred = fit.loadings[ind] * y_hat[rows]
                true = x[rows, col]
                sse[c] += float(np.sum((true - pred) ** 2))
                # trivial benchmark: predict every omitted cell by the
                # column mean (0 after standardization)
                sso[c] += float(np.sum(true**2))

    return {
        c: {"q2": 1.0 - sse[c] / sso[c], "predictive_relevance": (1.0 - sse[c] / sso[c]) > 0}
        for c in endo
    }
