"""End-to-end experiment runners behind the command-line interface.

A run is fully described by one JSON-compatible config dict (see
``DEFAULT_CONFIG``); every output file echoes the effective config so that a
report is self-describing and reproducible.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from hullgap import images
from hullgap.boundary import (
    BLUE,
    TrainRegime,
    boundary_component_count,
    gen_two_class,
    grid_eval,
    hull_2d,
    region_disagreement,
    train_with_restarts,
)
from hullgap.datasets import (
    load_cifar10_bin,
    load_feature_matrix,
    load_mnist_idx,
    random_dataset,
    shuffle_pixels,
    subsample,
    unflatten,
)
from hullgap.errors import HullgapError, InputError
from hullgap.hull import (
    DEFAULT_MEMBERSHIP_TOL,
    SampleMatrix,
    SolverConfig,
    batch_distances,
    nearest_sample,
    perturbation,
    sketched_project,
)
from hullgap.wavelets import WaveletSpec, apply_selection, select_coefficients, transform_rows

log = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "dataset": None,
    "space": {"kind": "pixel", "family": "haar", "levels": 2, "k": 100},
    "solver": {},
    "subsample": {"train_n": None, "test_n": None, "seed": 0},
    "queries": "test",
    "out": "out",
    "threads": 1,
    "bins": 50,
    "membership_tolerance": DEFAULT_MEMBERSHIP_TOL,
    "project": {"query_index": 0, "per_class": False},
    "baselines": {"seed": 0},
    "boundary": {
        "data": {"n_per_class": 100, "margin": 0.3, "seed": 0,
                 "bounds": [-22.0, 11.0, -4.0, 4.0]},
        "domain": [-25.0, 15.0, -5.0, 5.0],
        "resolution": [200, 100],
        "widths": [2, 5, 10, 30, 50, 100, 200],
        "seeds": [0],
        "runs": None,
        "restarts": 5,
        "regime": {},
    },
}


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the JSON file at ``path``, then ``overrides``."""
    cfg = DEFAULT_CONFIG
    if path is not None:
        try:
            cfg = merge(cfg, json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from None
    return merge(cfg, overrides or {})


def solver_config(cfg: dict) -> SolverConfig:
    try:
        return SolverConfig(**cfg.get("solver", {}))
    except TypeError as exc:
        raise InputError(f"bad solver config: {exc}") from None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- data preparation ------------------------------------------------------

@dataclass
class Split:
    features: np.ndarray
    labels: np.ndarray | None
    ids: np.ndarray


@dataclass
class Prepared:
    train: Split
    test: Split
    shape: tuple | None
    space: str
    selection: np.ndarray | None = None


def load_dataset(spec: dict):
    """Return ``(train, test)`` as LabeledImages or FeatureMatrix pairs."""
    if not spec:
        raise InputError("config has no 'dataset' section")
    fmt = spec.get("format")
    if fmt == "mnist":
        return (load_mnist_idx(spec["train_images"], spec["train_labels"]),
                load_mnist_idx(spec["test_images"], spec["test_labels"]))
    if fmt == "cifar10":
        return load_cifar10_bin(spec["train"]), load_cifar10_bin(spec["test"])
    if fmt == "features":
        ff = spec.get("feature_format", "csv")
        return load_feature_matrix(spec["train"], ff), load_feature_matrix(spec["test"], ff)
    raise InputError(f"unknown dataset format {fmt!r}")


def _draw(data, count, seed):
    if hasattr(data, "labels"):
        sub, idx = subsample(data, count, seed)
        return Split(sub.images, sub.labels, idx), sub
    n = data.data.shape[0]
    if count is not None and count > n:
        raise InputError(f"requested {count} samples from a dataset of {n}")
    if count is None or count == n:
        idx = np.arange(n)
    else:
        from hullgap.datasets import rng_for
        idx = np.sort(rng_for(seed).choice(n, size=count, replace=False))
    return Split(data.data[idx], None, idx), None


def prepare(cfg: dict) -> Prepared:
    """Load, subsample (train seed ``s``, test seed ``s + 1``) and map to the
    configured feature space."""
    train_all, test_all = load_dataset(cfg["dataset"])
    sub = cfg["subsample"]
    seed = int(sub.get("seed", 0))
    train, _ = _draw(train_all, sub.get("train_n"), seed)
    test, _ = _draw(test_all, sub.get("test_n"), seed + 1)
    shape = getattr(train_all, "shape", None)
    space = cfg["space"]
    kind = space.get("kind", "pixel")
    selection = None
    if kind == "wavelet":
        if shape is None:
            raise InputError("wavelet space needs image data")
        wspec = WaveletSpec(space.get("family", "haar"), int(space.get("levels", 1)))
        wtrain = transform_rows(train.features, shape, wspec)
        wtest = transform_rows(test.features, shape, wspec)
        k = space.get("k")
        if k is not None:
            selection = select_coefficients(wtrain, int(k))
            wtrain = apply_selection(wtrain, selection)
            wtest = apply_selection(wtest, selection)
        train = Split(wtrain, train.labels, train.ids)
        test = Split(wtest, test.labels, test.ids)
    elif kind == "imported":
        if shape is not None:
            raise InputError("space 'imported' needs a 'features' dataset")
    elif kind != "pixel":
        raise InputError(f"unknown space {kind!r}")
    elif shape is None:
        raise InputError("space 'pixel' needs image data")
    return Prepared(train, test, shape, kind, selection)


def _queries(cfg: dict, prep: Prepared) -> Split:
    which = cfg.get("queries", "test")
    if which == "test":
        return prep.test
    if which == "train":
        return prep.train
    raise InputError(f"queries must be 'test' or 'train', got {which!r}")


# --- distances -------------------------------------------------------------

def summarize(distances, tol: float) -> dict:
    d = np.asarray([v for v in distances if v is not None and np.isfinite(v)], dtype=np.float64)
    if d.size == 0:
        return {"count": 0, "min": None, "median": None, "mean": None, "max": None, "pct_outside": None}
    return {
        "count": int(d.size),
        "min": float(d.min()),
        "median": float(np.median(d)),
        "mean": float(d.mean()),
        "max": float(d.max()),
        "pct_outside": 100.0 * float(np.mean(d > tol)),
    }


def distance_report(cfg: dict, prep: Prepared, queries: Split) -> dict:
    solver = solver_config(cfg)
    rep = batch_distances(queries.features, SampleMatrix(prep.train.features), solver,
                          bins=int(cfg.get("bins", 50)), threads=int(cfg.get("threads", 1)))
    records = []
    for k, qid in enumerate(queries.ids):
        dist = rep.distances[k]
        records.append({
            "id": int(qid),
            "distance": float(dist) if np.isfinite(dist) else None,
            "converged": bool(rep.converged[k]),
            "iterations": int(rep.iterations[k]),
            "support_size": int(rep.support_sizes[k]),
            "error": rep.errors[k],
        })
    tol = float(cfg.get("membership_tolerance", DEFAULT_MEMBERSHIP_TOL))
    return {
        "config": cfg,
        "train_ids": [int(i) for i in prep.train.ids],
        "records": records,
        "summary": summarize([r["distance"] for r in records], tol),
        "histogram": {"edges": [float(e) for e in rep.bin_edges],
                      "counts": [int(c) for c in rep.histogram]},
    }


def records_csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(report["config"], sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "distance", "converged", "iterations", "support_size"])
    for r in report["records"]:
        w.writerow([r["id"], "" if r["distance"] is None else repr(r["distance"]),
                    int(r["converged"]), r["iterations"], r["support_size"]])
    return buf.getvalue()


def run_distances(cfg: dict) -> dict:
    prep = prepare(cfg)
    report = distance_report(cfg, prep, _queries(cfg, prep))
    out = _out_dir(cfg)
    (out / "distances.json").write_text(dumps(report))
    (out / "distances.csv").write_text(records_csv(report))
    log.info("wrote %s", out / "distances.json")
    return report


# --- projection artifacts --------------------------------------------------

def _projection_record(q, train: Split, solver: SolverConfig) -> tuple[dict, object]:
    D = SampleMatrix(train.features)
    res = sketched_project(q, D, solver)
    near_i, near_d = nearest_sample(q, D)
    support = [{"row": i, "id": int(train.ids[i]), "coefficient": c} for i, c in res.support]
    rec = {
        "distance": res.distance,
        "converged": res.converged,
        "kkt_residual": res.kkt_residual,
        "iterations": res.iterations,
        "support": support,
        "coefficient_sum": float(sum(s["coefficient"] for s in support)),
        "nearest": {"row": near_i, "id": int(train.ids[near_i]), "distance": near_d},
    }
    return rec, res


def _write_images(out: Path, q, res, nearest_row, shape) -> list:
    out.mkdir(parents=True, exist_ok=True)
    ext = "pgm" if shape[2] == 1 else "ppm"
    files = {
        "original": q,
        "perturbation": perturbation(q, res),
        "hull_point": res.hull_point,
        "nearest": nearest_row,
    }
    written = []
    for name, row in files.items():
        path = out / f"{name}.{ext}"
        images.write_pnm(path, unflatten(row, shape))
        written.append(path.name)
    return written


def run_project(cfg: dict) -> dict:
    prep = prepare(cfg)
    queries = _queries(cfg, prep)
    pcfg = cfg["project"]
    qi = int(pcfg.get("query_index", 0))
    if not 0 <= qi < queries.features.shape[0]:
        raise InputError(f"query index {qi} out of range [0, {queries.features.shape[0]})")
    solver = solver_config(cfg)
    q = queries.features[qi]
    out = _out_dir(cfg)
    rec, res = _projection_record(q, prep.train, solver)
    report = {"config": cfg, "query_index": qi, "query_id": int(queries.ids[qi]), "all_classes": rec}
    if prep.space == "pixel":
        rec["images"] = _write_images(out, q, res, prep.train.features[rec["nearest"]["row"]], prep.shape)
    if pcfg.get("per_class"):
        if prep.train.labels is None:
            raise InputError("per-class projection needs labelled training data")
        per = {}
        for c in np.unique(prep.train.labels):
            rows = np.flatnonzero(prep.train.labels == c)
            split = Split(prep.train.features[rows], prep.train.labels[rows], prep.train.ids[rows])
            crec, cres = _projection_record(q, split, solver)
            if prep.space == "pixel":
                crec["images"] = _write_images(out / f"class_{int(c)}", q, cres,
                                               split.features[crec["nearest"]["row"]], prep.shape)
            per[str(int(c))] = crec
        report["per_class"] = per
    (out / "support.json").write_text(dumps(report))
    return report


# --- random baselines ------------------------------------------------------

def run_baselines(cfg: dict) -> dict:
    """Real, pixel-shuffled and uniform-random variants under one solver config."""
    cfg = merge(cfg, {"space": {"kind": "pixel"}})
    prep = prepare(cfg)
    if prep.shape is None:
        raise InputError("baselines need image data")
    seed = int(cfg["baselines"].get("seed", 0))
    from hullgap.datasets import LabeledImages
    tr = LabeledImages(prep.train.features, prep.train.labels, prep.shape)
    te = LabeledImages(prep.test.features, prep.test.labels, prep.shape)
    s_tr, s_te = shuffle_pixels(tr, te, seed=seed)
    d = tr.d
    variants = {
        "real": (prep.train, prep.test),
        "shuffled": (Split(s_tr.images, None, prep.train.ids), Split(s_te.images, None, prep.test.ids)),
        "random": (Split(random_dataset(tr.n, d, 0.0, 255.0, seed).data, None, np.arange(tr.n)),
                   Split(random_dataset(te.n, d, 0.0, 255.0, seed + 1).data, None, np.arange(te.n))),
    }
    results = {}
    for name, (train, test) in variants.items():
        vprep = Prepared(train, test, prep.shape, "pixel")
        rep = distance_report(cfg, vprep, test)
        results[name] = {"summary": rep["summary"],
                         "distances": [r["distance"] for r in rep["records"]]}
        log.info("%s: median %.3f", name, rep["summary"]["median"])
    med = {k: v["summary"]["median"] for k, v in results.items()}
    report = {
        "config": cfg,
        "variants": results,
        "medians": med,
        "ratios": {
            "shuffled_over_real": med["shuffled"] / med["real"],
            "random_over_real": med["random"] / med["real"],
            "random_over_shuffled": med["random"] / med["shuffled"],
        },
    }
    out = _out_dir(cfg)
    (out / "baselines.json").write_text(dumps(report))
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(cfg, sort_keys=True) + "\n")
    buf.write("variant,median,mean,min,max\n")
    for name, v in results.items():
        s = v["summary"]
        buf.write(f"{name},{s['median']!r},{s['mean']!r},{s['min']!r},{s['max']!r}\n")
    (out / "baselines.csv").write_text(buf.getvalue())
    return report


# --- decision boundaries ---------------------------------------------------

RED_RGB = (214, 39, 40)
BLUE_RGB = (31, 119, 180)


def grid_image(grid) -> np.ndarray:
    """RGB rendering of a grid: class colour, lightened outside the hull."""
    rgb = np.where(grid.labels[..., None] == BLUE, BLUE_RGB, RED_RGB).astype(np.float64)
    outside = ~grid.inside
    rgb[outside] = 255 - 0.5 * (255 - rgb[outside])
    return rgb[::-1]  # row 0 of the image is the top of the domain


def _runs(bcfg: dict) -> list:
    if bcfg.get("runs"):
        return [(int(r["width"]), int(r.get("seed", 0))) for r in bcfg["runs"]]
    return [(int(w), int(s)) for w in bcfg["widths"] for s in bcfg["seeds"]]


def run_boundary(cfg: dict) -> dict:
    bcfg = cfg["boundary"]
    dcfg = bcfg["data"]
    data = gen_two_class(int(dcfg["n_per_class"]), float(dcfg["margin"]),
                         tuple(dcfg["bounds"]), int(dcfg["seed"]))
    hull = hull_2d(data.points)
    domain = tuple(float(v) for v in bcfg["domain"])
    resolution = tuple(int(v) for v in bcfg["resolution"])
    out = _out_dir(cfg)
    runs, grids = [], []
    for width, seed in _runs(bcfg):
        name = f"w{width}_s{seed}"
        entry = {"name": name, "width": width, "seed": seed}
        try:
            regime = TrainRegime(**merge(bcfg.get("regime", {}), {"seed": seed}))
            res = train_with_restarts(data, width, regime, int(bcfg.get("restarts", 5)))
        except HullgapError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            runs.append(entry)
            grids.append(None)
            continue
        grid = grid_eval(res.model, domain, resolution, hull)
        images.write_pnm(out / f"grid_{name}.ppm", grid_image(grid))
        entry.update({
            "train_accuracy": res.accuracy,
            "best_loss": float(min(res.losses)),
            "best_epoch": res.best_epoch,
            "components_inside": boundary_component_count(grid, "inside"),
            "components_outside": boundary_component_count(grid, "outside"),
            "image": f"grid_{name}.ppm",
        })
        runs.append(entry)
        grids.append(grid)
    pairs = []
    for i, j in combinations(range(len(runs)), 2):
        if grids[i] is None or grids[j] is None:
            continue
        dis = region_disagreement(grids[i], grids[j])
        pairs.append({"a": runs[i]["name"], "b": runs[j]["name"], **dis})
    report = {
        "config": cfg,
        "hull_vertices": hull.vertices.tolist(),
        "runs": runs,
        "pairs": pairs,
    }
    (out / "boundary.json").write_text(dumps(report))
    return report
