"""JSON documents for datasets, parameters, fit results and classifiers.

Floats are written with Python's shortest round-trip ``repr``, so parsing a
written file gives back bit-identical doubles.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path as FsPath

import numpy as np

from .classify import ClassBank, ClassifierModel, LabeledDataset
from .core import Dataset, HawkesParams, Path, ThetaEstimate, ValidationError

SCHEMA_VERSION = 1


def _dump(doc, path):
    text = json.dumps(doc, indent=1, allow_nan=False)
    FsPath(path).write_text(text + "\n", encoding="utf-8")


def _load(path, kind):
    try:
        doc = json.loads(FsPath(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"{path}: unsupported schema_version {version!r}")
    if kind is not None and doc.get("kind", kind) != kind:
        raise ValidationError(f"{path}: expected a {kind!r} document, got {doc.get('kind')!r}")
    return doc


def _require(doc, key, path):
    if key not in doc:
        raise ValidationError(f"{path}: missing field {key!r}")
    return doc[key]


def _floats(values):
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _matrix(values):
    return [_floats(row) for row in np.asarray(values, dtype=float)]


def dataset_to_doc(data: Dataset, labels=None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "kind": "dataset",
           "end_time": float(data.end_time), "d": data.dim,
           "paths": [[_floats(e) for e in p.events] for p in data.paths]}
    if labels is not None:
        doc["labels"] = [int(y) for y in labels]
    return doc


def dataset_from_doc(doc: dict, where="<document>") -> Dataset:
    end_time = _require(doc, "end_time", where)
    d = _require(doc, "d", where)
    raw = _require(doc, "paths", where)
    if not isinstance(raw, list):
        raise ValidationError(f"{where}: 'paths' must be a list")
    paths = []
    for i, p in enumerate(raw):
        if not isinstance(p, list) or len(p) != d:
            raise ValidationError(f"{where}: path {i} must list {d} timestamp arrays")
        paths.append(Path(tuple(np.array(e, dtype=float) for e in p), float(end_time)))
    if not paths:
        raise ValidationError(f"{where}: dataset has no paths")
    return Dataset(tuple(paths), float(end_time))


def write_dataset(path, data: Dataset, labels=None):
    _dump(dataset_to_doc(data, labels), path)


def read_dataset(path) -> Dataset:
    return dataset_from_doc(_load(path, "dataset"), path)


def read_labeled(path) -> LabeledDataset:
    doc = _load(path, "dataset")
    if "labels" not in doc:
        raise ValidationError(f"{path}: dataset has no 'labels' field")
    return LabeledDataset(dataset_from_doc(doc, path), doc["labels"], doc.get("n_classes"))


def write_labeled(path, data: LabeledDataset):
    doc = dataset_to_doc(data.data, data.labels)
    doc["n_classes"] = int(data.n_classes)
    _dump(doc, path)


def params_to_doc(params) -> dict:
    if isinstance(params, ClassBank):
        return {"schema_version": SCHEMA_VERSION, "kind": "params",
                "beta": float(params.beta), "weights": _floats(params.weights),
                "classes": [{"mu": _floats(p.mu), "alpha": _matrix(p.alpha)}
                            for p in params.params]}
    return {"schema_version": SCHEMA_VERSION, "kind": "params",
            "mu": _floats(params.mu), "alpha": _matrix(params.alpha), "beta": float(params.beta)}


def _params(entry, beta, where):
    try:
        mu = np.array(_require(entry, "mu", where), dtype=float)
        alpha = np.array(_require(entry, "alpha", where), dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: mu and alpha must be numeric arrays") from None
    return HawkesParams(mu, alpha, float(beta))


def params_from_doc(doc: dict, where="<document>"):
    beta = _require(doc, "beta", where)
    if "classes" in doc:
        classes = [_params(c, beta, where) for c in doc["classes"]]
        weights = doc.get("weights", [1.0 / len(classes)] * len(classes))
        return ClassBank(tuple(classes), np.array(weights, dtype=float))
    return _params(doc, beta, where)


def write_params(path, params):
    _dump(params_to_doc(params), path)


def read_params(path):
    return params_from_doc(_load(path, "params"), path)


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


def fit_result_to_doc(result, score=None) -> dict:
    trace = result.trace
    return {"schema_version": SCHEMA_VERSION, "kind": "fit",
            "mu_hat": _floats(result.theta_hat.mu_hat),
            "alpha_hat": _matrix(result.theta_hat.alpha_hat),
            "beta": float(result.config.decay), "loss": result.config.loss,
            "penalty": result.config.penalty, "selected_kappa": float(result.selected_kappa),
            "converged": trace.converged, "n_iter": trace.n_iter,
            "trace": [{"iteration": r.iteration, "loss": r.loss, "objective": r.objective,
                       "tolerance": _finite_or_none(r.tolerance)} for r in trace.records],
            "calibration": result.calibration,
            "score": None if score is None else float(score)}


def write_fit_result(path, result, score=None):
    _dump(fit_result_to_doc(result, score), path)


def read_estimate(path) -> ThetaEstimate:
    """Interaction estimate from a fit file, or true parameters from a params file."""
    doc = _load(path, None)
    if doc.get("kind") not in ("fit", "params"):
        raise ValidationError(f"{path}: expected a fit or params document, got {doc.get('kind')!r}")
    if doc["kind"] == "params":
        p = params_from_doc(doc, path)
        if isinstance(p, ClassBank):
            raise ValidationError(f"{path}: expected single-process parameters, got a class bank")
        return ThetaEstimate(p.mu, p.alpha)
    try:
        return ThetaEstimate(np.array(_require(doc, "mu_hat", path), dtype=float),
                             np.array(_require(doc, "alpha_hat", path), dtype=float))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed estimate ({exc})") from None


def classifier_to_doc(model: ClassifierModel) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "classifier", "method": model.method,
            "beta": float(model.beta), "p_hat": _floats(model.p_hat),
            "classes": [{"mu": _floats(t.mu_hat), "alpha": _matrix(t.alpha_hat)}
                        for t in model.theta_hat],
            "supports": None if model.supports is None
            else [[[bool(v) for v in row] for row in s] for s in model.supports]}


def write_classifier(path, model: ClassifierModel):
    _dump(classifier_to_doc(model), path)


def read_classifier(path) -> ClassifierModel:
    doc = _load(path, "classifier")
    thetas = tuple(ThetaEstimate(np.array(c["mu"], dtype=float), np.array(c["alpha"], dtype=float))
                   for c in _require(doc, "classes", path))
    supports = doc.get("supports")
    if supports is not None:
        supports = tuple(np.array(s, dtype=bool) for s in supports)
    return ClassifierModel(np.array(doc["p_hat"], dtype=float), thetas, float(doc["beta"]),
                           supports, doc.get("method", "erm"))


def write_csv_matrix(path, matrix, header=None):
    """Write a 1-D or 2-D array as CSV with full-precision values."""
    m = np.atleast_2d(np.asarray(matrix))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row in m:
            w.writerow([repr(float(v)) if m.dtype.kind == "f" else str(v) for v in row])


def read_csv_matrix(path, header=False) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    return np.array([[float(v) for v in row] for row in rows])
