"""Versioned JSON persistence for trained models.

Floats are written with Python's shortest round-trip repr, so
write -> read -> write reproduces the file byte for byte on any platform.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import FeatureWindowing, Normalization
from .errors import ConfigError
from .fastsum import FastsumConfig
from .ipm import TrainedModel
from .kernels import AnovaKernelSpec

FORMAT = "kis-model"
VERSION = 1


def _floats(a):
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def model_to_dict(model):
    w = model.spec.windowing
    fs = model.fastsum
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "n_train": int(model.points.shape[0]),
        "d": int(model.points.shape[1]),
        "C": float(model.C),
        "bias": float(model.bias),
        "multiplier": float(model.multiplier),
        "sv_tol": float(model.sv_tol),
        "support": [int(j) for j in model.support],
        "kernel": {
            "windows": [list(win) for win in w.windows],
            "weights": _floats(w.weights),
            "length_scales": _floats(w.length_scales),
        },
        "fastsum": {
            "bandwidth": fs.bandwidth,
            "cutoff": fs.cutoff,
            "oversampling": float(fs.oversampling),
            "torus_radius": None if fs.torus_radius is None else float(fs.torus_radius),
            "margin": float(fs.margin),
        },
        "normalization": None if model.normalization is None else {
            "mean": _floats(model.normalization.mean),
            "std": _floats(model.normalization.std),
        },
        "alpha": _floats(model.alpha),
        "labels": _floats(model.labels),
        "points": [_floats(row) for row in model.points],
    }
    return doc


def dumps(model):
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True, allow_nan=False) + "\n"


def save_model(model, path):
    Path(path).write_text(dumps(model), encoding="utf-8", newline="\n")


def _require(doc, key, where="model"):
    try:
        return doc[key]
    except (KeyError, TypeError):
        raise ConfigError(f"{where}: missing field {key!r}") from None


def model_from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ConfigError("not a model file")
    if doc.get("version") != VERSION:
        raise ConfigError(f"unsupported model version {doc.get('version')!r}")
    try:
        k = _require(doc, "kernel")
        points = np.asarray(_require(doc, "points"), dtype=float)
        d = int(_require(doc, "d"))
        points = points.reshape(-1, d)
        windowing = FeatureWindowing(
            tuple(tuple(w) for w in _require(k, "windows", "kernel")),
            _require(k, "weights", "kernel"), _require(k, "length_scales", "kernel"), n_features=d)
        fs = FastsumConfig(**_require(doc, "fastsum"))
        norm = doc.get("normalization")
        norm = None if norm is None else Normalization(
            np.asarray(norm["mean"], dtype=float), np.asarray(norm["std"], dtype=float))
        alpha = np.asarray(_require(doc, "alpha"), dtype=float)
        labels = np.asarray(_require(doc, "labels"), dtype=float)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"malformed model file: {exc}") from None
    if not (alpha.shape == labels.shape == (points.shape[0],)):
        raise ConfigError("model arrays have inconsistent lengths")
    return TrainedModel(
        alpha=alpha, bias=float(_require(doc, "bias")), labels=labels, points=points,
        spec=AnovaKernelSpec(windowing), normalization=norm, fastsum=fs,
        C=float(_require(doc, "C")), multiplier=float(doc.get("multiplier", 0.0)),
        sv_tol=float(doc.get("sv_tol", 0.0)),
    )


def loads(text, source="<string>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid model JSON ({exc.msg})") from None
    return model_from_dict(doc)


def load_model(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read model file {path}: {exc.strerror}") from None
    return loads(text, str(path))
