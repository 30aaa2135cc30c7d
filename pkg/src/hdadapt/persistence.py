"""Versioned model container.

A container is a zip archive holding ``meta.json`` (format version,
hyperparameters, seeds, class and domain ids) plus one ``.npy`` member per
array: encoder anchors, signatures and value ranges, per-domain prototypes,
descriptors and descriptor counts. Members are written in a fixed order with
a fixed timestamp, so saving the same model twice gives identical bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, HDEncoder
from .estimators import DomainAdaptiveHDClassifier, PooledHDClassifier

FORMAT = "hdadapt-model"
FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _jsonable(values):
    return [v.item() if hasattr(v, "item") else v for v in values]


def _write_member(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_model(clf, path) -> None:
    """Write a fitted classifier and its encoder to ``path``."""
    cfg: EncoderConfig = clf.encoder_.config_
    kind = "adaptive" if isinstance(clf, DomainAdaptiveHDClassifier) else "pooled"
    meta = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "kind": kind,
        "params": clf.get_params(),
        "d": cfg.d,
        "ngram": cfg.ngram,
        "encoder_seed": int(cfg.seed),
        "n_sensors": cfg.n_sensors,
        "classes": _jsonable(clf.classes_),
    }
    arrays = {
        "anchors_min": cfg.anchors_min,
        "anchors_max": cfg.anchors_max,
        "signatures": cfg.signatures,
        "ranges": cfg.ranges,
        "prototypes": clf.prototypes_,
    }
    if kind == "adaptive":
        meta["domains"] = _jsonable(clf.domains_)
        meta["n_domains"] = len(clf.domains_)
        arrays["descriptors"] = clf.descriptors_
        arrays["descriptor_counts"] = clf.descriptor_counts_
    meta["n_classes"] = len(clf.classes_)

    with zipfile.ZipFile(path, "w") as zf:
        _write_member(zf, "meta.json", json.dumps(meta, sort_keys=True, indent=1).encode())
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            _write_member(zf, f"{name}.npy", buf.getvalue())


def load_model(path):
    """Rebuild the classifier saved by :func:`save_model`."""
    path = Path(path)
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != FORMAT:
            raise ValueError(f"{path}: not a model container")
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported container version {meta.get('version')}")
        arrays = {
            name[:-4]: np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
            for name in zf.namelist()
            if name.endswith(".npy")
        }

    cls = DomainAdaptiveHDClassifier if meta["kind"] == "adaptive" else PooledHDClassifier
    clf = cls(**meta["params"])
    encoder = HDEncoder(dim=meta["d"], ngram=meta["ngram"], random_state=meta["encoder_seed"],
                        n_jobs=meta["params"].get("n_jobs"))
    encoder.config_ = EncoderConfig(
        d=meta["d"],
        ngram=meta["ngram"],
        anchors_min=arrays["anchors_min"],
        anchors_max=arrays["anchors_max"],
        signatures=arrays["signatures"],
        ranges=arrays["ranges"],
        seed=meta["encoder_seed"],
    )
    encoder.n_sensors_ = meta["n_sensors"]
    clf.encoder_ = encoder
    clf.classes_ = np.asarray(meta["classes"])
    clf.prototypes_ = arrays["prototypes"]
    if meta["kind"] == "adaptive":
        clf.domains_ = np.asarray(meta["domains"])
        clf.descriptors_ = arrays["descriptors"]
        clf.descriptor_counts_ = arrays["descriptor_counts"]
        clf._scorer = None
    return clf
