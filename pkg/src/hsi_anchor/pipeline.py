"""End-to-end run: bands -> features -> split -> ensemble -> vote -> metrics."""
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .ensemble import EnsembleConfig, train_members, vote
from .features import select_bands_lpe, stack_features
from .hsi_io import LabelField, SyntheticSpec, load_cube, load_labels, make_synthetic_cube, save_label_map
from .metrics import confusion, summarize
from .ssl_solver import LabeledSet

__all__ = ["RunConfig", "split_labels", "run_pipeline", "DEFAULT_MAX_BANDS"]

log = logging.getLogger(__name__)

DEFAULT_MAX_BANDS = 20


@dataclass(frozen=True)
class RunConfig:
    """Inputs and knobs for one run.

    Either the three file paths or ``synthetic`` must be given.
    ``n_bands`` defaults to ``min(20, bands)``.
    """

    cube_path: str = None
    header_path: str = None
    labels_path: str = None
    synthetic: SyntheticSpec = None
    train_fraction: float = 0.05
    n_bands: int = None
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    out_dir: str = "out"
    seed: int = 0
    include_train_in_metrics: bool = False
    lpe_sample_cap: int = 4096

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ValueError(f"train_fraction must lie in (0, 1], got {self.train_fraction}")
        files = (self.cube_path, self.header_path, self.labels_path)
        if self.synthetic is None and None in files:
            raise ValueError("give --input, --header and --labels, or --synthetic")
        if self.synthetic is not None and any(f is not None for f in files):
            raise ValueError("--synthetic cannot be combined with input files")

    def to_dict(self):
        d = asdict(self)
        d["ensemble"].pop("n_jobs")
        return d


def split_labels(field, fraction, seed):
    """Stratified random split of the labeled pixels.

    From each class with ``count`` pixels, ``ceil(fraction * count)`` are
    drawn without replacement for training. Returns the ``LabeledSet`` and
    the sorted indices of the remaining labeled pixels.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    flat = field.flat()
    rng = np.random.default_rng(seed)
    train = []
    for c in range(1, field.n_classes + 1):
        idx = np.flatnonzero(flat == c)
        if idx.size == 0:
            continue
        # guard against 0.07 * 100 == 7.000000000000001
        take = min(idx.size, math.ceil(fraction * idx.size - 1e-9))
        train.append(rng.choice(idx, size=take, replace=False))
    train = np.sort(np.concatenate(train)) if train else np.empty(0, dtype=np.int64)
    holdout = np.setdiff1d(field.labeled_indices(), train)
    labeled = LabeledSet.from_labels(train, flat[train], field.n_classes)
    return labeled, holdout


def _load(config):
    if config.synthetic is not None:
        return make_synthetic_cube(config.synthetic, config.seed)
    for p in (config.cube_path, config.header_path, config.labels_path):
        if not os.path.exists(p):
            raise FileNotFoundError(f"input file not found: {p}")
    cube = load_cube(config.cube_path, config.header_path)
    truth = load_labels(config.labels_path)
    if (truth.width, truth.height) != (cube.width, cube.height):
        raise ValueError(
            f"label raster is {truth.width}x{truth.height}, cube is {cube.width}x{cube.height}"
        )
    if truth.n_classes == 0:
        raise ValueError("label raster has no labeled pixels")
    return cube, truth


def run_pipeline(config):
    """Execute one full run and write ``labels.csv``, ``labels.pgm`` and ``report.json``.

    Returns the report dict.
    """
    timings = {}
    t_start = time.perf_counter()

    def lap(name, t0):
        timings[name] = time.perf_counter() - t0
        log.info("%s: %.3fs", name, timings[name])

    t0 = time.perf_counter()
    cube, truth = _load(config)
    lap("load", t0)

    t0 = time.perf_counter()
    n_bands = config.n_bands or min(DEFAULT_MAX_BANDS, cube.bands)
    selection = select_bands_lpe(cube, n_bands, config.lpe_sample_cap)
    lap("band_selection", t0)

    ens = config.ensemble
    t0 = time.perf_counter()
    features = stack_features(cube, selection, ens.lbp)
    lap("features", t0)

    t0 = time.perf_counter()
    labeled, holdout = split_labels(truth, config.train_fraction, config.seed)
    lap("split", t0)

    k_ss = min(ens.k_ss, features.d)
    ens = replace(ens, k_ss=k_ss)
    t0 = time.perf_counter()
    members = train_members(features, labeled, ens)
    lap("ensemble", t0)

    t0 = time.perf_counter()
    pred = vote(members)
    lap("vote", t0)

    exclude = () if config.include_train_in_metrics else labeled.indices
    cm = confusion(pred, truth, exclude, n_classes=truth.n_classes)
    report = summarize(cm) if cm.total else {"oa": None, "aa": None, "kappa": None,
                                             "per_class": [], "evaluated_pixels": 0}

    t0 = time.perf_counter()
    os.makedirs(config.out_dir, exist_ok=True)
    pred_field = LabelField(cube.width, cube.height, pred.reshape(cube.height, cube.width))
    save_label_map(pred_field, os.path.join(config.out_dir, "labels.csv"))
    lap("write_maps", t0)

    report.update({
        "time_s": time.perf_counter() - t_start,
        "timings": timings,
        "seed": config.seed,
        "config": config.to_dict(),
        "effective_k_ss": k_ss,
        "bands_selected": list(selection.indices),
        "feature_dim": features.d,
        "n_pixels": features.n,
        "n_labeled": int(labeled.indices.size),
        "confusion": cm.counts.tolist(),
        "members": [r.summary() for r in members],
    })
    with open(os.path.join(config.out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    return report
