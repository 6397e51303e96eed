"""Reading, writing and synthesizing hyperspectral cubes and label rasters.

Cubes live on disk as raw little-endian float32 in band-sequential order
with a small JSON sidecar::

    {"width": 145, "height": 145, "bands": 200, "dtype": "float32"}

Label rasters are integer CSV files, one row per image line, with 0 meaning
background / unlabeled.
"""
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HsiCube",
    "LabelField",
    "SyntheticSpec",
    "HsiFormatError",
    "load_cube",
    "save_cube",
    "load_labels",
    "save_label_map",
    "make_synthetic_cube",
]

_DISK_DTYPE = np.dtype("<f4")


class HsiFormatError(ValueError):
    """Raised for malformed cubes, headers or label files."""


@dataclass(frozen=True)
class HsiCube:
    """A width x height x bands reflectance raster.

    ``values`` has shape ``(bands, height, width)`` which is the
    band-sequential memory layout; pixel ``i`` in row-major order sits at
    ``(i // width, i % width)``.
    """

    width: int
    height: int
    bands: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if min(self.width, self.height, self.bands) < 1:
            raise HsiFormatError(
                f"cube dimensions must be >= 1, got {self.width}x{self.height}x{self.bands}"
            )
        values = np.asarray(self.values, dtype=np.float64)
        if values.size != self.width * self.height * self.bands:
            raise HsiFormatError(
                f"cube holds {values.size} values, expected "
                f"{self.width}*{self.height}*{self.bands}"
            )
        values = values.reshape(self.bands, self.height, self.width)
        if not np.all(np.isfinite(values)):
            raise HsiFormatError("cube contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_pixels(self):
        return self.width * self.height

    def band(self, b):
        return self.values[b]

    def pixels(self):
        """Return the ``(n_pixels, bands)`` matrix, rows in row-major pixel order."""
        return self.values.reshape(self.bands, -1).T


@dataclass(frozen=True)
class LabelField:
    """Integer class id per pixel; 0 is background, 1..c are classes."""

    width: int
    height: int
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise HsiFormatError("labels must be integers")
        labels = labels.astype(np.int64).reshape(self.height, self.width)
        if labels.size and labels.min() < 0:
            raise HsiFormatError("labels must be nonnegative")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self):
        return int(self.labels.max()) if self.labels.size else 0

    @property
    def n_pixels(self):
        return self.width * self.height

    def flat(self):
        return self.labels.reshape(-1)

    def labeled_indices(self):
        return np.flatnonzero(self.flat())


def _read_header(header):
    try:
        with open(header) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise HsiFormatError(f"{header}: invalid JSON header ({exc})") from exc
    for key in ("width", "height", "bands"):
        if not isinstance(meta.get(key), int) or isinstance(meta.get(key), bool):
            raise HsiFormatError(f"{header}: header field {key!r} must be an integer")
    if meta.get("dtype") != "float32":
        raise HsiFormatError(f"{header}: unsupported dtype {meta.get('dtype')!r}")
    return meta


def load_cube(path, header):
    """Load a band-sequential float32 cube described by a JSON header.

    Parameters
    ----------
    path : str or os.PathLike
        Raw data file.
    header : str or os.PathLike
        JSON sidecar with ``width``, ``height``, ``bands`` and ``dtype``.

    Returns
    -------
    HsiCube
        Values are read bit-exactly as float32, then widened to float64.
    """
    meta = _read_header(header)
    expected = meta["width"] * meta["height"] * meta["bands"]
    nbytes = os.path.getsize(path)
    if nbytes != expected * _DISK_DTYPE.itemsize:
        raise HsiFormatError(
            f"{path}: size mismatch, file has {nbytes} bytes but header implies "
            f"{expected * _DISK_DTYPE.itemsize}"
        )
    raw = np.fromfile(path, dtype=_DISK_DTYPE)
    return HsiCube(meta["width"], meta["height"], meta["bands"], raw.astype(np.float64))


def save_cube(cube, path, header):
    """Write ``cube`` as raw float32 BSQ plus its JSON header."""
    cube.values.astype(_DISK_DTYPE).tofile(path)
    meta = {"width": cube.width, "height": cube.height, "bands": cube.bands, "dtype": "float32"}
    with open(header, "w") as fh:
        json.dump(meta, fh)


def load_labels(path):
    """Read an integer CSV label raster (height rows x width columns)."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            row = []
            for token in line.split(","):
                token = token.strip()
                try:
                    value = int(token)
                except ValueError:
                    raise HsiFormatError(f"{path}:{lineno}: non-integer token {token!r}") from None
                if value < 0:
                    raise HsiFormatError(f"{path}:{lineno}: negative label {value}")
                row.append(value)
            if rows and len(row) != len(rows[0]):
                raise HsiFormatError(
                    f"{path}:{lineno}: ragged row ({len(row)} values, expected {len(rows[0])})"
                )
            rows.append(row)
    if not rows:
        raise HsiFormatError(f"{path}: empty label file")
    labels = np.array(rows, dtype=np.int64)
    return LabelField(labels.shape[1], labels.shape[0], labels)


def _label_paths(path):
    root, ext = os.path.splitext(os.fspath(path))
    if ext.lower() not in (".csv", ".pgm"):
        root = os.fspath(path)
    return root + ".pgm", root + ".csv"


def save_label_map(field, path):
    """Write ``field`` as a plain PGM (P2) image and as CSV.

    ``path`` may end in ``.pgm`` or ``.csv``; both siblings are written. The
    PGM maxval is ``max(c, 1)`` because the format forbids a zero maxval.
    Returns the ``(pgm_path, csv_path)`` pair.
    """
    if field.labels.size and field.labels.max() > 0xFFFF:
        raise HsiFormatError("labels exceed 16 bits, cannot write PGM")
    pgm_path, csv_path = _label_paths(path)
    lines = [" ".join(str(v) for v in row) for row in field.labels]
    with open(pgm_path, "w") as fh:
        fh.write(f"P2\n{field.width} {field.height}\n{max(field.n_classes, 1)}\n")
        fh.write("\n".join(lines) + "\n")
    with open(csv_path, "w") as fh:
        for row in field.labels:
            fh.write(",".join(str(v) for v in row) + "\n")
    return pgm_path, csv_path


@dataclass(frozen=True)
class SyntheticSpec:
    width: int
    height: int
    bands: int
    classes: int
    class_separation: float = 8.0
    noise_sigma: float = 1.0
    patch_layout: str = "stripes"

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("a synthetic cube needs at least 2 classes")
        if self.class_separation < 0:
            raise ValueError("class_separation must be nonnegative")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        if self.patch_layout not in ("stripes", "blocks"):
            raise ValueError(f"unknown patch_layout {self.patch_layout!r}")


def _stripe_layout(width, height, classes):
    # contiguous runs in row-major order; every class gets >= 1 pixel when classes <= n
    n = width * height
    return (np.arange(n) * classes // n).reshape(height, width) + 1


def _block_layout(width, height, classes):
    gx = math.ceil(math.sqrt(classes))
    gy = math.ceil(classes / gx)
    yy, xx = np.mgrid[0:height, 0:width]
    tile = (yy * gy // height) * gx + (xx * gx // width)
    layout = tile % classes + 1
    if len(np.unique(layout)) < classes:
        return _stripe_layout(width, height, classes)
    return layout


def make_synthetic_cube(spec, seed):
    """Generate a piecewise-constant cube with Gaussian noise.

    Class ``b`` (labels ``1..c``) has mean ``(b - 1) * class_separation *
    noise_sigma`` in every band. The output is a pure function of
    ``(spec, seed)``.
    """
    n = spec.width * spec.height
    if spec.classes > n:
        raise ValueError(f"{spec.classes} classes do not fit in {n} pixels")
    if spec.patch_layout == "stripes":
        layout = _stripe_layout(spec.width, spec.height, spec.classes)
    else:
        layout = _block_layout(spec.width, spec.height, spec.classes)
    rng = np.random.default_rng(seed)
    means = (layout - 1) * spec.class_separation * spec.noise_sigma
    noise = rng.normal(0.0, spec.noise_sigma, size=(spec.bands, spec.height, spec.width))
    # round through float32 so the cube survives a save/load cycle unchanged
    values = (means[None, :, :] + noise).astype(np.float32).astype(np.float64)
    cube = HsiCube(spec.width, spec.height, spec.bands, values)
    return cube, LabelField(spec.width, spec.height, layout)
