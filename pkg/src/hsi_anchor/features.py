"""Spatial-spectral features: band selection, LBP texture histograms, stacking."""
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "LbpParams",
    "BandSelection",
    "FeatureMatrix",
    "select_bands_lpe",
    "lbp_code",
    "lbp_codes",
    "uniform_bin",
    "n_bins",
    "lbp_histogram_image",
    "stack_features",
    "normalize_columns",
    "sample_feature_subset",
]


@dataclass(frozen=True)
class LbpParams:
    """LBP operator settings.

    ``window`` is the side of the square patch the code histogram is taken
    over; the code itself compares ``neighbors`` points on a circle of
    ``radius`` pixels. ``sampling="grid"`` snaps circle points to the nearest
    pixel (for P=8, r=1 that is the classic 3x3 ring), ``"bilinear"``
    interpolates off-grid points.
    """

    neighbors: int = 8
    radius: float = 1
    window: int = 7
    mapping: str = "uniform_u2"
    sampling: str = "grid"

    def __post_init__(self):
        if self.neighbors not in (4, 8, 16):
            raise ValueError(f"neighbors must be 4, 8 or 16, got {self.neighbors}")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.mapping not in ("uniform_u2", "raw"):
            raise ValueError(f"unknown mapping {self.mapping!r}")
        if self.sampling not in ("grid", "bilinear"):
            raise ValueError(f"unknown sampling {self.sampling!r}")


@dataclass(frozen=True)
class BandSelection:
    indices: tuple
    scores: tuple

    def __len__(self):
        return len(self.indices)


@dataclass
class FeatureMatrix:
    """Row-per-pixel feature matrix with a provenance tag per column."""

    values: np.ndarray
    column_provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature values must be a 2-D array")
        if not self.column_provenance:
            self.column_provenance = [f"col-{j}" for j in range(self.values.shape[1])]
        if len(self.column_provenance) != self.values.shape[1]:
            raise ValueError("one provenance tag per column is required")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def columns(self, idx):
        idx = list(idx)
        return FeatureMatrix(self.values[:, idx], [self.column_provenance[j] for j in idx])


# ---------------------------------------------------------------------------
# band selection


def _sample_rows(pixels, sample_cap):
    stride = max(1, math.ceil(pixels.shape[0] / sample_cap))
    return pixels[::stride][:sample_cap]


def select_bands_lpe(cube, n_select, sample_cap=4096):
    """Greedy band selection by linear prediction error.

    The first two bands are the ordered pair ``(i, j)`` for which ``j`` is
    worst predicted by an affine function of ``i``. Each further band is the
    one with the largest least-squares residual against the affine span of
    the bands already chosen. Ties go to the lowest band index.

    Parameters
    ----------
    cube : HsiCube
    n_select : int
        Number of bands to return, ``1 <= n_select <= cube.bands``.
    sample_cap : int
        Pixels are subsampled with a fixed stride down to at most this many.

    Returns
    -------
    BandSelection
        Indices in selection order; ``scores[t]`` is the residual norm of the
        band picked at step ``t`` (for the first band, its centered norm).
    """
    if not 1 <= n_select <= cube.bands:
        raise ValueError(f"n_select must lie in [1, {cube.bands}], got {n_select}")
    if sample_cap < n_select + 1:
        raise ValueError("sample_cap must be at least n_select + 1")
    X = _sample_rows(cube.pixels(), sample_cap)
    if X.shape[0] < 2 and n_select > 1:
        raise ValueError("cannot rank band predictability from a single pixel")
    Xc = X - X.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=0)
    # residuals below this are exact linear dependence up to rounding
    tiny = 1e-10 * max(float(norms.max()), 1e-300)

    def clean(r):
        return np.where(r <= tiny, 0.0, r)

    def first_max(r):
        # residuals equal up to rounding count as ties -> lowest index
        r = np.ravel(r)
        top = r.max()
        return int(np.flatnonzero(r >= top - 1e-9 * abs(top) - tiny)[0])

    if n_select == 1:
        b = first_max(clean(norms))
        return BandSelection((b,), (float(norms[b]),))

    G = Xc.T @ Xc
    diag = np.diag(G).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = np.where(diag[:, None] > 0, G**2 / diag[:, None], 0.0)
    R = clean(np.sqrt(np.clip(diag[None, :] - proj, 0.0, None)))
    np.fill_diagonal(R, -np.inf)
    i, j = np.unravel_index(first_max(R), R.shape)
    selected = [int(i), int(j)]
    scores = [float(norms[i]), float(R[i, j])]

    while len(selected) < n_select:
        rest = [b for b in range(cube.bands) if b not in selected]
        A = Xc[:, selected]
        coef, *_ = np.linalg.lstsq(A, Xc[:, rest], rcond=None)
        resid = clean(np.linalg.norm(Xc[:, rest] - A @ coef, axis=0))
        t = first_max(resid)
        selected.append(rest[t])
        scores.append(float(resid[t]))
    return BandSelection(tuple(selected), tuple(scores))


# ---------------------------------------------------------------------------
# LBP


def _offsets(params):
    p = np.arange(params.neighbors)
    theta = 2 * np.pi * p / params.neighbors
    # x to the right, y down: increasing p walks clockwise on screen
    dx = np.round(params.radius * np.cos(theta), 12)
    dy = np.round(params.radius * np.sin(theta), 12)
    if params.sampling == "grid":
        dx, dy = np.rint(dx), np.rint(dy)
    return dy, dx


def _pad_width(params):
    return int(math.ceil(params.radius)) + 1


def _sample(padded, ys, xs, dy, dx):
    """Value at ``(ys + dy, xs + dx)`` of a padded raster, bilinear off-grid."""
    y0 = math.floor(dy)
    x0 = math.floor(dx)
    fy = dy - y0
    fx = dx - x0
    yy = ys + y0
    xx = xs + x0
    if fy == 0 and fx == 0:
        return padded[yy, xx]
    top = (1 - fx) * padded[yy, xx] + fx * padded[yy, xx + 1]
    bottom = (1 - fx) * padded[yy + 1, xx] + fx * padded[yy + 1, xx + 1]
    return (1 - fy) * top + fy * bottom


def _codes_at(band, ys, xs, params):
    band = np.asarray(band, dtype=np.float64)
    pad = _pad_width(params)
    padded = np.pad(band, pad, mode="reflect")
    ys = np.asarray(ys) + pad
    xs = np.asarray(xs) + pad
    center = padded[ys, xs]
    codes = np.zeros(np.shape(ys), dtype=np.int64)
    for p, (dy, dx) in enumerate(zip(*_offsets(params))):
        codes |= (_sample(padded, ys, xs, float(dy), float(dx)) > center).astype(np.int64) << p
    return codes


def lbp_code(band, x, y, params=LbpParams()):
    """LBP code of pixel ``(x, y)``: bit ``p`` is set iff neighbor ``p`` > center."""
    return int(_codes_at(band, np.array([y]), np.array([x]), params)[0])


def lbp_codes(band, params=LbpParams()):
    """LBP code of every pixel of a 2-D raster, same shape as ``band``."""
    band = np.asarray(band, dtype=np.float64)
    ys, xs = np.indices(band.shape)
    return _codes_at(band, ys, xs, params)


@lru_cache(maxsize=None)
def _uniform_table(P):
    codes = np.arange(1 << P)
    rotated = ((codes >> 1) | ((codes & 1) << (P - 1)))
    transitions = np.array([bin(v).count("1") for v in codes ^ rotated])
    uniform = transitions <= 2
    table = np.full(1 << P, P * (P - 1) + 2, dtype=np.int64)
    table[uniform] = np.arange(int(uniform.sum()))
    table.setflags(write=False)
    return table


def uniform_bin(code, P):
    """Histogram bin of ``code`` under the u2 uniform mapping.

    Uniform codes (at most two circular 0/1 transitions) each get their own
    bin, ordered by code value; every other code lands in the last bin.
    """
    if not 0 <= code < (1 << P):
        raise ValueError(f"code {code} out of range for P={P}")
    return int(_uniform_table(P)[code])


def n_bins(params):
    P = params.neighbors
    return P * (P - 1) + 3 if params.mapping == "uniform_u2" else 1 << P


def _mapped_codes(band, params):
    codes = lbp_codes(band, params)
    if params.mapping == "uniform_u2":
        codes = _uniform_table(params.neighbors)[codes]
    return codes


def lbp_histogram_image(band, params=LbpParams()):
    """Per-pixel LBP histograms over a ``window x window`` patch.

    Returns an ``(n_pixels, n_bins)`` array in row-major pixel order; each
    row sums to one. Patches that run off the raster are reflected back in.
    """
    mapped = _mapped_codes(band, params)
    h, w = mapped.shape
    half = params.window // 2
    padded = np.pad(mapped, half, mode="reflect")
    nb = n_bins(params)
    onehot = np.zeros(padded.shape + (nb,), dtype=np.int32)
    np.put_along_axis(onehot, padded[..., None], 1, axis=2)
    # integral image, exact in integers
    S = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1, nb), dtype=np.int64)
    S[1:, 1:] = onehot.cumsum(axis=0).cumsum(axis=1)
    k = params.window
    counts = S[k:k + h, k:k + w] - S[:h, k:k + w] - S[k:k + h, :w] + S[:h, :w]
    return counts.reshape(h * w, nb) / float(k * k)


# ---------------------------------------------------------------------------
# stacking


def normalize_columns(values):
    """Min-max scale every column to [0, 1]; constant columns become 0."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min(axis=0)
    span = values.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = (values - lo) / safe
    out[:, span <= 0] = 0.0
    return np.clip(out, 0.0, 1.0)


def _scale_block(block):
    lo = block.min()
    span = block.max() - lo
    if span <= 0:
        return np.zeros_like(block)
    out = np.clip((block - lo) / span, 0.0, 1.0)
    out[:, block.min(axis=0) == block.max(axis=0)] = 0.0
    return out


def stack_features(cube, selection, params=LbpParams(), scaling="block"):
    """Concatenate LBP histograms and raw reflectance of the selected bands.

    Column layout: ``n_bins`` histogram columns per selected band (in
    selection order), followed by one spectral column per selected band.

    With ``scaling="block"`` (default) the histogram columns of one band
    share a single min-max map, so relative bin frequencies are kept, while
    each spectral column is min-max scaled on its own. ``scaling="column"``
    min-max scales every column independently, which stretches rarely used
    bins by up to ``window**2`` and lets their counting noise swamp the
    spectral columns. Either way every column ends up in [0, 1] and constant
    columns become 0.
    """
    if scaling not in ("block", "column"):
        raise ValueError(f"unknown scaling {scaling!r}")
    for b in selection.indices:
        if not 0 <= b < cube.bands:
            raise ValueError(f"band {b} not in cube with {cube.bands} bands")
    nb = n_bins(params)
    blocks, tags = [], []
    for b in selection.indices:
        hist = lbp_histogram_image(cube.band(b), params)
        blocks.append(_scale_block(hist) if scaling == "block" else hist)
        tags.extend(f"lbp-band-{b}-bin-{q}" for q in range(nb))
    spectral = cube.pixels()[:, list(selection.indices)]
    blocks.append(normalize_columns(spectral) if scaling == "block" else spectral)
    tags.extend(f"spectral-band-{b}" for b in selection.indices)
    values = np.hstack(blocks)
    if scaling == "column":
        values = normalize_columns(values)
    return FeatureMatrix(values, tags)


def sample_feature_subset(d_total, k_ss, seed):
    """``k_ss`` distinct column indices drawn uniformly, sorted ascending."""
    if not 1 <= k_ss <= d_total:
        raise ValueError(f"k_ss must lie in [1, {d_total}], got {k_ss}")
    rng = np.random.default_rng(seed)
    return sorted(int(j) for j in rng.choice(d_total, size=k_ss, replace=False))
