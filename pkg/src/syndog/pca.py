"""PCA over flattened sample matrices: texture tensors and mesh vertex sets.

A model is a mean vector, an orthonormal basis (columns) and per-component
variances. New instances are ``mean + basis @ coeffs``; texture-layout
outputs are clamped element-wise to [0, 1].

Fitting goes through the n_samples x n_samples Gram matrix rather than the
feature-space covariance, which keeps a ~930k-feature texture fit cheap.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import as_float_array, check_rng

LAYOUT_GENERIC = "generic"
LAYOUT_TEXTURE = "texture"
LAYOUT_MESH = "mesh"
_LAYOUTS = (LAYOUT_GENERIC, LAYOUT_TEXTURE, LAYOUT_MESH)

ORTHO_TOL = 1e-8
VARIANCE_CUTOFF = 1e-10

DEFAULT_FACE_COUNT = 4848
DEFAULT_TEXEL_RES = 4


def clamp_unit(values):
    """Element-wise clamp to [0, 1]; idempotent."""
    return np.clip(values, 0.0, 1.0)


@dataclass(frozen=True)
class SampleMatrix:
    """Training data, one sample per column.

    ``dims`` records the flattening: ``(f, d)`` for texture layout
    (``f*d*d*d*3`` features), ``(n_vertices,)`` for mesh layout
    (``3*n_vertices`` features), empty for generic.
    """

    data: np.ndarray
    layout: str = LAYOUT_GENERIC
    dims: tuple = ()

    def __post_init__(self):
        data = as_float_array(self.data, "sample matrix")
        if data.ndim != 2:
            raise ValueError("sample matrix must be 2-D (n_features x n_samples)")
        if data.shape[1] < 2:
            raise ValueError("need at least 2 samples to fit a PCA model")
        if self.layout not in _LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.layout == LAYOUT_TEXTURE:
            if data.size and (data.min() < 0.0 or data.max() > 1.0):
                raise ValueError("texture samples must lie in [0, 1]")
            _check_layout_dims(self.layout, self.dims, data.shape[0])
        elif self.layout == LAYOUT_MESH:
            _check_layout_dims(self.layout, self.dims, data.shape[0])
        object.__setattr__(self, "data", data)

    @property
    def n_features(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]


def _check_layout_dims(layout, dims, n_features):
    if layout == LAYOUT_TEXTURE:
        if len(dims) != 2:
            raise ValueError("texture layout requires dims = (f, d)")
        f, d = dims
        if f * d * d * d * 3 != n_features:
            raise ValueError(
                f"texture dims {dims} imply {f * d**3 * 3} features, got {n_features}"
            )
    elif layout == LAYOUT_MESH:
        if len(dims) != 1:
            raise ValueError("mesh layout requires dims = (n_vertices,)")
        if dims[0] * 3 != n_features:
            raise ValueError(
                f"mesh dims {dims} imply {dims[0] * 3} features, got {n_features}"
            )


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray       # (n_features, n_components), orthonormal columns
    variances: np.ndarray   # non-increasing, one per component
    layout: str = LAYOUT_GENERIC
    dims: tuple = ()

    def __post_init__(self):
        mean = as_float_array(self.mean, "mean").reshape(-1)
        basis = as_float_array(self.basis, "basis")
        variances = as_float_array(self.variances, "variances").reshape(-1)
        if basis.ndim != 2 or basis.shape[0] != mean.shape[0]:
            raise ValueError("basis must be (n_features, n_components)")
        if variances.shape[0] != basis.shape[1]:
            raise ValueError("one variance per component required")
        if variances.size and variances.min() < 0:
            raise ValueError("variances must be non-negative")
        if np.any(np.diff(variances) > 0):
            raise ValueError("variances must be sorted descending")
        if self.layout not in _LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "variances", variances)

    @property
    def n_features(self):
        return self.mean.shape[0]

    @property
    def n_components(self):
        return self.basis.shape[1]

    def check_orthonormal(self, tol=ORTHO_TOL):
        gram = self.basis.T @ self.basis
        err = np.abs(gram - np.eye(self.n_components)).max() if self.n_components else 0.0
        if err > tol:
            raise ValueError(f"basis is not orthonormal: max |E'E - I| = {err:.3g}")
        return err


def fit_pca(samples: SampleMatrix, variance_cutoff=VARIANCE_CUTOFF) -> PcaModel:
    """Fit a PCA model from a sample matrix (columns are samples).

    Eigenpairs come from the small Gram matrix of the centered columns;
    components with eigenvalue below ``variance_cutoff`` times the largest
    are dropped, which also enforces the rank bound n_components <= n - 1.
    Basis columns are sign-fixed so their largest-magnitude entry is
    positive, making the model reproducible across eigensolvers.
    """
    data = samples.data
    n = samples.n_samples
    mean = data.mean(axis=1)
    centered = data - mean[:, None]

    gram = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    floor = max(eigvals[0], 0.0) * variance_cutoff if eigvals.size else 0.0
    if floor > 0.0:
        keep = int(np.sum(eigvals >= floor))
    else:
        keep = int(np.sum(eigvals > 0.0))
    keep = min(keep, n - 1)

    basis = np.empty((samples.n_features, keep))
    for i in range(keep):
        col = centered @ eigvecs[:, i]
        col /= np.sqrt(eigvals[i])
        if col[np.argmax(np.abs(col))] < 0:
            col = -col
        basis[:, i] = col

    variances = eigvals[:keep] / (n - 1)
    return PcaModel(mean, basis, variances, layout=samples.layout, dims=samples.dims)


def synthesize(model: PcaModel, coeffs, clamp=None):
    """``basis @ coeffs + mean``; texture-layout output is clamped to [0, 1].

    ``coeffs`` may be shorter than n_components (missing entries are zero).
    Pass ``clamp=False`` to get the raw, pre-clamp vector.
    """
    coeffs = as_float_array(coeffs, "coefficients").reshape(-1)
    k = coeffs.shape[0]
    if k > model.n_components:
        raise ValueError(
            f"{k} coefficients given but model has {model.n_components} components"
        )
    out = model.basis[:, :k] @ coeffs + model.mean
    if clamp is None:
        clamp = model.layout == LAYOUT_TEXTURE
    return clamp_unit(out) if clamp else out


def project(model: PcaModel, sample):
    """Coefficients of a feature vector: ``basis.T @ (sample - mean)``."""
    sample = as_float_array(sample, "sample").reshape(-1)
    if sample.shape[0] != model.n_features:
        raise ValueError(
            f"sample has {sample.shape[0]} features, model expects {model.n_features}"
        )
    return model.basis.T @ (sample - model.mean)


def sample_coefficients(model: PcaModel, rng, scale=1.0):
    """Draw coefficients from per-component truncated normals.

    Component i is N(0, (scale * sqrt(variances[i]))^2) truncated at two
    standard deviations (rejection sampling, so the draw sequence is a pure
    function of the generator state). Zero-variance components yield zero.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = check_rng(rng)
    z = rng.standard_normal(model.n_components)
    bad = np.abs(z) > 2.0
    while np.any(bad):
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > 2.0
    return z * (scale * np.sqrt(model.variances))


# -- texture tensor helpers --------------------------------------------------

def flatten_textures(tensors) -> SampleMatrix:
    """Stack texture tensors ``(n, f, d, d, d, 3)`` into a sample matrix."""
    tensors = as_float_array(tensors, "texture tensors")
    if tensors.ndim != 6 or tensors.shape[2:5] != (tensors.shape[2],) * 3 or tensors.shape[5] != 3:
        raise ValueError("expected texture tensors of shape (n, f, d, d, d, 3)")
    n, f, d = tensors.shape[0], tensors.shape[1], tensors.shape[2]
    data = tensors.reshape(n, -1).T
    return SampleMatrix(data, layout=LAYOUT_TEXTURE, dims=(f, d))


def texture_from_vector(vector, f, d):
    """Reshape a flat texture feature vector back to ``(f, d, d, d, 3)``."""
    vector = np.asarray(vector)
    if vector.size != f * d * d * d * 3:
        raise ValueError("vector length does not match texture dims")
    return vector.reshape(f, d, d, d, 3)


# -- persistence -------------------------------------------------------------

_MAGIC = b"SCPC"
_VERSION = 1
_LAYOUT_CODES = {LAYOUT_GENERIC: 0, LAYOUT_TEXTURE: 1, LAYOUT_MESH: 2}
_LAYOUT_NAMES = {v: k for k, v in _LAYOUT_CODES.items()}

# Stored as float32, so a save/load round trip cannot preserve the fitted
# float64 orthonormality; the loader checks at float32 scale.
LOAD_ORTHO_TOL = 1e-4


def save_pca(model: PcaModel, path):
    """Write the little-endian binary model file (f32 payload)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", _LAYOUT_CODES[model.layout]))
        fh.write(struct.pack("<I", len(model.dims)))
        for dim in model.dims:
            fh.write(struct.pack("<Q", dim))
        fh.write(struct.pack("<QI", model.n_features, model.n_components))
        fh.write(model.mean.astype("<f4").tobytes())
        fh.write(np.ascontiguousarray(model.basis, dtype="<f4").tobytes())
        fh.write(model.variances.astype("<f4").tobytes())


def load_pca(path, check_orthonormal=True) -> PcaModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a PCA model file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        (layout_code,) = struct.unpack("<I", fh.read(4))
        if layout_code not in _LAYOUT_NAMES:
            raise ValueError(f"{path}: unknown layout code {layout_code}")
        (ndims,) = struct.unpack("<I", fh.read(4))
        dims = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndims))
        n_features, n_components = struct.unpack("<QI", fh.read(12))
        mean = np.frombuffer(fh.read(4 * n_features), dtype="<f4").astype(np.float64)
        basis = np.frombuffer(
            fh.read(4 * n_features * n_components), dtype="<f4"
        ).astype(np.float64).reshape(n_features, n_components)
        variances = np.frombuffer(fh.read(4 * n_components), dtype="<f4").astype(np.float64)
    model = PcaModel(mean, basis, variances, layout=_LAYOUT_NAMES[layout_code], dims=dims)
    if check_orthonormal:
        model.check_orthonormal(tol=LOAD_ORTHO_TOL)
    return model


def export_pca_json(model: PcaModel, path, include_arrays=False):
    """Human-inspectable JSON summary; full arrays only on request."""
    doc = {
        "layout": model.layout,
        "dims": list(model.dims),
        "n_features": model.n_features,
        "n_components": model.n_components,
        "variances": model.variances.tolist(),
        "mean_norm": float(np.linalg.norm(model.mean)),
        "orthonormality_error": float(
            np.abs(model.basis.T @ model.basis - np.eye(model.n_components)).max()
            if model.n_components
            else 0.0
        ),
    }
    if include_arrays:
        doc["mean"] = model.mean.tolist()
        doc["basis"] = model.basis.tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- sklearn-facing estimator ------------------------------------------------

class PcaSpace(BaseEstimator, TransformerMixin):
    """Estimator wrapper around the model: rows in, coefficients out.

    ``fit`` takes the usual (n_samples, n_features) orientation,
    ``transform`` projects to coefficients and ``inverse_transform``
    synthesizes feature rows (clamped for texture layout).
    """

    def __init__(self, layout=LAYOUT_GENERIC, dims=(), variance_cutoff=VARIANCE_CUTOFF):
        self.layout = layout
        self.dims = dims
        self.variance_cutoff = variance_cutoff

    def fit(self, X, y=None):
        X = as_float_array(X, "X")
        if X.ndim != 2:
            raise ValueError("X must be 2-D (n_samples, n_features)")
        samples = SampleMatrix(X.T, layout=self.layout, dims=tuple(self.dims))
        self.model_ = fit_pca(samples, variance_cutoff=self.variance_cutoff)
        self.n_components_ = self.model_.n_components
        return self

    def transform(self, X):
        X = as_float_array(X, "X")
        return np.stack([project(self.model_, row) for row in np.atleast_2d(X)])

    def inverse_transform(self, coeffs):
        coeffs = as_float_array(coeffs, "coefficients")
        return np.stack([synthesize(self.model_, row) for row in np.atleast_2d(coeffs)])

    def sample(self, rng, n_samples=1, scale=1.0):
        rng = check_rng(rng)
        return np.stack(
            [sample_coefficients(self.model_, rng, scale=scale) for _ in range(n_samples)]
        )
