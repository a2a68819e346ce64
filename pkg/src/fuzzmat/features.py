"""Feature vectors from statistical matrices, and the quantize -> matrix -> features pipeline."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .image import GrayImage, QuantizationSpec, quantize
from .matrices import (STANDARD_OFFSETS, StatMatrix, Offset, com, com_average,
                       diff_histogram, mszm, rlm, sum_histogram, szm)
from .fuzzy import (MembershipFunction, fcom, frlm, fszm, fuzzy_rlm, fuzzy_szm,
                    multi_fuzzy_szm)

HARALICK_NAMES = ("energy", "contrast", "correlation", "variance", "homogeneity",
                  "entropy", "dissimilarity")
RUN_NAMES = ("SRE", "LRE", "LGRE", "HGRE", "SRLGE", "SRHGE", "LRLGE", "LRHGE",
             "GLN", "RLN", "RP")
ZONE_NAMES = ("SZE", "LZE", "LGZE", "HGZE", "SZLGE", "SZHGE", "LZLGE", "LZHGE",
              "GLN", "ZSN", "ZP", "GLV", "ZSV")

COM_KINDS = {"COM", "COMAVG", "FCOM"}


@dataclass
class FeatureVector:
    names: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.names = tuple(self.names)
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if len(self.names) != self.values.size:
            raise ValueError("names and values differ in length")
        if not np.all(np.isfinite(self.values)):
            bad = [n for n, v in zip(self.names, self.values) if not np.isfinite(v)]
            raise ValueError(f"non-finite feature values: {bad}")

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))

    def prefixed(self, prefix):
        return FeatureVector(tuple(f"{prefix}.{n}" for n in self.names), self.values, self.meta)

    @classmethod
    def concat(cls, vectors):
        vectors = list(vectors)
        meta = {}
        for v in vectors:
            meta.update(v.meta)
        names = sum((v.names for v in vectors), ())
        values = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
        return cls(names, values, meta)


def normalize(matrix: StatMatrix) -> StatMatrix:
    """Divide every cell by the total mass."""
    total = matrix.cells.sum()
    if not total > 0:
        raise ValueError(f"cannot normalize {matrix.kind}: zero total mass")
    return StatMatrix(matrix.kind, matrix.cells / total, matrix.column_semantics,
                      matrix.column_values, dict(matrix.params))


def haralick_features(m: StatMatrix) -> FeatureVector:
    """Energy, contrast, correlation, variance, homogeneity, entropy (bits), dissimilarity."""
    if m.kind not in COM_KINDS:
        raise ValueError(f"Haralick features need a co-occurrence matrix, got {m.kind}")
    p = normalize(m).cells
    n = p.shape[0]
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    pi = p.sum(axis=1)
    pj = p.sum(axis=0)
    g = np.arange(n)
    mu_i, mu_j = pi @ g, pj @ g
    var_i = pi @ (g - mu_i) ** 2
    var_j = pj @ (g - mu_j) ** 2
    cov = np.sum(p * (i - mu_i) * (j - mu_j))
    if var_i > 1e-15 and var_j > 1e-15:
        corr = float(np.clip(cov / np.sqrt(var_i * var_j), -1.0, 1.0))
    else:
        corr = 0.0
    nz = p[p > 0]
    values = [
        np.sum(p * p),
        np.sum(p * (i - j) ** 2),
        corr,
        var_i,
        np.sum(p / (1.0 + (i - j) ** 2)),
        -np.sum(nz * np.log2(nz)) + 0.0,
        np.sum(p * np.abs(i - j)),
    ]
    return FeatureVector(HARALICK_NAMES, values)


def _moment_features(m: StatMatrix):
    """The eight short/long x low/high moments plus the two non-uniformities and the
    fill percentage. Gray indices are 1-based."""
    p = normalize(m).cells
    g = np.arange(1, m.rows + 1, dtype=np.float64)[:, None]
    s = m.column_values.astype(np.float64)[None, :]
    g2, s2 = g * g, s * s
    moments = [
        np.sum(p / s2), np.sum(p * s2),
        np.sum(p / g2), np.sum(p * g2),
        np.sum(p / (g2 * s2)), np.sum(p * g2 / s2),
        np.sum(p * s2 / g2), np.sum(p * g2 * s2),
        np.sum(p.sum(axis=1) ** 2), np.sum(p.sum(axis=0) ** 2),
    ]
    pixels = m.params.get("pixels")
    if not pixels:
        raise ValueError(f"{m.kind} carries no pixel count; cannot compute the fill percentage")
    moments.append(m.total / pixels)
    return p, g, s, moments


def run_length_features(m: StatMatrix) -> FeatureVector:
    """The eleven run-length descriptors (SRE ... RP)."""
    if m.column_semantics != "run-length":
        raise ValueError(f"run-length features need a run-length matrix, got {m.kind}")
    _, _, _, values = _moment_features(m)
    return FeatureVector(RUN_NAMES, values)


def size_zone_features(m: StatMatrix) -> FeatureVector:
    """Zone analogues of the run-length descriptors plus gray-level variance (GLV)
    and zone-size variance (ZSV) of the normalized matrix."""
    if m.column_semantics != "zone-size":
        raise ValueError(f"size-zone features need a size-zone matrix, got {m.kind}")
    p, g, s, values = _moment_features(m)
    mu_g = np.sum(p * g)
    mu_s = np.sum(p * s)
    values.append(np.sum(p * (g - mu_g) ** 2))
    values.append(np.sum(p * (s - mu_s) ** 2))
    # GLV / ZSV follow our own definition, not a published one
    return FeatureVector(ZONE_NAMES, values, {"reconstructed": ["GLV", "ZSV"]})


FEATURE_FAMILIES = {
    "haralick": haralick_features,
    "run_length": run_length_features,
    "size_zone": size_zone_features,
}


# ------------------------------------------------------------------ matrices by name

MATRIX_KINDS = ("com", "comavg", "dh", "sh", "rlm", "szm", "mszm", "fcom", "frlm",
                "fszm", "fuzzyrlm", "fuzzyszm", "multifuzzyszm")

DEFAULT_FAMILY = {
    "com": "haralick", "comavg": "haralick", "fcom": "haralick",
    "rlm": "run_length", "frlm": "run_length", "fuzzyrlm": "run_length",
    "szm": "size_zone", "mszm": "size_zone", "fszm": "size_zone",
    "fuzzyszm": "size_zone", "multifuzzyszm": "size_zone",
}


def _floats(text):
    if isinstance(text, str):
        return [float(x) for x in text.split(",") if x.strip()]
    return [float(x) for x in text]


def membership_from(params):
    return MembershipFunction(params.get("beta", "linear"), float(params.get("radius", 2)))


def build_matrix(image: GrayImage, kind: str, **params) -> StatMatrix:
    """Compute the matrix named ``kind`` (one of MATRIX_KINDS).

    Recognised parameters: offset ("dr,dc"), offsets (list), dir, conn, beta,
    radius, agg, multi (radii list), levels / weights (mszm), size_bins.
    """
    kind = kind.lower()
    offset = Offset.make(params.get("offset", (0, 1)))
    direction = int(params.get("dir", 0))
    conn = int(params.get("conn", 8))
    agg = params.get("agg", "mean")
    if kind == "com":
        return com(image, offset)
    if kind == "comavg":
        return com_average(image, params.get("offsets", STANDARD_OFFSETS))
    if kind == "dh":
        return diff_histogram(image, offset)
    if kind == "sh":
        return sum_histogram(image, offset)
    if kind == "rlm":
        return rlm(image, direction)
    if kind == "szm":
        return szm(image, conn, params.get("size_bins"))
    if kind == "mszm":
        if "levels" not in params:
            raise ValueError("mszm needs levels=N1,N2,...")
        levels = [int(x) for x in _floats(params["levels"])]
        weights = _floats(params.get("weights", [1.0 / len(levels)] * len(levels)))
        return mszm(image, levels, weights, conn)
    if kind == "fcom":
        return fcom(image, offset, membership_from(params))
    if kind == "frlm":
        return frlm(image, direction, membership_from(params))
    if kind == "fszm":
        return fszm(image, conn, membership_from(params))
    if kind == "fuzzyrlm":
        return fuzzy_rlm(image, direction, membership_from(params), agg)
    if kind == "fuzzyszm":
        return fuzzy_szm(image, conn, membership_from(params), agg,
                         size_bins=params.get("size_bins"))
    if kind == "multifuzzyszm":
        radii = _floats(params.get("multi", "1,2"))
        fns = [MembershipFunction(params.get("beta", "linear"), r) for r in radii]
        return multi_fuzzy_szm(image, conn, fns, agg)
    raise ValueError(f"unknown matrix kind {kind!r}; expected one of {MATRIX_KINDS}")


# ------------------------------------------------------------------ pipelines


@dataclass(frozen=True)
class PipelineConfig:
    """quantization (optional) -> matrix -> feature family."""

    kind: str
    params: tuple = ()  # sorted (key, value) pairs
    quant: Optional[QuantizationSpec] = None
    family: Optional[str] = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in MATRIX_KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))
        family = self.family or DEFAULT_FAMILY.get(kind)
        if family is None:
            raise ValueError(f"no feature family for matrix kind {kind!r}")
        family = family.removesuffix("_features")
        if family not in FEATURE_FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}")
        object.__setattr__(self, "family", family)

    @property
    def identity(self):
        parts = []
        if self.quant is not None:
            parts.append(f"{self.quant.method.split('-')[0]}{self.quant.levels}")
        parts.append(self.kind)
        parts += [f"{k}{str(v).replace(',', '-')}" for k, v in self.params]
        return "_".join(parts)

    def __str__(self):
        stages = []
        if self.quant is not None:
            stages.append(str(self.quant))
        stages.append(" ".join([self.kind] + [f"{k}={v}" for k, v in self.params]))
        stages.append(self.family)
        return "; ".join(stages)


def parse_pipeline(text: str) -> PipelineConfig:
    """Parse ``"linear N=4; szm conn=8; size_zone_features"``.

    Stages are separated by ``;``. A quantization stage is ``METHOD:N`` or
    ``METHOD N=<n>``; the matrix stage is a kind followed by ``key=value``
    parameters; the optional last stage names the feature family.
    """
    stages = [s.strip() for s in text.split(";") if s.strip()]
    if not stages:
        raise ValueError("no stages in pipeline description")
    quant = None
    kind = None
    params = {}
    family = None
    for stage in stages:
        head, *rest = stage.split()
        low = head.lower()
        if ":" in head and not rest:
            quant = QuantizationSpec.parse(head)
        elif low.removesuffix("_features") in FEATURE_FAMILIES and not rest:
            family = low
        elif low in MATRIX_KINDS:
            kind = low
            for item in rest:
                key, sep, value = item.partition("=")
                if not sep:
                    raise ValueError(f"matrix parameter must be key=value, got {item!r}")
                params[key.lower()] = value
        elif len(rest) == 1 and rest[0].upper().startswith("N="):
            quant = QuantizationSpec(low, int(rest[0][2:]))
        else:
            raise ValueError(f"cannot parse pipeline stage {stage!r}")
    if kind is None:
        raise ValueError("pipeline has no matrix stage")
    return PipelineConfig(kind, params, quant, family)


def feature_pipeline(image: GrayImage, config) -> FeatureVector:
    """Run quantization, matrix and feature stages; names are prefixed with the
    pipeline identity so several pipelines can be concatenated."""
    if isinstance(config, str):
        config = parse_pipeline(config)
    if config is None:
        raise ValueError("no stages in pipeline description")
    img = quantize(image, config.quant) if config.quant is not None else image
    m = build_matrix(img, config.kind, **dict(config.params))
    vec = FEATURE_FAMILIES[config.family](m)
    return vec.prefixed(config.identity)
