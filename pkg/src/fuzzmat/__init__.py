"""Gray-level statistical texture matrices (co-occurrence, run-length, size-zone),
their fuzzy variants, feature vectors and a small cross-validation harness."""
__version__ = "0.1.0"

from .image import (EmptyRegionError, GrayImage, PGMError, QuantizationSpec, attach_mask,
                    load_image, parse_pgm, quantize, save_image, stretch_histogram)
from .zones import FlatZone, label_flat_zones
from .matrices import (DIRECTIONS, STANDARD_OFFSETS, Offset, StatMatrix, com, com_average,
                       diff_histogram, mszm, rlm, sum_histogram, szm)
from .fuzzy import (FuzzyRun, FuzzyZone, MembershipFunction, eval_membership,
                    extract_fuzzy_runs, extract_fuzzy_zones, fcom, fill_level_fuzzify, frlm,
                    fszm, fuzzy_rlm, fuzzy_szm, multi_fuzzy_szm)
from .features import (FeatureVector, PipelineConfig, build_matrix, feature_pipeline,
                       haralick_features, normalize, parse_pipeline, run_length_features,
                       size_zone_features)
from .harness import (DatasetManifest, EvalReport, FeatureTable, KFold, LeaveOneGroupOut,
                      MLPConfig, cross_validate, evaluate_manifest, extract_feature_table,
                      load_manifest, render_report, train_centroid, train_mlp)
