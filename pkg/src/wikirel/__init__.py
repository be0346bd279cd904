"""Source-reliability signals from collaborative-wiki edit histories.

The pipeline turns revision streams into domain-level citation events,
summarizes each cited domain as a fixed 50-feature vector, trains boosted
decision stumps against editorial reliability labels, and explains the
resulting scores with exact additive attributions. Evaluation helpers cover
leave-one-out validation, bootstrap uncertainty, significance tests against a
random baseline, cross-language/cross-topic transfer, and corpus-size scaling.
"""

from .boost import (
    Attribution,
    StumpBoostClassifier,
    StumpEnsemble,
    TrainConfig,
    Tree,
    attribute,
    attribute_matrix,
    attribute_rows,
    dump_ensemble,
    dumps_ensemble,
    fit_ensemble,
    load_ensemble,
    loads_ensemble,
    predict_margin,
    predict_proba,
    score_matrix,
    train_matrix,
    weighted_logloss,
)
from .corpus import (
    ArticleHistory,
    Dataset,
    FixtureError,
    RevisionRecord,
    dataset_age_totals,
    dump_corpus,
    load_corpus,
)
from .evaluate import (
    BootstrapResult,
    DataError,
    EvalReport,
    PredictionSet,
    ScalingCurve,
    ScalingPoint,
    adapt,
    bootstrap_metrics,
    evaluate_native,
    f1_macro,
    log_grid,
    loo_predict,
    loo_validate,
    mann_whitney,
    metrics_from_labels,
    random_baseline,
    scaling_experiment,
    significance_verdict,
    subseed,
)
from .extract import (
    MergedRevision,
    SourceEdit,
    UrlCanonicalizer,
    analyze_article,
    analyze_dataset,
    diff_to_source_edits,
    extract_domain,
    extract_urls,
    merge_consecutive,
    normalize_url,
)
from .features import (
    CATALOG,
    FEATURE_IDS,
    FeatureMatrix,
    FeatureSpec,
    QuantileRankNormalizer,
    catalog_fingerprint,
    compute_features,
    featurize,
    quantile_normalize,
    rank_transform,
)
from .labels import LabelSet, assign_tiers, filter_datasets, load_label_csv
from .psl import SuffixRules, bundled
from .timeline import DomainTimeline, build_dataset_timelines, build_timeline

__version__ = "0.1.0"

__all__ = [
    "ArticleHistory",
    "Attribution",
    "BootstrapResult",
    "CATALOG",
    "DataError",
    "Dataset",
    "DomainTimeline",
    "EvalReport",
    "FEATURE_IDS",
    "FeatureMatrix",
    "FeatureSpec",
    "FixtureError",
    "LabelSet",
    "MergedRevision",
    "PredictionSet",
    "QuantileRankNormalizer",
    "RevisionRecord",
    "ScalingCurve",
    "ScalingPoint",
    "SourceEdit",
    "StumpBoostClassifier",
    "StumpEnsemble",
    "SuffixRules",
    "TrainConfig",
    "Tree",
    "UrlCanonicalizer",
    "adapt",
    "analyze_article",
    "analyze_dataset",
    "assign_tiers",
    "attribute",
    "attribute_matrix",
    "attribute_rows",
    "bootstrap_metrics",
    "build_dataset_timelines",
    "bundled",
    "build_timeline",
    "catalog_fingerprint",
    "compute_features",
    "dataset_age_totals",
    "diff_to_source_edits",
    "dump_corpus",
    "dump_ensemble",
    "dumps_ensemble",
    "evaluate_native",
    "extract_domain",
    "extract_urls",
    "f1_macro",
    "featurize",
    "filter_datasets",
    "fit_ensemble",
    "load_corpus",
    "load_ensemble",
    "load_label_csv",
    "loads_ensemble",
    "log_grid",
    "loo_predict",
    "loo_validate",
    "mann_whitney",
    "merge_consecutive",
    "metrics_from_labels",
    "normalize_url",
    "predict_margin",
    "predict_proba",
    "quantile_normalize",
    "random_baseline",
    "rank_transform",
    "scaling_experiment",
    "score_matrix",
    "significance_verdict",
    "subseed",
    "train_matrix",
    "weighted_logloss",
]
