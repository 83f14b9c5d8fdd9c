"""Generate-and-rerank toolkit for natural language generation from logical forms."""

__version__ = "0.1.0"

from genrerank.core import (
    Candidate,
    CandidateSet,
    DatasetError,
    LabeledSet,
    LogicalForm,
    QualityTable,
    Split,
    load_candidates,
    load_dataset,
    load_freebase_table,
    map_freebase_ids,
    save_candidates,
    save_dataset,
)
from genrerank.evaluation import (
    AlignmentReport,
    PipelineReport,
    evaluate_pipeline,
    nbest_sweep,
    ranking_accuracy,
    top1_accuracy,
)
from genrerank.genclient import (
    BudgetBuilderConfig,
    GeneratorConfig,
    GeneratorError,
    MockGeneratorClient,
    PromptTemplate,
    build_prompt,
    build_variable_dataset,
    generate_until_unique,
    load_mock_fixture,
)
from genrerank.reranker import (
    FeatureConfig,
    RerankerModel,
    TrainConfig,
    featurize,
    load_model,
    save_model,
    score,
    set_loss,
    set_loss_gradient,
    train,
)
from genrerank.scoring import (
    DegenerateMetricWarning,
    NormalizationStats,
    ScorerProtocolError,
    ScorerSpec,
    apply_normalization,
    bleu,
    combine_metrics,
    combine_quality,
    fit_normalization,
    score_sets,
    toy_parser_probability,
)
from genrerank.selection import (
    LambdaConfig,
    SelectionResult,
    select_combined,
    select_generator,
    select_oracle,
    select_random,
    select_reranker,
    select_self_consistency,
    tune_lambda,
)

__all__ = [
    "AlignmentReport",
    "BudgetBuilderConfig",
    "Candidate",
    "CandidateSet",
    "DatasetError",
    "DegenerateMetricWarning",
    "FeatureConfig",
    "GeneratorConfig",
    "GeneratorError",
    "LabeledSet",
    "LambdaConfig",
    "LogicalForm",
    "MockGeneratorClient",
    "NormalizationStats",
    "PipelineReport",
    "PromptTemplate",
    "QualityTable",
    "RerankerModel",
    "ScorerProtocolError",
    "ScorerSpec",
    "SelectionResult",
    "Split",
    "TrainConfig",
    "apply_normalization",
    "bleu",
    "build_prompt",
    "build_variable_dataset",
    "combine_metrics",
    "combine_quality",
    "evaluate_pipeline",
    "featurize",
    "fit_normalization",
    "generate_until_unique",
    "load_candidates",
    "load_dataset",
    "load_freebase_table",
    "load_mock_fixture",
    "load_model",
    "map_freebase_ids",
    "nbest_sweep",
    "ranking_accuracy",
    "save_candidates",
    "save_dataset",
    "save_model",
    "score",
    "score_sets",
    "select_combined",
    "select_generator",
    "select_oracle",
    "select_random",
    "select_reranker",
    "select_self_consistency",
    "set_loss",
    "set_loss_gradient",
    "top1_accuracy",
    "toy_parser_probability",
    "train",
    "tune_lambda",
]
