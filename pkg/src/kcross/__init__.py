"""kcross: build, solve, and grade knowledge-crossword puzzles.

A knowledge crossword is a small slice of a knowledge graph with some
nodes blanked out; the task is to pick, from multiple-choice options, the
one combination of entities that satisfies every triple constraint at
once. This package generates such puzzles from a triple store, certifies
that each has exactly one answer, renders them as prompts in several
reasoning styles, and scores free-form responses.
"""

__version__ = "0.1.0"

from .csp import (
    Constraint,
    SolveEvent,
    SolveTranscript,
    enumerate_solutions,
    is_unique,
    staged_solve,
    verify_all_solve,
)
from .errors import (
    DataError,
    DegenerateGraphError,
    EmptyGraphError,
    GraphParseError,
    KCrossError,
    RenderError,
    SamplingError,
    TierInfeasibleError,
    TransportError,
)
from .kg import KnowledgeGraph, RelationFilter, Triple, load_graph
from .knowledge import KnowledgePassage, compose_knowledge
from .options import (
    OptionAssignment,
    RuleReport,
    TIERS,
    certify_option_uniqueness,
    make_nota,
    rule_check,
    sample_options,
)
from .pipeline import GeneratorConfig, derive_seed, generate_dataset
from .problems import Problem, load_problems, save_problems, validate_problem
from .prompts import (
    Exemplar,
    ParsedAnswer,
    PromptConfig,
    assemble_exemplars,
    parse_answer,
    render_prompt,
)
from .sampler import (
    AnswerGraph,
    Neighborhood,
    QuestionGraph,
    SamplerConfig,
    downsample,
    khop_neighborhood,
    sample_center,
    select_blanks,
)
from .scoring import aggregate, classify_pattern, cross_tab, random_baseline, score

__all__ = [
    "__version__",
    "AnswerGraph",
    "Constraint",
    "DataError",
    "DegenerateGraphError",
    "EmptyGraphError",
    "Exemplar",
    "GeneratorConfig",
    "GraphParseError",
    "KCrossError",
    "KnowledgeGraph",
    "KnowledgePassage",
    "Neighborhood",
    "OptionAssignment",
    "ParsedAnswer",
    "Problem",
    "PromptConfig",
    "QuestionGraph",
    "RelationFilter",
    "RenderError",
    "RuleReport",
    "SamplerConfig",
    "SamplingError",
    "SolveEvent",
    "SolveTranscript",
    "TIERS",
    "TierInfeasibleError",
    "TransportError",
    "Triple",
    "aggregate",
    "assemble_exemplars",
    "certify_option_uniqueness",
    "classify_pattern",
    "compose_knowledge",
    "cross_tab",
    "derive_seed",
    "downsample",
    "enumerate_solutions",
    "generate_dataset",
    "is_unique",
    "khop_neighborhood",
    "load_graph",
    "load_problems",
    "make_nota",
    "parse_answer",
    "random_baseline",
    "render_prompt",
    "rule_check",
    "sample_center",
    "sample_options",
    "save_problems",
    "score",
    "select_blanks",
    "staged_solve",
    "validate_problem",
    "verify_all_solve",
]
