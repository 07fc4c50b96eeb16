"""
Multi-task image classification with collaborative, hierarchical spike-and-slab priors
"""

from .model import (
    Dictionary,
    PriorParams,
    InclusionMatrix,
    ObservationMatrix,
    CodeMatrix,
    SupportMatrix,
    build_dictionary,
    build_inclusion_matrix,
    rho,
    rho_matrix,
)
from .sampler import ChainConfig, ChainTrace, run_chain, select_support, support_log_odds
from .solver import ClassSolution, TaskSolution, ridge_on_support, solve_class, solve_task, task_objective
from .classifier import (
    BaselineConfig,
    ClassificationResult,
    ClassifierSettings,
    EvaluationReport,
    classify,
    evaluate,
    src_l1_classify,
)

__all__ = [
    'Dictionary',
    'PriorParams',
    'InclusionMatrix',
    'ObservationMatrix',
    'CodeMatrix',
    'SupportMatrix',
    'build_dictionary',
    'build_inclusion_matrix',
    'rho',
    'rho_matrix',
    'ChainConfig',
    'ChainTrace',
    'run_chain',
    'select_support',
    'support_log_odds',
    'ClassSolution',
    'TaskSolution',
    'ridge_on_support',
    'solve_class',
    'solve_task',
    'task_objective',
    'BaselineConfig',
    'ClassificationResult',
    'ClassifierSettings',
    'EvaluationReport',
    'classify',
    'evaluate',
    'src_l1_classify',
]
