"""GR(1) synthesis with incrementally refined perception."""
from .expr import eval_expr
from .game import build_game
from .motion import CellCorridor, TransitionSystem, min_weight_path, performance
from .parser import format_spec, parse_spec
from .refinement import build_tree, compile_persistence, compile_pipeline, partition
from .simulator import ScenarioConfig, compare, run_experiment
from .solver import solve
from .spec import GR1Spec, VarDecl, validate_spec
from .strategy import closed_loop, extract_strategy, synthesize
from .verify import verify_trace

__all__ = [
    "CellCorridor", "GR1Spec", "ScenarioConfig", "TransitionSystem", "VarDecl",
    "build_game", "build_tree", "closed_loop", "compare", "compile_persistence",
    "compile_pipeline", "eval_expr", "extract_strategy", "format_spec", "min_weight_path",
    "parse_spec", "partition", "performance", "run_experiment", "solve", "synthesize",
    "validate_spec", "verify_trace",
]
