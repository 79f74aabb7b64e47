from .ast import OP_TABLE, DslType, Node, pretty
from .canon import canonical_hash, canonicalize
from .interp import BudgetExceeded, DslRuntimeError, EvalBudget, default_budget, evaluate
from .parser import ParseError, parse
from .program import MergeProgram, compile_ast, compile_program
from .typecheck import DslTypeError, typecheck

__all__ = [
    "OP_TABLE",
    "DslType",
    "Node",
    "pretty",
    "canonical_hash",
    "canonicalize",
    "BudgetExceeded",
    "DslRuntimeError",
    "EvalBudget",
    "default_budget",
    "evaluate",
    "ParseError",
    "parse",
    "MergeProgram",
    "compile_ast",
    "compile_program",
    "DslTypeError",
    "typecheck",
]
