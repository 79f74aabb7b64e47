"""Deterministic interpreter with a node-evaluation step budget.

The budget replaces a wall clock: every node entry costs one step, fold bodies
cost per element, and exhausting the budget raises BudgetExceeded.  Non-finite
intermediates and bad model indexes are runtime errors, so scores downstream
are never polluted by NaN or Inf.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ast import BinOp, Call, Fold, ModelIndex, ModelsRef, Node, ScalarLit, Var


@dataclass(frozen=True)
class EvalBudget:
    max_steps: int

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def default_budget(k: int, d: int) -> EvalBudget:
    # Generous for any sane program; tiny hand-built loops can still trip it.
    return EvalBudget(max_steps=10_000 * k * d)


class BudgetExceeded(Exception):
    """Evaluation ran out of node-evaluation steps."""


class DslRuntimeError(Exception):
    """Index out of range or a non-finite intermediate value."""


class _Machine:
    def __init__(self, models: list[np.ndarray], budget: EvalBudget):
        self.models = models
        self.d = models[0].shape[0]
        self.remaining = budget.max_steps

    def tick(self) -> None:
        if self.remaining < 1:
            raise BudgetExceeded()
        self.remaining -= 1

    def finite(self, value):
        if isinstance(value, float):
            ok = np.isfinite(value)
        else:
            ok = bool(np.isfinite(value).all())
        if not ok:
            raise DslRuntimeError("non-finite intermediate value")
        return value

    def eval(self, node: Node, env: dict[str, object]):
        self.tick()
        if isinstance(node, ScalarLit):
            return self.finite(float(node.value))
        if isinstance(node, ModelsRef):
            return self.models
        if isinstance(node, ModelIndex):
            if not 0 <= node.index < len(self.models):
                raise DslRuntimeError(
                    f"models[{node.index}] out of range for {len(self.models)} models"
                )
            return self.models[node.index]
        if isinstance(node, Var):
            return env[node.name]
        if isinstance(node, Call):
            args = [self.eval(a, env) for a in node.args]
            return self.apply(node.op, args)
        if isinstance(node, BinOp):
            left = self.eval(node.left, env)
            right = self.eval(node.right, env)
            assert node.resolved is not None, "interpreting an untyped AST"
            if node.resolved == "scale":
                # the scalar may sit on either side of '*'
                if isinstance(left, np.ndarray):
                    left, right = right, left
                return self.apply("scale", [left, right])
            if node.resolved.startswith("s_"):
                return self.scalar_binop(node.resolved, float(left), float(right))
            return self.apply(node.resolved, [left, right])
        if isinstance(node, Fold):
            items = self.eval(node.list_expr, env)
            acc = self.eval(node.init_expr, env)
            a, b = node.binders
            for item in items:
                inner = dict(env)
                inner[a] = acc
                inner[b] = item
                acc = self.eval(node.body, inner)
            return acc
        raise DslRuntimeError(f"unknown node {type(node).__name__}")

    def scalar_binop(self, op: str, left: float, right: float) -> float:
        if op == "s_add":
            return self.finite(left + right)
        if op == "s_sub":
            return self.finite(left - right)
        return self.finite(left * right)

    def apply(self, op: str, args: list):
        if op == "add":
            return self.finite(args[0] + args[1])
        if op == "sub":
            return self.finite(args[0] - args[1])
        if op == "scale":
            return self.finite(float(args[0]) * args[1])
        if op == "hadamard":
            return self.finite(args[0] * args[1])
        if op == "emax":
            return self.finite(np.maximum(args[0], args[1]))
        if op == "emin":
            return self.finite(np.minimum(args[0], args[1]))
        if op == "mean_elem":
            return self.finite(float(np.mean(args[0])))
        if op == "norm1":
            return self.finite(float(np.sum(np.abs(args[0]))))
        if op == "norm2":
            return self.finite(float(np.linalg.norm(args[0])))
        if op == "cos":
            na = float(np.linalg.norm(args[0]))
            nb = float(np.linalg.norm(args[1]))
            if na == 0.0 or nb == 0.0:
                raise DslRuntimeError("cosine of a zero vector")
            return self.finite(float(np.dot(args[0], args[1])) / (na * nb))
        if op == "mean_stack":
            if len(args[0]) == 0:
                raise DslRuntimeError("mean_stack of an empty list")
            return self.finite(np.mean(np.stack(args[0]), axis=0))
        if op == "sum_stack":
            if len(args[0]) == 0:
                return np.zeros(self.d)
            return self.finite(np.sum(np.stack(args[0]), axis=0))
        if op == "ones":
            return self.finite(np.full(self.d, float(args[0])))
        if op == "clamp":
            x, lo, hi = (float(a) for a in args)
            return self.finite(min(max(x, lo), hi))
        if op == "length":
            return float(len(args[0]))
        if op == "tail":
            return list(args[0][1:])
        raise DslRuntimeError(f"unknown operation {op!r}")


def evaluate(root: Node, models: Sequence, budget: EvalBudget) -> np.ndarray:
    """Run a typechecked program on K task vectors of equal dimension."""
    vecs = [np.asarray(m, dtype=np.float64) for m in models]
    if not vecs:
        raise ValueError("need at least one model vector")
    if any(v.ndim != 1 or v.shape != vecs[0].shape for v in vecs):
        raise ValueError("model vectors must share a single 1-d shape")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # overflow shows up as a non-finite check failure, not a warning
        result = _Machine(vecs, budget).eval(root, {})
    if not isinstance(result, np.ndarray):
        raise DslRuntimeError("program produced a non-vector result")
    return np.asarray(result, dtype=np.float64)
