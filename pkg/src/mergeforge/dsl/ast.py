"""AST node types for the merge-program expression language."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class DslType(enum.Enum):
    SCALAR = "scalar"
    VECTOR = "vector"
    VECTOR_LIST = "vector_list"
    FN2 = "fn2"  # (vector, vector) -> vector; only the fold lambda has this type

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


# Operation table: name -> (argument types, result type).  This is the whole
# callable surface of the language; fold is a dedicated node, not a table op.
OP_TABLE: dict[str, tuple[tuple[DslType, ...], DslType]] = {
    "add": ((DslType.VECTOR, DslType.VECTOR), DslType.VECTOR),
    "sub": ((DslType.VECTOR, DslType.VECTOR), DslType.VECTOR),
    "scale": ((DslType.SCALAR, DslType.VECTOR), DslType.VECTOR),
    "hadamard": ((DslType.VECTOR, DslType.VECTOR), DslType.VECTOR),
    "emax": ((DslType.VECTOR, DslType.VECTOR), DslType.VECTOR),
    "emin": ((DslType.VECTOR, DslType.VECTOR), DslType.VECTOR),
    "mean_elem": ((DslType.VECTOR,), DslType.SCALAR),
    "norm1": ((DslType.VECTOR,), DslType.SCALAR),
    "norm2": ((DslType.VECTOR,), DslType.SCALAR),
    "cos": ((DslType.VECTOR, DslType.VECTOR), DslType.SCALAR),
    "mean_stack": ((DslType.VECTOR_LIST,), DslType.VECTOR),
    "sum_stack": ((DslType.VECTOR_LIST,), DslType.VECTOR),
    "ones": ((DslType.SCALAR,), DslType.VECTOR),
    "clamp": ((DslType.SCALAR, DslType.SCALAR, DslType.SCALAR), DslType.SCALAR),
    "length": ((DslType.VECTOR_LIST,), DslType.SCALAR),
    "tail": ((DslType.VECTOR_LIST,), DslType.VECTOR_LIST),
}

# Scalar-valued infix operators resolved by the typechecker.
SCALAR_BINOPS = {"+": "s_add", "-": "s_sub", "*": "s_mul"}

# Ops whose argument order does not change the result.
COMMUTATIVE_OPS = frozenset({"add", "hadamard", "emax", "emin", "s_add", "s_mul"})


@dataclass
class Node:
    pos: tuple[int, int] = field(default=(0, 0), compare=False, kw_only=True)
    ty: DslType | None = field(default=None, compare=False, kw_only=True)


@dataclass
class ScalarLit(Node):
    value: float = 0.0


@dataclass
class ModelsRef(Node):
    """The input list of task vectors, `models`."""


@dataclass
class ModelIndex(Node):
    index: int = 0


@dataclass
class Var(Node):
    name: str = ""


@dataclass
class Call(Node):
    op: str = ""
    args: tuple[Node, ...] = ()


@dataclass
class BinOp(Node):
    symbol: str = ""
    left: Node = None  # type: ignore[assignment]
    right: Node = None  # type: ignore[assignment]
    resolved: str | None = None  # filled by the typechecker (e.g. "+" -> "add")


@dataclass
class Fold(Node):
    list_expr: Node = None  # type: ignore[assignment]
    init_expr: Node = None  # type: ignore[assignment]
    binders: tuple[str, str] = ("acc", "x")
    body: Node = None  # type: ignore[assignment]


def _fmt_float(value: float) -> str:
    return repr(float(value))


def pretty_expr(node: Node) -> str:
    if isinstance(node, ScalarLit):
        return _fmt_float(node.value)
    if isinstance(node, ModelsRef):
        return "models"
    if isinstance(node, ModelIndex):
        return f"models[{node.index}]"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.op}({', '.join(pretty_expr(a) for a in node.args)})"
    if isinstance(node, BinOp):
        return f"({pretty_expr(node.left)} {node.symbol} {pretty_expr(node.right)})"
    if isinstance(node, Fold):
        a, b = node.binders
        return (
            f"fold({pretty_expr(node.list_expr)}, {pretty_expr(node.init_expr)}, "
            f"({a}, {b}) -> {pretty_expr(node.body)})"
        )
    raise TypeError(f"unknown node {node!r}")


def pretty(root: Node) -> str:
    """Render a program body back to concrete syntax."""
    return f"merge(models) = {pretty_expr(root)}"
