"""Production-weighted typed grammar: the refinable candidate-program source.

Sampling runs a top-down typed derivation.  At every choice point the
eligible productions are weighted by softmax(logit / T); at the depth limit
only terminal productions remain eligible, so derivations always finish and
every sampled program parses and typechecks by construction.

The same grammar supports deterministic re-derivation: given a typed AST we
can recover exactly which productions a derivation would have used, which is
what the preference-based refinement consumes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from ..dsl.ast import (
    OP_TABLE,
    BinOp,
    Call,
    DslType,
    Fold,
    ModelIndex,
    ModelsRef,
    Node,
    ScalarLit,
    Var,
    pretty,
)

# Nonterminals, keyed by the type an expression must produce.
NT_VECTOR = "V"
NT_SCALAR = "S"
NT_LIST = "L"

_NT_FOR_TYPE = {
    DslType.VECTOR: NT_VECTOR,
    DslType.SCALAR: NT_SCALAR,
    DslType.VECTOR_LIST: NT_LIST,
}

# Binder names the sampler emits; re-derivation matches binders by slot.
BINDERS = ("acc", "x")

DEFAULT_LITERAL_PALETTE = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

LOGIT_MIN, LOGIT_MAX = -10.0, 10.0


class UnderivableProgram(ValueError):
    """The AST uses a shape the grammar cannot produce (index, literal, nesting)."""


@dataclass(frozen=True)
class Production:
    pid: str
    lhs: str
    kind: str  # "model" | "call" | "fold" | "lit" | "var" | "models"
    payload: object = None
    args: tuple[str, ...] = ()
    only_in_body: bool = False  # fold-lambda variables
    never_in_body: bool = False  # fold itself: no nested folds from the sampler

    @property
    def terminal(self) -> bool:
        return not self.args


def _call(lhs: str, op: str) -> Production:
    arg_types, _ = OP_TABLE[op]
    return Production(
        pid=f"{lhs}->{op}",
        lhs=lhs,
        kind="call",
        payload=op,
        args=tuple(_NT_FOR_TYPE[t] for t in arg_types),
    )


def default_grammar(k: int, palette: tuple[float, ...] = DEFAULT_LITERAL_PALETTE) -> dict[str, list[Production]]:
    """Full production table for instances with ``k`` candidate models."""
    if k < 1:
        raise ValueError("need at least one model")
    vector: list[Production] = [
        Production(pid=f"V->models[{j}]", lhs=NT_VECTOR, kind="model", payload=j)
        for j in range(k)
    ]
    vector += [_call(NT_VECTOR, op) for op in
               ("add", "sub", "scale", "hadamard", "emax", "emin",
                "mean_stack", "sum_stack", "ones")]
    vector.append(Production(
        pid="V->fold", lhs=NT_VECTOR, kind="fold",
        args=(NT_LIST, NT_VECTOR, NT_VECTOR), never_in_body=True,
    ))
    vector += [
        Production(pid="V->acc", lhs=NT_VECTOR, kind="var", payload=0, only_in_body=True),
        Production(pid="V->x", lhs=NT_VECTOR, kind="var", payload=1, only_in_body=True),
    ]
    scalar: list[Production] = [
        Production(pid=f"S->lit({c!r})", lhs=NT_SCALAR, kind="lit", payload=float(c))
        for c in palette
    ]
    scalar += [_call(NT_SCALAR, op) for op in
               ("mean_elem", "norm1", "norm2", "cos", "clamp", "length")]
    lst = [
        Production(pid="L->models", lhs=NT_LIST, kind="models"),
        _call(NT_LIST, "tail"),
    ]
    return {NT_VECTOR: vector, NT_SCALAR: scalar, NT_LIST: lst}


def identity_grammar() -> dict[str, list[Production]]:
    """Single-production grammar that can only emit ``models[0]``; test hook."""
    return {
        NT_VECTOR: [Production(pid="V->models[0]", lhs=NT_VECTOR, kind="model", payload=0)],
        NT_SCALAR: [Production(pid="S->lit(1.0)", lhs=NT_SCALAR, kind="lit", payload=1.0)],
        NT_LIST: [Production(pid="L->models", lhs=NT_LIST, kind="models")],
    }


@dataclass(frozen=True)
class GeneratorPolicy:
    grammar: dict[str, list[Production]]
    logits: dict[str, float]
    max_depth: int = 8
    version: int = 0

    @classmethod
    def initial(cls, grammar: dict[str, list[Production]], max_depth: int = 8) -> "GeneratorPolicy":
        policy = cls(
            grammar=grammar,
            logits={p.pid: 0.0 for prods in grammar.values() for p in prods},
            max_depth=max_depth,
        )
        policy.validate()
        return policy

    def validate(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        for nt, prods in self.grammar.items():
            if not prods:
                raise ValueError(f"nonterminal {nt} has no productions")
            for in_body in (False, True):
                if not any(p.terminal for p in _eligible(prods, self.max_depth, self.max_depth, in_body)):
                    raise ValueError(
                        f"nonterminal {nt} has no terminal production "
                        f"({'in' if in_body else 'outside'} fold bodies)"
                    )

    def with_logits(self, logits: dict[str, float]) -> "GeneratorPolicy":
        return replace(self, logits=logits, version=self.version + 1)

    def production_probability(self, nt: str, pid: str, temp: float,
                               depth: int = 0, in_body: bool = False) -> float:
        """Analytic softmax probability of one production at a choice point."""
        eligible = _eligible(self.grammar[nt], depth, self.max_depth, in_body)
        weights = _softmax(np.array([self.logits[p.pid] for p in eligible]), temp)
        for p, w in zip(eligible, weights):
            if p.pid == pid:
                return float(w)
        return 0.0


def _eligible(prods: list[Production], depth: int, max_depth: int, in_body: bool) -> list[Production]:
    out = [
        p for p in prods
        if (in_body or not p.only_in_body)
        and (not in_body or not p.never_in_body)
        and (depth < max_depth or p.terminal)
    ]
    return out


def _softmax(logits: np.ndarray, temp: float) -> np.ndarray:
    if temp <= 0:
        raise ValueError("temperature must be positive")
    shifted = (logits - logits.max()) / temp
    w = np.exp(shifted)
    return w / w.sum()


def _derive(policy: GeneratorPolicy, temp: float, nt: str, depth: int, in_body: bool,
            rng: np.random.Generator) -> Node:
    eligible = _eligible(policy.grammar[nt], depth, policy.max_depth, in_body)
    probs = _softmax(np.array([policy.logits[p.pid] for p in eligible]), temp)
    prod = eligible[rng.choice(len(eligible), p=probs)]
    if prod.kind == "model":
        return ModelIndex(index=int(prod.payload))
    if prod.kind == "models":
        return ModelsRef()
    if prod.kind == "lit":
        return ScalarLit(value=float(prod.payload))
    if prod.kind == "var":
        return Var(name=BINDERS[int(prod.payload)])
    if prod.kind == "call":
        args = tuple(
            _derive(policy, temp, a, depth + 1, in_body, rng) for a in prod.args
        )
        return Call(op=str(prod.payload), args=args)
    if prod.kind == "fold":
        list_expr = _derive(policy, temp, prod.args[0], depth + 1, False, rng)
        init_expr = _derive(policy, temp, prod.args[1], depth + 1, False, rng)
        body = _derive(policy, temp, prod.args[2], depth + 1, True, rng)
        return Fold(list_expr=list_expr, init_expr=init_expr, binders=BINDERS, body=body)
    raise AssertionError(f"unknown production kind {prod.kind}")


def sample_program(policy: GeneratorPolicy, temp: float, rng: np.random.Generator) -> str:
    """Sample one program as source text; always parses and typechecks."""
    return pretty(sample_ast(policy, temp, rng))


def sample_ast(policy: GeneratorPolicy, temp: float, rng: np.random.Generator) -> Node:
    return _derive(policy, float(temp), NT_VECTOR, 0, False, rng)


def derivation_counts(policy: GeneratorPolicy, root: Node) -> Counter:
    """Production usage of the derivation that would produce ``root``.

    Raises UnderivableProgram for shapes the grammar cannot emit: out-of-range
    model indexes, literals outside the palette, scalar infix arithmetic,
    nested folds, or ops missing from a restricted grammar.
    """
    counts: Counter = Counter()
    _rederive(policy, root, NT_VECTOR, False, (), counts)
    return counts


def _production(policy: GeneratorPolicy, nt: str, pid: str) -> Production:
    for p in policy.grammar[nt]:
        if p.pid == pid:
            return p
    raise UnderivableProgram(f"no production {pid} in grammar")


def _rederive(policy: GeneratorPolicy, node: Node, nt: str, in_body: bool,
              binders: tuple[str, ...], counts: Counter) -> None:
    if isinstance(node, ModelIndex):
        prod = _production(policy, nt, f"V->models[{node.index}]")
    elif isinstance(node, ModelsRef):
        prod = _production(policy, nt, "L->models")
    elif isinstance(node, ScalarLit):
        for p in policy.grammar[nt]:
            if p.kind == "lit" and p.payload == float(node.value):
                prod = p
                break
        else:
            raise UnderivableProgram(f"literal {node.value!r} outside the palette")
    elif isinstance(node, Var):
        if not in_body or node.name not in binders:
            raise UnderivableProgram(f"variable {node.name!r} outside a fold body")
        prod = _production(policy, nt, f"V->{BINDERS[binders.index(node.name)]}")
    elif isinstance(node, Call):
        prod = _production(policy, nt, f"{nt}->{node.op}")
        counts[prod.pid] += 1
        for arg_nt, arg in zip(prod.args, node.args):
            _rederive(policy, arg, arg_nt, in_body, binders, counts)
        return
    elif isinstance(node, BinOp):
        if node.resolved is None or node.resolved.startswith("s_"):
            raise UnderivableProgram("scalar infix arithmetic has no production")
        left, right = node.left, node.right
        if node.resolved == "scale" and left.ty == DslType.VECTOR:
            left, right = right, left
        prod = _production(policy, nt, f"{nt}->{node.resolved}")
        counts[prod.pid] += 1
        for arg_nt, arg in zip(prod.args, (left, right)):
            _rederive(policy, arg, arg_nt, in_body, binders, counts)
        return
    elif isinstance(node, Fold):
        if in_body:
            raise UnderivableProgram("nested fold has no production")
        prod = _production(policy, nt, "V->fold")
        counts[prod.pid] += 1
        _rederive(policy, node.list_expr, prod.args[0], False, (), counts)
        _rederive(policy, node.init_expr, prod.args[1], False, (), counts)
        _rederive(policy, node.body, prod.args[2], True, node.binders, counts)
        return
    else:
        raise UnderivableProgram(f"unknown node {type(node).__name__}")
    counts[prod.pid] += 1
