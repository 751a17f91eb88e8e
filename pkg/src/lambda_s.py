"""
A compact Lambda-S interpreter.

Two kinds of abstraction share one syntax and are told apart by the binder's
type: a binder of span type S(A) receives its whole argument (call-by-name),
a binder of base type distributes over a linear combination of basis values
and fires only on basis values (call-by-base).
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .errors import (
    FuelExhausted, NonLinearUseOfSpanVariable, NotCanonical, StuckTerm, TypeMismatch,
    UnboundVariable,
)
from .ls_reduce import DEFAULT_FUEL
from .scalars import ONE, ZERO, Scalar, add, approx_eq, mul


# Types

class SType:
    def __str__(self) -> str:
        from .ls_parser import pretty
        return pretty(self)


@dataclass(frozen=True)
class Base(SType):
    name: str = "Bool"


@dataclass(frozen=True)
class Arrow(SType):
    domain: SType
    codomain: SType


@dataclass(frozen=True)
class Span(SType):
    inner: SType


BOOL = Base("Bool")


def as_span(a: SType) -> SType:
    return a if isinstance(a, Span) else Span(a)


def s_subtype(a: SType, b: SType) -> bool:
    """a ≤ b under the positional coercion A ≤ S(A)"""
    if a == b:
        return True
    return isinstance(b, Span) and not isinstance(a, Span) and a == b.inner


# Terms

class STerm:
    """Base class of Lambda-S terms; equality is up to alpha-equivalence"""

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, STerm):
            return NotImplemented
        return s_alpha_key(self) == s_alpha_key(other)

    def __hash__(self) -> int:
        return hash(s_alpha_key(self))

    def __str__(self) -> str:
        from .ls_parser import pretty
        return pretty(self)


@dataclass(frozen=True, eq=False)
class SVar(STerm):
    name: str


@dataclass(frozen=True, eq=False)
class STrue(STerm):
    pass


@dataclass(frozen=True, eq=False)
class SFalse(STerm):
    pass


@dataclass(frozen=True, eq=False)
class SLam(STerm):
    var: str
    annotation: SType
    body: STerm


@dataclass(frozen=True, eq=False)
class SApp(STerm):
    fun: STerm
    arg: STerm


@dataclass(frozen=True, eq=False)
class SSum(STerm):
    left: STerm
    right: STerm


@dataclass(frozen=True, eq=False)
class SScale(STerm):
    alpha: Scalar
    body: STerm


SContext = Tuple[Tuple[str, SType], ...]


def is_basis(t: STerm) -> bool:
    """Basis values: neither a sum nor a scalar multiple"""
    return isinstance(t, (STrue, SFalse, SLam))


def s_alpha_key(t: STerm, env: Optional[Dict[str, int]] = None, depth: int = 0) -> tuple:
    env = env or {}
    if isinstance(t, SVar):
        if t.name in env:
            return ("bv", depth - env[t.name])
        return ("fv", t.name)
    if isinstance(t, STrue):
        return ("true",)
    if isinstance(t, SFalse):
        return ("false",)
    if isinstance(t, SLam):
        inner = dict(env)
        inner[t.var] = depth + 1
        return ("lam", t.annotation, s_alpha_key(t.body, inner, depth + 1))
    if isinstance(t, SApp):
        return ("app", s_alpha_key(t.fun, env, depth), s_alpha_key(t.arg, env, depth))
    if isinstance(t, SSum):
        return ("sum", s_alpha_key(t.left, env, depth), s_alpha_key(t.right, env, depth))
    if isinstance(t, SScale):
        return ("scale", t.alpha.re, t.alpha.im, s_alpha_key(t.body, env, depth))
    raise TypeError(f"Not a Lambda-S term: {t!r}")


def s_alpha_equal(t: STerm, u: STerm) -> bool:
    return s_alpha_key(t) == s_alpha_key(u)


def s_free_vars(t: STerm) -> FrozenSet[str]:
    if isinstance(t, SVar):
        return frozenset({t.name})
    if isinstance(t, SLam):
        return s_free_vars(t.body) - {t.var}
    if isinstance(t, (SApp, SSum)):
        first, second = (t.fun, t.arg) if isinstance(t, SApp) else (t.left, t.right)
        return s_free_vars(first) | s_free_vars(second)
    if isinstance(t, SScale):
        return s_free_vars(t.body)
    return frozenset()


def s_substitute(t: STerm, x: str, u: STerm) -> STerm:
    """Capture-avoiding t[u/x]"""
    if isinstance(t, SVar):
        return u if t.name == x else t
    if isinstance(t, SLam):
        if t.var == x or x not in s_free_vars(t.body):
            return t
        var, body = t.var, t.body
        fv_u = s_free_vars(u)
        if var in fv_u:
            while var in fv_u or var in s_free_vars(body) or var == x:
                var += "'"
            body = s_substitute(body, t.var, SVar(var))
        return SLam(var, t.annotation, s_substitute(body, x, u))
    if isinstance(t, SApp):
        return SApp(s_substitute(t.fun, x, u), s_substitute(t.arg, x, u))
    if isinstance(t, SSum):
        return SSum(s_substitute(t.left, x, u), s_substitute(t.right, x, u))
    if isinstance(t, SScale):
        return SScale(t.alpha, s_substitute(t.body, x, u))
    return t


def s_uniquify(t: STerm, taken: Optional[Set[str]] = None) -> STerm:
    """Rename binders apart from each other and from the free variables"""
    taken = set(s_free_vars(t)) if taken is None else taken

    def walk(t: STerm, renaming: Dict[str, str]) -> STerm:
        if isinstance(t, SVar):
            return SVar(renaming.get(t.name, t.name))
        if isinstance(t, SLam):
            var = t.var
            while var in taken:
                var += "'"
            taken.add(var)
            inner = dict(renaming)
            inner[t.var] = var
            return SLam(var, t.annotation, walk(t.body, inner))
        if isinstance(t, SApp):
            return SApp(walk(t.fun, renaming), walk(t.arg, renaming))
        if isinstance(t, SSum):
            return SSum(walk(t.left, renaming), walk(t.right, renaming))
        if isinstance(t, SScale):
            return SScale(t.alpha, walk(t.body, renaming))
        return t

    return walk(t, {})


def occurrences(t: STerm, x: str) -> int:
    """Number of free occurrences of x in t"""
    if isinstance(t, SVar):
        return 1 if t.name == x else 0
    if isinstance(t, SLam):
        return 0 if t.var == x else occurrences(t.body, x)
    if isinstance(t, SApp):
        return occurrences(t.fun, x) + occurrences(t.arg, x)
    if isinstance(t, SSum):
        return occurrences(t.left, x) + occurrences(t.right, x)
    if isinstance(t, SScale):
        return occurrences(t.body, x)
    return 0


# Typing

def s_typecheck(ctx: SContext, t: STerm) -> SType:
    """
    Simple typing with the coercion A ≤ S(A) at sums, scalings and arguments

    Raises:
        TypeMismatch: ill-typed application or sum
        UnboundVariable: a variable missing from ctx
        NonLinearUseOfSpanVariable: an S-typed binder not used exactly once
    """
    if isinstance(t, SVar):
        for name, a in reversed(ctx):
            if name == t.name:
                return a
        raise UnboundVariable(f"Unbound variable '{t.name}'", t)

    if isinstance(t, (STrue, SFalse)):
        return BOOL

    if isinstance(t, SLam):
        body = s_typecheck(ctx + ((t.var, t.annotation),), t.body)
        if isinstance(t.annotation, Span):
            count = occurrences(t.body, t.var)
            if count != 1:
                raise NonLinearUseOfSpanVariable(
                    f"Variable '{t.var}' of type {t.annotation} is used {count} times, expected exactly once",
                    t,
                )
        return Arrow(t.annotation, body)

    if isinstance(t, SSum):
        left = as_span(s_typecheck(ctx, t.left))
        right = as_span(s_typecheck(ctx, t.right))
        if left != right:
            raise TypeMismatch(f"Cannot add terms of types {left} and {right}: {t}", t)
        return left

    if isinstance(t, SScale):
        return as_span(s_typecheck(ctx, t.body))

    if isinstance(t, SApp):
        fun = s_typecheck(ctx, t.fun)
        arg = s_typecheck(ctx, t.arg)
        superposed = isinstance(fun, Span) and isinstance(fun.inner, Arrow)
        arrow = fun.inner if superposed else fun
        if not isinstance(arrow, Arrow):
            raise TypeMismatch(f"Cannot apply a term of type {fun}: {t.fun}", t.fun)
        if s_subtype(arg, arrow.domain):
            lifted = superposed
        elif not isinstance(arrow.domain, Span) and arg == Span(arrow.domain):
            lifted = True
        else:
            raise TypeMismatch(f"Expected an argument of type {arrow.domain} but found {arg}: {t.arg}", t.arg)
        return as_span(arrow.codomain) if lifted else arrow.codomain

    raise TypeError(f"Not a Lambda-S term: {t!r}")


# Reduction

def combination(t: STerm) -> Optional[List[Tuple[Scalar, STerm]]]:
    """Read t as a sum of scaled basis values, or None"""
    if is_basis(t):
        return [(ONE, t)]
    if isinstance(t, SScale) and is_basis(t.body):
        return [(t.alpha, t.body)]
    if isinstance(t, SSum):
        left = combination(t.left)
        right = combination(t.right)
        if left is None or right is None:
            return None
        return left + right
    return None


def _build(terms: List[STerm]) -> STerm:
    result = terms[-1]
    for term in reversed(terms[:-1]):
        result = SSum(term, result)
    return result


def _collect(pairs: List[Tuple[Scalar, STerm]]) -> STerm:
    """Merge equal basis values keeping first-occurrence order; drop exact zeros"""
    merged: Dict[STerm, Scalar] = {}
    for alpha, v in pairs:
        merged[v] = add(merged[v], alpha) if v in merged else alpha
    kept = [SScale(alpha, v) for v, alpha in merged.items() if alpha != ZERO]
    if not kept:
        return SScale(ZERO, pairs[0][1])
    return _build(kept)


def s_step_rule(t: STerm) -> Optional[Tuple[STerm, str]]:
    """One leftmost-outermost step with the name of the rule used, or None in normal form"""
    if isinstance(t, SApp):
        fun, arg = t.fun, t.arg
        if isinstance(fun, SSum):
            return SSum(SApp(fun.left, arg), SApp(fun.right, arg)), "app-sum"
        if isinstance(fun, SScale):
            return SScale(fun.alpha, SApp(fun.body, arg)), "app-scale"
        if isinstance(fun, SLam):
            if isinstance(fun.annotation, Span):
                return s_substitute(fun.body, fun.var, arg), "beta-name"
            if is_basis(arg):
                return s_substitute(fun.body, fun.var, arg), "beta-base"
            inner = s_step_rule(arg)
            if inner is not None:
                return SApp(fun, inner[0]), inner[1]
            pairs = combination(arg)
            if pairs is None:
                raise StuckTerm(f"Argument of a base-typed abstraction is not a combination of basis values: {arg}")
            return _build([SScale(alpha, SApp(fun, v)) for alpha, v in pairs]), "distribute"
        inner = s_step_rule(fun)
        if inner is not None:
            return SApp(inner[0], arg), inner[1]
        inner = s_step_rule(arg)
        if inner is not None:
            return SApp(fun, inner[0]), inner[1]
        return None

    if isinstance(t, SScale):
        if isinstance(t.body, SScale):
            return SScale(mul(t.alpha, t.body.alpha), t.body.body), "scale-scale"
        if isinstance(t.body, SSum):
            return SSum(SScale(t.alpha, t.body.left), SScale(t.alpha, t.body.right)), "scale-sum"
        inner = s_step_rule(t.body)
        if inner is not None:
            return SScale(t.alpha, inner[0]), inner[1]
        return None

    if isinstance(t, SSum):
        pairs = combination(t)
        if pairs is not None:
            collected = _collect(pairs)
            if collected != t:
                return collected, "collect"
            return None
        inner = s_step_rule(t.left)
        if inner is not None:
            return SSum(inner[0], t.right), inner[1]
        inner = s_step_rule(t.right)
        if inner is not None:
            return SSum(t.left, inner[0]), inner[1]
        return None

    return None


def s_step(t: STerm) -> Optional[STerm]:
    """
    One reduction step, or None if t is in normal form

    Raises:
        StuckTerm: a base-typed abstraction applied to an irreducible non-combination
    """
    result = s_step_rule(t)
    return None if result is None else result[0]


def s_normalize(t: STerm, fuel: int = DEFAULT_FUEL, trace: Optional[List[str]] = None) -> STerm:
    """
    Iterate s_step to a normal form, appending rule names to trace when given

    Raises:
        FuelExhausted: with the last term reached as `partial`
    """
    for _ in range(fuel):
        result = s_step_rule(t)
        if result is None:
            return t
        t, rule = result
        if trace is not None:
            trace.append(rule)
    if s_step_rule(t) is None:
        return t
    raise FuelExhausted(f"Lambda-S reduction did not finish within {fuel} steps", partial=t)


def s_combination(t: STerm) -> List[Tuple[Scalar, STerm]]:
    """
    Coefficients of a normal form read as Σ αᵢ·vᵢ

    Raises:
        NotCanonical: if t is not a combination of basis values
    """
    pairs = combination(t)
    if pairs is None:
        raise NotCanonical(f"Not a combination of basis values: {t}")
    return pairs


def same_combination(t: STerm, u: STerm, eps: float = 1e-12) -> bool:
    """Compare two combinations coefficient-wise, treating missing values as 0"""
    first: Dict[STerm, Scalar] = {}
    for alpha, v in s_combination(t):
        first[v] = add(first.get(v, ZERO), alpha)
    second: Dict[STerm, Scalar] = {}
    for alpha, v in s_combination(u):
        second[v] = add(second.get(v, ZERO), alpha)
    return all(
        approx_eq(first.get(v, ZERO), second.get(v, ZERO), eps)
        for v in set(first) | set(second)
    )
