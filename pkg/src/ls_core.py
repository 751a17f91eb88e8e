"""
Abstract syntax and typing of the sup-calculus proof language.

Propositions: Top, A odot B, A -o B, and (extension) A (+) B, A & B.
Proof terms follow the introduction/elimination rules of those connectives
plus the Sum and Scalar rules. Contexts are additive: every premise of a rule
shares the same context, exactly as the rules are displayed.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .errors import AnnotationRequired, TypeMismatch, UnboundVariable
from .scalars import Scalar


# Propositions

class Prop:
    """Base class of propositions (structural equality)"""

    def __str__(self) -> str:
        from .ls_parser import pretty
        return pretty(self)


@dataclass(frozen=True)
class Top(Prop):
    pass


@dataclass(frozen=True)
class Odot(Prop):
    left: Prop
    right: Prop


@dataclass(frozen=True)
class Lolli(Prop):
    domain: Prop
    codomain: Prop


@dataclass(frozen=True)
class Plus(Prop):
    left: Prop
    right: Prop


@dataclass(frozen=True)
class With(Prop):
    left: Prop
    right: Prop


def qpow(n: int) -> Prop:
    """Q⊗0 = Top, Q⊗(n+1) = Q⊗n odot Q⊗n"""
    if n < 0:
        raise ValueError(f"qpow needs n >= 0, got {n}")
    prop: Prop = Top()
    for _ in range(n):
        prop = Odot(prop, prop)
    return prop


def q_degree(prop: Prop) -> Optional[int]:
    """n such that prop == qpow(n), or None"""
    if isinstance(prop, Top):
        return 0
    if isinstance(prop, Odot):
        left = q_degree(prop.left)
        if left is not None and prop.left == prop.right:
            return left + 1
    return None


# Terms

class Term:
    """
    Base class of proof terms.

    Equality and hashing are up to alpha-equivalence; scalars compare exactly.
    """

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Term):
            return NotImplemented
        return alpha_key(self) == alpha_key(other)

    def __hash__(self) -> int:
        return hash(alpha_key(self))

    def __str__(self) -> str:
        from .ls_parser import pretty
        return pretty(self)


@dataclass(frozen=True, eq=False)
class Var(Term):
    name: str


@dataclass(frozen=True, eq=False)
class Star(Term):
    alpha: Scalar


@dataclass(frozen=True, eq=False)
class SupPair(Term):
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class MatchSup(Term):
    scrutinee: Term
    left_var: str
    left_body: Term
    right_var: str
    right_body: Term


@dataclass(frozen=True, eq=False)
class Lam(Term):
    var: str
    annotation: Prop
    body: Term


@dataclass(frozen=True, eq=False)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True, eq=False)
class Sum(Term):
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class Scale(Term):
    alpha: Scalar
    body: Term


@dataclass(frozen=True, eq=False)
class Inl(Term):
    body: Term


@dataclass(frozen=True, eq=False)
class Inr(Term):
    body: Term


@dataclass(frozen=True, eq=False)
class Inlr(Term):
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class CasePlus(Term):
    scrutinee: Term
    left_var: str
    left_body: Term
    right_var: str
    right_body: Term


@dataclass(frozen=True, eq=False)
class WithPair(Term):
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class Proj1(Term):
    body: Term


@dataclass(frozen=True, eq=False)
class Proj2(Term):
    body: Term


# Child positions that reduction may enter (never under a binder)
REDUCIBLE_FIELDS: Dict[type, Tuple[str, ...]] = {
    Var: (),
    Star: (),
    Lam: (),
    SupPair: ("left", "right"),
    MatchSup: ("scrutinee",),
    App: ("fun", "arg"),
    Sum: ("left", "right"),
    Scale: ("body",),
    Inl: ("body",),
    Inr: ("body",),
    Inlr: ("left", "right"),
    CasePlus: ("scrutinee",),
    WithPair: ("left", "right"),
    Proj1: ("body",),
    Proj2: ("body",),
}

# Binder-free children, in left-to-right order
_PLAIN_FIELDS: Dict[type, Tuple[str, ...]] = {
    **REDUCIBLE_FIELDS,
    MatchSup: ("scrutinee",),
    CasePlus: ("scrutinee",),
}


Context = Tuple[Tuple[str, Prop], ...]
EMPTY_CONTEXT: Context = ()


def extend(ctx: Context, name: str, prop: Prop) -> Context:
    return ctx + ((name, prop),)


def lookup(ctx: Context, name: str) -> Optional[Prop]:
    for bound, prop in reversed(ctx):
        if bound == name:
            return prop
    return None


# Alpha-equivalence

def alpha_key(t: Term, env: Optional[Dict[str, int]] = None, depth: int = 0) -> tuple:
    """Locally nameless key: bound variables become binder distances"""
    env = env or {}

    def bind(name: str) -> Dict[str, int]:
        inner = dict(env)
        inner[name] = depth + 1
        return inner

    if isinstance(t, Var):
        if t.name in env:
            return ("bv", depth - env[t.name])
        return ("fv", t.name)
    if isinstance(t, Star):
        return ("star", t.alpha.re, t.alpha.im)
    if isinstance(t, Lam):
        return ("lam", t.annotation, alpha_key(t.body, bind(t.var), depth + 1))
    if isinstance(t, (MatchSup, CasePlus)):
        return (
            type(t).__name__,
            alpha_key(t.scrutinee, env, depth),
            alpha_key(t.left_body, bind(t.left_var), depth + 1),
            alpha_key(t.right_body, bind(t.right_var), depth + 1),
        )
    if isinstance(t, Scale):
        return ("scale", t.alpha.re, t.alpha.im, alpha_key(t.body, env, depth))
    return (type(t).__name__,) + tuple(
        alpha_key(getattr(t, name), env, depth) for name in _PLAIN_FIELDS[type(t)]
    )


def alpha_equal(t: Term, u: Term) -> bool:
    return alpha_key(t) == alpha_key(u)


# Variables and substitution

def free_vars(t: Term) -> FrozenSet[str]:
    if isinstance(t, Var):
        return frozenset({t.name})
    if isinstance(t, Star):
        return frozenset()
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.var}
    if isinstance(t, (MatchSup, CasePlus)):
        return (
            free_vars(t.scrutinee)
            | (free_vars(t.left_body) - {t.left_var})
            | (free_vars(t.right_body) - {t.right_var})
        )
    result: FrozenSet[str] = frozenset()
    for name in _PLAIN_FIELDS[type(t)]:
        result |= free_vars(getattr(t, name))
    return result


def fresh_name(base: str, avoid: Set[str]) -> str:
    """Prime base until it is not in avoid"""
    name = base
    while name in avoid:
        name += "'"
    return name


def substitute(t: Term, x: str, u: Term) -> Term:
    """Capture-avoiding substitution t[u/x]"""
    return _subst(t, x, u, free_vars(u))


def _subst(t: Term, x: str, u: Term, fv_u: FrozenSet[str]) -> Term:
    if isinstance(t, Var):
        return u if t.name == x else t
    if isinstance(t, Star):
        return t
    if isinstance(t, Lam):
        if t.var == x:
            return t
        var, body = _rename_binder(t.var, t.body, x, fv_u)
        return Lam(var, t.annotation, _subst(body, x, u, fv_u))
    if isinstance(t, (MatchSup, CasePlus)):
        scrutinee = _subst(t.scrutinee, x, u, fv_u)
        left_var, left_body = t.left_var, t.left_body
        if left_var != x:
            left_var, left_body = _rename_binder(left_var, left_body, x, fv_u)
            left_body = _subst(left_body, x, u, fv_u)
        right_var, right_body = t.right_var, t.right_body
        if right_var != x:
            right_var, right_body = _rename_binder(right_var, right_body, x, fv_u)
            right_body = _subst(right_body, x, u, fv_u)
        return type(t)(scrutinee, left_var, left_body, right_var, right_body)
    if isinstance(t, Scale):
        return Scale(t.alpha, _subst(t.body, x, u, fv_u))
    children = [_subst(getattr(t, name), x, u, fv_u) for name in _PLAIN_FIELDS[type(t)]]
    return type(t)(*children)


def _rename_binder(var: str, body: Term, x: str, fv_u: FrozenSet[str]) -> Tuple[str, Term]:
    """Rename binder var in body if substituting for x would capture it"""
    if var not in fv_u:
        return var, body
    body_fv = free_vars(body)
    if x not in body_fv:
        return var, body
    new_var = fresh_name(var, set(fv_u) | set(body_fv) | {x})
    return new_var, _subst(body, var, Var(new_var), frozenset({new_var}))


def uniquify(t: Term, taken: Optional[Set[str]] = None) -> Term:
    """Alpha-rename so that no two binders in t share a name and no binder shadows a free variable"""
    taken = set(free_vars(t)) if taken is None else taken
    return _uniquify(t, taken, {})


def _uniquify(t: Term, taken: Set[str], renaming: Dict[str, str]) -> Term:
    def bind(var: str) -> Tuple[str, Dict[str, str]]:
        new_var = fresh_name(var, taken)
        taken.add(new_var)
        inner = dict(renaming)
        inner[var] = new_var
        return new_var, inner

    if isinstance(t, Var):
        return Var(renaming.get(t.name, t.name))
    if isinstance(t, Star):
        return t
    if isinstance(t, Lam):
        var, inner = bind(t.var)
        return Lam(var, t.annotation, _uniquify(t.body, taken, inner))
    if isinstance(t, (MatchSup, CasePlus)):
        scrutinee = _uniquify(t.scrutinee, taken, renaming)
        left_var, left_env = bind(t.left_var)
        left_body = _uniquify(t.left_body, taken, left_env)
        right_var, right_env = bind(t.right_var)
        right_body = _uniquify(t.right_body, taken, right_env)
        return type(t)(scrutinee, left_var, left_body, right_var, right_body)
    if isinstance(t, Scale):
        return Scale(t.alpha, _uniquify(t.body, taken, renaming))
    children = [_uniquify(getattr(t, name), taken, renaming) for name in _PLAIN_FIELDS[type(t)]]
    return type(t)(*children)


# Typing

def typecheck(ctx: Context, t: Term) -> Prop:
    """
    Infer the unique proposition A with ctx ⊢ t : A

    Raises:
        TypeMismatch: a rule premise is violated (the error carries the subterm)
        UnboundVariable: a variable is not in ctx
        AnnotationRequired: application of a non-lolli term, or an injection
            whose other side cannot be determined
    """
    return _infer(ctx, t)


def check(ctx: Context, t: Term, expected: Prop) -> None:
    """Check ctx ⊢ t : expected"""
    _check(ctx, t, expected)


def _mismatch(t: Term, expected: str, found: Prop) -> TypeMismatch:
    return TypeMismatch(f"Expected {expected} but found {found} in: {t}", t)


def _infer(ctx: Context, t: Term) -> Prop:
    if isinstance(t, Var):
        prop = lookup(ctx, t.name)
        if prop is None:
            raise UnboundVariable(f"Unbound variable '{t.name}'", t)
        return prop

    if isinstance(t, Star):
        return Top()

    if isinstance(t, SupPair):
        return Odot(_infer(ctx, t.left), _infer(ctx, t.right))

    if isinstance(t, MatchSup):
        scrutinee = _infer(ctx, t.scrutinee)
        if not isinstance(scrutinee, Odot):
            raise _mismatch(t.scrutinee, "a sup proposition A odot B", scrutinee)
        return _infer_branches(
            t,
            (extend(ctx, t.left_var, scrutinee.left), t.left_body),
            (extend(ctx, t.right_var, scrutinee.right), t.right_body),
        )

    if isinstance(t, Lam):
        return Lolli(t.annotation, _infer(extend(ctx, t.var, t.annotation), t.body))

    if isinstance(t, App):
        fun = _infer(ctx, t.fun)
        if not isinstance(fun, Lolli):
            raise AnnotationRequired(f"Cannot apply a term of type {fun}: {t.fun}", t.fun)
        _check(ctx, t.arg, fun.domain)
        return fun.codomain

    if isinstance(t, Sum):
        return _infer_branches(t, (ctx, t.left), (ctx, t.right))

    if isinstance(t, Scale):
        return _infer(ctx, t.body)

    if isinstance(t, (Inl, Inr)):
        raise AnnotationRequired(
            f"Cannot infer the other side of the injection {t}; use it where its type is known",
            t,
        )

    if isinstance(t, Inlr):
        return Plus(_infer(ctx, t.left), _infer(ctx, t.right))

    if isinstance(t, CasePlus):
        scrutinee = _infer(ctx, t.scrutinee)
        if not isinstance(scrutinee, Plus):
            raise _mismatch(t.scrutinee, "a disjunction A (+) B", scrutinee)
        return _infer_branches(
            t,
            (extend(ctx, t.left_var, scrutinee.left), t.left_body),
            (extend(ctx, t.right_var, scrutinee.right), t.right_body),
        )

    if isinstance(t, WithPair):
        return With(_infer(ctx, t.left), _infer(ctx, t.right))

    if isinstance(t, (Proj1, Proj2)):
        body = _infer(ctx, t.body)
        if not isinstance(body, With):
            raise _mismatch(t.body, "a conjunction A & B", body)
        return body.left if isinstance(t, Proj1) else body.right

    raise TypeError(f"Not a term: {t!r}")


def _infer_branches(whole: Term, first: Tuple[Context, Term], second: Tuple[Context, Term]) -> Prop:
    """Both premises must have one type; either may supply it to the other"""
    try:
        prop = _infer(*first)
    except AnnotationRequired:
        prop = _infer(*second)
        _check(first[0], first[1], prop)
        return prop
    try:
        _check(second[0], second[1], prop)
    except TypeMismatch as e:
        if e.term is second[1]:
            found = _infer(*second)
            raise TypeMismatch(
                f"Both premises must share one type, found {prop} and {found} in: {whole}",
                whole,
            ) from e
        raise
    return prop


def _check(ctx: Context, t: Term, expected: Prop) -> None:
    if isinstance(t, (Inl, Inr)):
        if not isinstance(expected, Plus):
            raise TypeMismatch(f"Injection {t} cannot have type {expected}", t)
        _check(ctx, t.body, expected.left if isinstance(t, Inl) else expected.right)
        return

    if isinstance(t, Inlr) and isinstance(expected, Plus):
        _check(ctx, t.left, expected.left)
        _check(ctx, t.right, expected.right)
        return

    if isinstance(t, SupPair) and isinstance(expected, Odot):
        _check(ctx, t.left, expected.left)
        _check(ctx, t.right, expected.right)
        return

    if isinstance(t, WithPair) and isinstance(expected, With):
        _check(ctx, t.left, expected.left)
        _check(ctx, t.right, expected.right)
        return

    if isinstance(t, Lam) and isinstance(expected, Lolli) and t.annotation == expected.domain:
        _check(extend(ctx, t.var, t.annotation), t.body, expected.codomain)
        return

    if isinstance(t, Sum):
        _check(ctx, t.left, expected)
        _check(ctx, t.right, expected)
        return

    if isinstance(t, Scale):
        _check(ctx, t.body, expected)
        return

    if isinstance(t, (MatchSup, CasePlus)):
        scrutinee = _infer(ctx, t.scrutinee)
        wanted = Odot if isinstance(t, MatchSup) else Plus
        if not isinstance(scrutinee, wanted):
            raise _mismatch(t.scrutinee, "a sup proposition A odot B" if wanted is Odot
                            else "a disjunction A (+) B", scrutinee)
        _check(extend(ctx, t.left_var, scrutinee.left), t.left_body, expected)
        _check(extend(ctx, t.right_var, scrutinee.right), t.right_body, expected)
        return

    found = _infer(ctx, t)
    if found != expected:
        raise _mismatch(t, str(expected), found)


# Strict-linearity lint

@dataclass
class LintFinding:
    """A bound variable not used exactly once in some additive world"""
    variable: str
    binder: str
    counts: List[int]

    def __str__(self) -> str:
        shown = ", ".join(str(c) for c in self.counts)
        return f"{self.binder}-bound variable '{self.variable}' used {shown} time(s), expected exactly 1"


@dataclass
class LintReport:
    findings: List[LintFinding] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.findings


def linear_lint(t: Term) -> LintReport:
    """
    Flag λ- and match-bound variables not used exactly once on every additive branch.

    The two branches of match/case and the two components of a with-pair are
    parallel worlds; the operands of Sum and Scale (and every other former)
    belong to the same world.
    """
    report = LintReport()
    _lint(t, report)
    return report


def _lint(t: Term, report: LintReport) -> None:
    if isinstance(t, Lam):
        _record(report, t.var, "lambda", t.body)
        _lint(t.body, report)
        return
    if isinstance(t, (MatchSup, CasePlus)):
        kind = "smatch" if isinstance(t, MatchSup) else "pmatch"
        _lint(t.scrutinee, report)
        _record(report, t.left_var, kind, t.left_body)
        _record(report, t.right_var, kind, t.right_body)
        _lint(t.left_body, report)
        _lint(t.right_body, report)
        return
    for name in _PLAIN_FIELDS[type(t)]:
        _lint(getattr(t, name), report)


def _record(report: LintReport, var: str, binder: str, body: Term) -> None:
    counts = _usage(body, var)
    if counts != {1}:
        report.findings.append(LintFinding(var, binder, sorted(counts)))


def _usage(t: Term, x: str) -> Set[int]:
    """Possible occurrence counts of x across the additive worlds of t"""
    if isinstance(t, Var):
        return {1 if t.name == x else 0}
    if isinstance(t, Star):
        return {0}
    if isinstance(t, Lam):
        return {0} if t.var == x else _usage(t.body, x)
    if isinstance(t, (MatchSup, CasePlus)):
        left = {0} if t.left_var == x else _usage(t.left_body, x)
        right = {0} if t.right_var == x else _usage(t.right_body, x)
        return _combine(_usage(t.scrutinee, x), left | right)
    if isinstance(t, WithPair):
        return _usage(t.left, x) | _usage(t.right, x)
    counts = {0}
    for name in _PLAIN_FIELDS[type(t)]:
        counts = _combine(counts, _usage(getattr(t, name), x))
    return counts


def _combine(first: Set[int], second: Set[int]) -> Set[int]:
    return {a + b for a in first for b in second}
