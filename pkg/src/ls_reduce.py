"""
Cut elimination as rewriting.

Deterministic mode sums both paths of a sup-cut; probabilistic mode picks one
path with Born-rule probabilities drawn from a seeded numpy Generator.
Arguments of beta and scrutinees of sup-matches are normalized before those
rules fire.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import FuelExhausted, StuckTerm, ZeroNorm
from .ls_core import (
    REDUCIBLE_FIELDS, App, CasePlus, Inl, Inlr, Inr, Lam, MatchSup, Proj1, Proj2, Scale,
    Star, Sum, SupPair, Term, WithPair, substitute,
)
from .scalars import DEFAULT_EPS, add, inv_sqrt_real, mul, sq_modulus

DEFAULT_FUEL = 10 ** 6

OUTERMOST = "outermost"
INNERMOST = "innermost"
STRATEGIES = (OUTERMOST, INNERMOST)

Path = Tuple[int, ...]


@dataclass(frozen=True)
class Mode:
    """Deterministic by default; probabilistic runs need a seed"""
    probabilistic: bool = False
    seed: Optional[int] = None
    renormalize: bool = True

    def __post_init__(self):
        if self.probabilistic and self.seed is None:
            raise ValueError("Probabilistic mode requires a seed")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")


DETERMINISTIC = Mode()


def probabilistic(seed: int, renormalize: bool = True) -> Mode:
    return Mode(probabilistic=True, seed=seed, renormalize=renormalize)


@dataclass(frozen=True)
class TraceStep:
    """One rewrite: rule, redex path from the root, and the whole term after it"""
    rule: str
    path: Path
    result: Term
    probability: Optional[float] = None
    choice: Optional[str] = None


@dataclass
class ReductionTrace:
    initial: Term
    mode: Mode = DETERMINISTIC
    steps: List[TraceStep] = field(default_factory=list)

    @property
    def final(self) -> Term:
        return self.steps[-1].result if self.steps else self.initial

    @property
    def step_count(self) -> int:
        return len(self.steps)

    @property
    def branches(self) -> List[Tuple[str, float]]:
        """(chosen branch, probability) of every probabilistic step"""
        return [(s.choice, s.probability) for s in self.steps if s.choice is not None]

    def to_log(self) -> str:
        lines = []
        for k, s in enumerate(self.steps, start=1):
            line = f"step {k}: {s.rule} at {format_path(s.path)} ⇒ {s.result}"
            if s.choice is not None:
                line += f" p={s.probability!r} chose={s.choice}"
            lines.append(line)
        return "\n".join(lines)


def format_path(path: Path) -> str:
    return ".".join(str(i) for i in path) if path else "root"


# Canonical forms

def canonical_depth(t: Term) -> Optional[int]:
    """n if t is a closed irreducible proof of Q⊗n, else None"""
    if isinstance(t, Star):
        return 0
    if isinstance(t, SupPair):
        left = canonical_depth(t.left)
        if left is not None and left == canonical_depth(t.right):
            return left + 1
    return None


def is_canonical(t: Term, n: int) -> bool:
    return canonical_depth(t) == n


def sq_norm(t: Term) -> float:
    if isinstance(t, Star):
        return sq_modulus(t.alpha)
    return sq_norm(t.left) + sq_norm(t.right)


def split_weights(c: Term, eps: float = DEFAULT_EPS) -> Tuple[float, float]:
    """
    Squared norms of the two halves of a canonical pair, each clamped to 0 when <= eps

    Raises:
        StuckTerm: if c is not a canonical pair
        ZeroNorm: if both halves clamp to 0
    """
    depth = canonical_depth(c)
    if depth is None or depth == 0:
        raise StuckTerm(f"Cannot measure a term that is not a canonical Q^(n+1) state: {c}")
    left = sq_norm(c.left)
    right = sq_norm(c.right)
    left = 0.0 if left <= eps else left
    right = 0.0 if right <= eps else right
    if left == 0.0 and right == 0.0:
        raise ZeroNorm(f"Both branches of {c} have a squared norm below {eps}")
    return left, right


# Rules. Each takes a node and returns its contractum, or None if it does not apply.

def _pair_sum(t: Term) -> Optional[Term]:
    if isinstance(t, Sum) and isinstance(t.left, SupPair) and isinstance(t.right, SupPair):
        return SupPair(Sum(t.left.left, t.right.left), Sum(t.left.right, t.right.right))
    return None


def _star_sum(t: Term) -> Optional[Term]:
    if isinstance(t, Sum) and isinstance(t.left, Star) and isinstance(t.right, Star):
        return Star(add(t.left.alpha, t.right.alpha))
    return None


def _with_sum(t: Term) -> Optional[Term]:
    if isinstance(t, Sum) and isinstance(t.left, WithPair) and isinstance(t.right, WithPair):
        return WithPair(Sum(t.left.left, t.right.left), Sum(t.left.right, t.right.right))
    return None


def _sides(t: Term) -> Tuple[Optional[Term], Optional[Term]]:
    if isinstance(t, Inl):
        return t.body, None
    if isinstance(t, Inr):
        return None, t.body
    return t.left, t.right


def _join(first: Optional[Term], second: Optional[Term]) -> Optional[Term]:
    if first is None:
        return second
    if second is None:
        return first
    return Sum(first, second)


def _inj_sum(t: Term) -> Optional[Term]:
    injections = (Inl, Inr, Inlr)
    if not (isinstance(t, Sum) and isinstance(t.left, injections) and isinstance(t.right, injections)):
        return None
    left_a, right_a = _sides(t.left)
    left_b, right_b = _sides(t.right)
    left, right = _join(left_a, left_b), _join(right_a, right_b)
    if right is None:
        return Inl(left)
    if left is None:
        return Inr(right)
    return Inlr(left, right)


def _scale_pair(t: Term) -> Optional[Term]:
    if isinstance(t, Scale) and isinstance(t.body, SupPair):
        return SupPair(Scale(t.alpha, t.body.left), Scale(t.alpha, t.body.right))
    return None


def _scale_star(t: Term) -> Optional[Term]:
    if isinstance(t, Scale) and isinstance(t.body, Star):
        return Star(mul(t.alpha, t.body.alpha))
    return None


def _scale_sum(t: Term) -> Optional[Term]:
    if isinstance(t, Scale) and isinstance(t.body, Sum):
        return Sum(Scale(t.alpha, t.body.left), Scale(t.alpha, t.body.right))
    return None


def _scale_scale(t: Term) -> Optional[Term]:
    if isinstance(t, Scale) and isinstance(t.body, Scale):
        return Scale(mul(t.alpha, t.body.alpha), t.body.body)
    return None


def _scale_inj(t: Term) -> Optional[Term]:
    if not isinstance(t, Scale):
        return None
    body = t.body
    if isinstance(body, Inl):
        return Inl(Scale(t.alpha, body.body))
    if isinstance(body, Inr):
        return Inr(Scale(t.alpha, body.body))
    if isinstance(body, Inlr):
        return Inlr(Scale(t.alpha, body.left), Scale(t.alpha, body.right))
    return None


def _scale_with(t: Term) -> Optional[Term]:
    if isinstance(t, Scale) and isinstance(t.body, WithPair):
        return WithPair(Scale(t.alpha, t.body.left), Scale(t.alpha, t.body.right))
    return None


def _case_inl(t: Term) -> Optional[Term]:
    if isinstance(t, CasePlus) and isinstance(t.scrutinee, Inl):
        return substitute(t.left_body, t.left_var, t.scrutinee.body)
    return None


def _case_inr(t: Term) -> Optional[Term]:
    if isinstance(t, CasePlus) and isinstance(t.scrutinee, Inr):
        return substitute(t.right_body, t.right_var, t.scrutinee.body)
    return None


def _case_inlr(t: Term) -> Optional[Term]:
    if isinstance(t, CasePlus) and isinstance(t.scrutinee, Inlr):
        return Sum(
            substitute(t.left_body, t.left_var, t.scrutinee.left),
            substitute(t.right_body, t.right_var, t.scrutinee.right),
        )
    return None


def _proj1(t: Term) -> Optional[Term]:
    if isinstance(t, Proj1) and isinstance(t.body, WithPair):
        return t.body.left
    return None


def _proj2(t: Term) -> Optional[Term]:
    if isinstance(t, Proj2) and isinstance(t.body, WithPair):
        return t.body.right
    return None


def _elim_commute(t: Term) -> Optional[Term]:
    """Eliminations distribute over the Sum and Scalar rules in their principal premise"""
    if isinstance(t, (MatchSup, CasePlus)):
        principal, rebuild = t.scrutinee, lambda s: replace(t, scrutinee=s)
    elif isinstance(t, App):
        principal, rebuild = t.fun, lambda f: App(f, t.arg)
    elif isinstance(t, (Proj1, Proj2)):
        principal, rebuild = t.body, type(t)
    else:
        return None
    if isinstance(principal, Sum):
        return Sum(rebuild(principal.left), rebuild(principal.right))
    if isinstance(principal, Scale):
        return Scale(principal.alpha, rebuild(principal.body))
    return None


def _beta(t: Term) -> Optional[Term]:
    if isinstance(t, App) and isinstance(t.fun, Lam):
        return substitute(t.fun.body, t.fun.var, t.arg)
    return None


def _match_det(t: Term) -> Optional[Term]:
    if isinstance(t, MatchSup) and isinstance(t.scrutinee, SupPair):
        return Sum(
            substitute(t.left_body, t.left_var, t.scrutinee.left),
            substitute(t.right_body, t.right_var, t.scrutinee.right),
        )
    return None


RULES: Dict[str, Callable[[Term], Optional[Term]]] = {
    "pair-sum": _pair_sum,
    "star-sum": _star_sum,
    "with-sum": _with_sum,
    "inj-sum": _inj_sum,
    "scale-pair": _scale_pair,
    "scale-star": _scale_star,
    "scale-sum": _scale_sum,
    "scale-scale": _scale_scale,
    "scale-inj": _scale_inj,
    "scale-with": _scale_with,
    "case-inl": _case_inl,
    "case-inr": _case_inr,
    "case-inlr": _case_inlr,
    "proj1": _proj1,
    "proj2": _proj2,
    "elim-commute": _elim_commute,
    "beta": _beta,
    "match-det": _match_det,
}

MATCH_PROB = "match-prob"

# Rules tried at a node before its children
_PRE = [
    "pair-sum", "star-sum", "with-sum", "inj-sum",
    "scale-pair", "scale-star", "scale-sum", "scale-scale", "scale-inj", "scale-with",
    "case-inl", "case-inr", "case-inlr", "proj1", "proj2",
]
_PRE_DET = _PRE + ["elim-commute"]

# Rules tried once the children are in normal form
_POST_DET = ["beta", "elim-commute", "match-det"]
_POST_PROB = ["beta"]

# A match only commutes with its scrutinee once the scrutinee is normal
_MATCHES = (MatchSup, CasePlus)


@dataclass(frozen=True)
class Redex:
    """Where the next rule fires; result is None for a collapse still to be drawn"""
    path: Path
    rule: str
    node: Term
    result: Optional[Term]


def _try(t: Term, names: List[str]) -> Optional[Tuple[str, Term]]:
    for name in names:
        result = RULES[name](t)
        if result is not None:
            return name, result
    return None


def _post(t: Term, mode: Mode) -> Optional[Tuple[str, Optional[Term]]]:
    if not mode.probabilistic:
        return _try(t, _POST_DET)
    found = _try(t, _POST_PROB)
    if found is None and isinstance(t, MatchSup):
        if not canonical_depth(t.scrutinee):
            raise StuckTerm(
                f"Probabilistic match needs a canonical Q^(n+1) scrutinee, found {t.scrutinee}"
            )
        return MATCH_PROB, None
    return found


def find_redex(t: Term, mode: Mode = DETERMINISTIC, strategy: str = OUTERMOST,
               path: Path = ()) -> Optional[Redex]:
    """Locate the next redex without contracting probabilistic ones"""
    pre = _PRE if mode.probabilistic or isinstance(t, _MATCHES) else _PRE_DET
    children = list(enumerate(REDUCIBLE_FIELDS[type(t)]))

    if strategy == OUTERMOST:
        found = _try(t, pre)
        if found is not None:
            return Redex(path, found[0], t, found[1])
        for index, name in children:
            redex = find_redex(getattr(t, name), mode, strategy, path + (index,))
            if redex is not None:
                return redex
    elif strategy == INNERMOST:
        for index, name in reversed(children):
            redex = find_redex(getattr(t, name), mode, strategy, path + (index,))
            if redex is not None:
                return redex
        found = _try(t, pre)
        if found is not None:
            return Redex(path, found[0], t, found[1])
    else:
        raise ValueError(f"Unknown strategy '{strategy}', expected one of {STRATEGIES}")

    found = _post(t, mode)
    if found is not None:
        return Redex(path, found[0], t, found[1])
    return None


def collapse(t: MatchSup, mode: Mode, rng: Optional[np.random.Generator],
             eps: float = DEFAULT_EPS, choice: Optional[str] = None) -> Tuple[Term, float, str]:
    """
    Reduce a measurement match to one branch.

    Args:
        t: match whose scrutinee is a canonical pair
        mode: probabilistic mode (renormalize flag)
        rng: draws the branch when choice is not given
        eps: weights at or below eps count as 0
        choice: "L" or "R" to replay a recorded branch

    Returns:
        tuple: (contractum, probability of the chosen branch, chosen branch)
    """
    c = t.scrutinee
    left, right = split_weights(c, eps)
    p_left = left / (left + right)
    if choice is None:
        choice = "L" if rng.random() < p_left else "R"
    if choice == "L":
        part, weight, var, body, probability = c.left, left, t.left_var, t.left_body, p_left
    else:
        part, weight, var, body, probability = c.right, right, t.right_var, t.right_body, 1.0 - p_left
    if mode.renormalize:
        part = Scale(inv_sqrt_real(weight, eps), part)
    return substitute(body, var, part), probability, choice


def subterm(t: Term, path: Path) -> Term:
    for index in path:
        t = getattr(t, REDUCIBLE_FIELDS[type(t)][index])
    return t


def replace_at(t: Term, path: Path, new: Term) -> Term:
    if not path:
        return new
    name = REDUCIBLE_FIELDS[type(t)][path[0]]
    return replace(t, **{name: replace_at(getattr(t, name), path[1:], new)})


def _contract(t: Term, redex: Redex, mode: Mode, rng: Optional[np.random.Generator],
              eps: float) -> TraceStep:
    if redex.rule == MATCH_PROB:
        result, probability, choice = collapse(redex.node, mode, rng, eps)
        return TraceStep(MATCH_PROB, redex.path, replace_at(t, redex.path, result), probability, choice)
    return TraceStep(redex.rule, redex.path, replace_at(t, redex.path, redex.result))


def step(t: Term, mode: Mode = DETERMINISTIC, rng: Optional[np.random.Generator] = None,
         strategy: str = OUTERMOST, eps: float = DEFAULT_EPS) -> Optional[Tuple[Term, str]]:
    """
    Apply one rule, or return None if t is in normal form for the mode

    Raises:
        StuckTerm: probabilistic match on a scrutinee with no canonical Q^(n+1) form
        ZeroNorm: both branch weights of a measurement at or below eps
    """
    redex = find_redex(t, mode, strategy)
    if redex is None:
        return None
    if mode.probabilistic and rng is None:
        rng = np.random.default_rng(mode.seed)
    taken = _contract(t, redex, mode, rng, eps)
    return taken.result, taken.rule


def normalize(t: Term, mode: Mode = DETERMINISTIC, fuel: int = DEFAULT_FUEL,
              strategy: str = OUTERMOST, eps: float = DEFAULT_EPS) -> Tuple[Term, ReductionTrace]:
    """
    Rewrite t until no rule applies

    Returns:
        tuple: (normal form, trace of every step)

    Raises:
        FuelExhausted: if a rule still applies after `fuel` steps; carries the partial trace
    """
    rng = np.random.default_rng(mode.seed) if mode.probabilistic else None
    trace = ReductionTrace(t, mode)
    current = t
    for _ in range(fuel):
        redex = find_redex(current, mode, strategy)
        if redex is None:
            return current, trace
        taken = _contract(current, redex, mode, rng, eps)
        trace.steps.append(taken)
        current = taken.result
    if find_redex(current, mode, strategy) is None:
        return current, trace
    raise FuelExhausted(f"Reduction did not finish within {fuel} steps", partial=trace)


def replay(trace: ReductionTrace, eps: float = DEFAULT_EPS) -> Term:
    """
    Re-apply the recorded rules at their recorded paths, reusing recorded branch choices

    Raises:
        ValueError: if a recorded rule does not apply where it was recorded
    """
    current = trace.initial
    for k, recorded in enumerate(trace.steps, start=1):
        node = subterm(current, recorded.path)
        if recorded.rule == MATCH_PROB:
            result, _, _ = collapse(node, trace.mode, None, eps, recorded.choice)
        else:
            result = RULES[recorded.rule](node)
        if result is None:
            raise ValueError(f"Step {k}: {recorded.rule} does not apply at {format_path(recorded.path)}")
        current = replace_at(current, recorded.path, result)
    return current
