"""
Concrete ASCII syntax for propositions, proof terms and Lambda-S programs.

Propositions: `T`, `Q^n`, `A odot B`, `A -o B`, and with extensions `A (+) B`, `A & B`.
Terms: `star(α)`, `[t, r]`, `smatch t { x => r | y => s }`, `lam x: A. t`,
application by juxtaposition, `t + r`, `α * t`, and with extensions `<t, r>`,
`inl t`, `inr t`, `inlr t r`, `pmatch t { inl x => r | inr y => s }`,
`proj1 t`, `proj2 t`. `--` starts a line comment.

A source file is a sequence of `def name = term ;` definitions; a first line
reading `%lambda-s` switches the file to the Lambda-S language.

The grammar below is compiled once into a lark LALR parser whose transformer
builds AST nodes as rules are reduced, so parsing itself never recurses.
"""

import re
from dataclasses import dataclass, field, fields
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, UnexpectedToken, VisitError

from .errors import ExtensionDisabled, LSQError, ParseError
from .lambda_s import (
    BOOL, Arrow, Base, SApp, SFalse, SLam, SScale, SSum, STerm, STrue, SType, SVar, Span,
    s_free_vars, s_substitute, s_uniquify,
)
from .ls_core import (
    App, CasePlus, Inl, Inlr, Inr, Lam, Lolli, MatchSup, Odot, Plus, Proj1, Proj2,
    Prop, Scale, Star, Sum, SupPair, Term, Top, Var, With, WithPair, free_vars, qpow,
    substitute, uniquify,
)
from .scalars import Scalar, format_scalar, real_literal

LANGUAGE_LS = "ls"
LANGUAGE_LAMBDA_S = "lambda-s"
LAMBDA_S_HEADER = "%lambda-s"
MAX_QPOW = 16
# Deeper syntax trees are rejected so every later pass stays within the interpreter's recursion limit
MAX_DEPTH = 200

TERM_KEYWORDS = frozenset({
    "lam", "star", "smatch", "pmatch", "inl", "inr", "inlr", "proj1", "proj2", "def", "odot",
})
S_KEYWORDS = frozenset({"lam", "true", "false", "def"})

GRAMMAR = r"""
// Propositions

?prop: prop_chain
     | prop_chain LOLLI prop                      -> lolli

?prop_chain: prop_atom
     | prop_atom (ODOT prop_atom)+                -> odot_chain
     | prop_atom (OPLUS prop_atom)+               -> plus_chain
     | prop_atom (AMP prop_atom)+                 -> with_chain

?prop_atom: "T"                                   -> top
     | QPOW                                       -> register
     | "(" prop ")"

// Proof terms: + is loosest, then scaling, then application

?term: scaled
     | term PLUS scaled                           -> add

?scaled: app
     | scalar "*" scaled                          -> scale

?app: factor
     | app factor                                 -> apply

?factor: IDENT                                    -> var
     | "(" term ")"
     | "[" term "," term "]"                      -> sup_pair
     | LANGLE term "," term ">"                   -> with_pair
     | "star" "(" scalar ")"                      -> star
     | "lam" IDENT ":" prop "." term              -> lam
     | "smatch" term "{" IDENT "=>" term "|" IDENT "=>" term "}"        -> smatch
     | PMATCH term "{" INL IDENT "=>" term "|" INR IDENT "=>" term "}"  -> pmatch
     | INL factor                                 -> inl
     | INR factor                                 -> inr
     | INLR factor factor                         -> inlr
     | PROJ1 factor                               -> proj1
     | PROJ2 factor                               -> proj2

scalar: MINUS? NUM ((PLUS | MINUS) IMAG)?
      | MINUS? IMAG

// Lambda-S

?stype: stype_atom
     | stype_atom "->" stype                      -> arrow

?stype_atom: "Bool"                               -> bool_type
     | "S" "(" stype ")"                          -> span
     | "(" stype ")"

?sterm: sscaled
     | sterm PLUS sscaled                         -> s_add

?sscaled: sapp
     | scalar "*" sscaled                         -> s_scale

?sapp: sfactor
     | sapp sfactor                               -> s_apply

?sfactor: IDENT                                   -> s_var
     | "true"                                     -> s_true
     | "false"                                    -> s_false
     | "lam" IDENT ":" stype "." sterm            -> s_lam
     | "(" sterm ")"

// Programs

ls_source: ls_definition*
ls_definition: "def" IDENT "=" term ";"

s_source: s_definition*
s_definition: "def" IDENT "=" sterm ";"

PLUS: "+"
MINUS: "-"
ODOT: "odot"
OPLUS: "(+)"
AMP: "&"
LANGLE: "<"
PMATCH: "pmatch"
INL: "inl"
INR: "inr"
INLR: "inlr"
PROJ1: "proj1"
PROJ2: "proj2"
LOLLI: /-o(?![A-Za-z0-9_'])/
QPOW.2: /Q\^[0-9]+/
IMAG.2: /(?:1\/sqrt2|[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?)i(?![A-Za-z0-9_'])/
NUM: /1\/sqrt2|[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?/
IDENT: /[A-Za-z_][A-Za-z0-9_']*/
COMMENT: /--[^\n]*/
WS: /[ \t\r\n]+/

%ignore WS
%ignore COMMENT
"""

STARTS = ("prop", "term", "scalar", "stype", "sterm", "ls_source", "s_source")

_TERMINAL_NAMES = {
    "$END": "end of input",
    "IDENT": "a name",
    "NUM": "a number",
    "IMAG": "an imaginary number",
    "QPOW": "Q^n",
    "LOLLI": "'-o'",
}


class SyntaxBuilder(Transformer):
    """Turns each reduced grammar rule into its AST node; tokens keep their positions for errors"""

    def __init__(self, extensions: bool = False):
        super().__init__()
        self.extensions = extensions

    def require_extensions(self, token: Token) -> None:
        if not self.extensions:
            raise ExtensionDisabled(f"'{token}' needs the additive extension (--ext)", token.line, token.column)

    @staticmethod
    def name(token: Token, reserved: frozenset = TERM_KEYWORDS) -> str:
        if token in reserved:
            raise ParseError(f"'{token}' is a keyword, not a name", token.line, token.column)
        return str(token)

    # Scalars

    @staticmethod
    def real(token: Token) -> float:
        digits = token[:-1] if token.type == "IMAG" else str(token)
        value = real_literal(digits)
        if value == float("inf"):
            raise ParseError(f"Number literal {digits} is out of range", token.line, token.column)
        return value

    def scalar(self, tokens: List[Token]) -> Scalar:
        negative = tokens[0].type == "MINUS"
        if negative:
            tokens = tokens[1:]
        first = self.real(tokens[0])
        if negative:
            first = -first
        if tokens[0].type == "IMAG":
            return Scalar(0.0, first)
        if len(tokens) == 1:
            return Scalar(first, 0.0)
        second = self.real(tokens[2])
        return Scalar(first, -second if tokens[1].type == "MINUS" else second)

    # Propositions

    def lolli(self, children: List[Any]) -> Prop:
        domain, _, codomain = children
        return Lolli(domain, codomain)

    def chain(self, children: List[Any], connective: type) -> Prop:
        result = children[0]
        for operator, operand in zip(children[1::2], children[2::2]):
            if connective is not Odot:
                self.require_extensions(operator)
            result = connective(result, operand)
        return result

    def odot_chain(self, children: List[Any]) -> Prop:
        return self.chain(children, Odot)

    def plus_chain(self, children: List[Any]) -> Prop:
        return self.chain(children, Plus)

    def with_chain(self, children: List[Any]) -> Prop:
        return self.chain(children, With)

    def top(self, _: List[Any]) -> Prop:
        return Top()

    def register(self, children: List[Token]) -> Prop:
        token = children[0]
        digits = token[2:]
        degree = int(digits) if len(digits) <= 3 else MAX_QPOW + 1
        if degree > MAX_QPOW:
            raise ParseError(
                f"Q^{digits} exceeds the largest supported register Q^{MAX_QPOW}", token.line, token.column
            )
        return qpow(degree)

    # Terms

    def add(self, children: List[Any]) -> Term:
        left, _, right = children
        return Sum(left, right)

    def scale(self, children: List[Any]) -> Term:
        return Scale(*children)

    def apply(self, children: List[Any]) -> Term:
        return App(*children)

    def var(self, children: List[Token]) -> Term:
        return Var(self.name(children[0]))

    def sup_pair(self, children: List[Any]) -> Term:
        return SupPair(*children)

    def with_pair(self, children: List[Any]) -> Term:
        bracket, left, right = children
        self.require_extensions(bracket)
        return WithPair(left, right)

    def star(self, children: List[Any]) -> Term:
        return Star(children[0])

    def lam(self, children: List[Any]) -> Term:
        var, annotation, body = children
        return Lam(self.name(var), annotation, body)

    def smatch(self, children: List[Any]) -> Term:
        scrutinee, left_var, left_body, right_var, right_body = children
        return MatchSup(scrutinee, self.name(left_var), left_body, self.name(right_var), right_body)

    def pmatch(self, children: List[Any]) -> Term:
        keyword, scrutinee, _, left_var, left_body, _, right_var, right_body = children
        self.require_extensions(keyword)
        return CasePlus(scrutinee, self.name(left_var), left_body, self.name(right_var), right_body)

    def inl(self, children: List[Any]) -> Term:
        self.require_extensions(children[0])
        return Inl(children[1])

    def inr(self, children: List[Any]) -> Term:
        self.require_extensions(children[0])
        return Inr(children[1])

    def inlr(self, children: List[Any]) -> Term:
        self.require_extensions(children[0])
        return Inlr(children[1], children[2])

    def proj1(self, children: List[Any]) -> Term:
        self.require_extensions(children[0])
        return Proj1(children[1])

    def proj2(self, children: List[Any]) -> Term:
        self.require_extensions(children[0])
        return Proj2(children[1])

    # Lambda-S

    def arrow(self, children: List[Any]) -> SType:
        return Arrow(*children)

    def bool_type(self, _: List[Any]) -> SType:
        return BOOL

    def span(self, children: List[Any]) -> SType:
        return Span(children[0])

    def s_add(self, children: List[Any]) -> STerm:
        left, _, right = children
        return SSum(left, right)

    def s_scale(self, children: List[Any]) -> STerm:
        return SScale(*children)

    def s_apply(self, children: List[Any]) -> STerm:
        return SApp(*children)

    def s_var(self, children: List[Token]) -> STerm:
        return SVar(self.name(children[0], S_KEYWORDS))

    def s_true(self, _: List[Any]) -> STerm:
        return STrue()

    def s_false(self, _: List[Any]) -> STerm:
        return SFalse()

    def s_lam(self, children: List[Any]) -> STerm:
        var, annotation, body = children
        return SLam(self.name(var, S_KEYWORDS), annotation, body)

    # Programs

    def definition(self, children: List[Any]) -> Tuple[Token, Any]:
        name, body = children
        self.name(name, TERM_KEYWORDS | S_KEYWORDS)
        return name, body

    ls_definition = definition
    s_definition = definition

    def source(self, definitions: List[Tuple[Token, Any]]) -> List[Tuple[Token, Any]]:
        seen = set()
        for name, _ in definitions:
            if name in seen:
                raise ParseError(f"Duplicate definition '{name}'", name.line, name.column)
            seen.add(str(name))
        return definitions

    ls_source = source
    s_source = source


@lru_cache(maxsize=None)
def syntax(extensions: bool = False) -> Lark:
    """The LALR parser for every start symbol, with the AST built during the parse"""
    return Lark(GRAMMAR, parser="lalr", start=list(STARTS), transformer=SyntaxBuilder(extensions))


@dataclass
class Definition:
    """A named top-level definition, already inlined"""
    name: str
    term: Any
    line: int


@dataclass
class SourceFile:
    """Parsed program: definitions in order, and main if defined"""
    definitions: List[Definition] = field(default_factory=list)
    language: str = LANGUAGE_LS

    @property
    def main(self) -> Optional[Any]:
        for definition in self.definitions:
            if definition.name == "main":
                return definition.term
        return None


# Positions and errors

_LEADING = re.compile(r"(?:[ \t\r\n]+|--[^\n]*)*")


def _position(text: str, offset: int) -> Tuple[int, int]:
    before = text[:offset]
    return before.count("\n") + 1, offset - (before.rfind("\n") + 1) + 1


def _describe_expected(parser: Lark, names: Iterable[str]) -> str:
    described = set()
    for name in names:
        if name in _TERMINAL_NAMES:
            described.add(_TERMINAL_NAMES[name])
            continue
        try:
            described.add(f"'{parser.get_terminal(name).pattern.value}'")
        except KeyError:
            described.add(name)
    shown = sorted(described)
    return shown[0] if len(shown) == 1 else "one of " + ", ".join(shown)


def _parse(text: str, start: str, extensions: bool = False) -> Any:
    """
    Run the parser from one start symbol

    Raises:
        ParseError: positioned at the first character or token the grammar cannot accept
    """
    parser = syntax(extensions)
    try:
        return parser.parse(text, start=start)
    except UnexpectedCharacters as e:
        raise ParseError(f"Unexpected character {e.char!r}", e.line, e.column) from None
    except UnexpectedToken as e:
        expected = _describe_expected(parser, e.expected)
        if e.token.type == "$END":
            raise ParseError(f"Unexpected end of input, expected {expected}",
                             *_position(text, len(text))) from None
        raise ParseError(f"Expected {expected} but found '{e.token}'", e.line, e.column) from None
    except UnexpectedInput as e:
        raise ParseError("Unexpected input", max(e.line, 1), max(e.column, 1)) from None
    except VisitError as e:
        if isinstance(e.orig_exc, LSQError):
            raise e.orig_exc from None
        raise


def nesting_depth(node: Any) -> int:
    """Height of a syntax tree, walked without recursion"""
    syntax_nodes = (Prop, Term, SType, STerm)
    deepest = 0
    pending = [(node, 1)]
    while pending:
        current, level = pending.pop()
        deepest = max(deepest, level)
        for child in fields(current):
            value = getattr(current, child.name)
            if isinstance(value, syntax_nodes):
                pending.append((value, level + 1))
    return deepest


def _bounded(node: Any, line: int, column: int) -> Any:
    if nesting_depth(node) > MAX_DEPTH:
        raise ParseError(f"Input is nested too deeply (more than {MAX_DEPTH} levels)", line, column)
    return node


def _after_parse(run: Callable[[], Any], line: int, column: int) -> Any:
    """Run a pass over a parsed tree, reporting interpreter recursion overflow at the given position"""
    try:
        result = run()
    except RecursionError:
        raise ParseError("Input is nested too deeply", line, column) from None
    return _bounded(result, line, column)


def _inline(t: Term, env: Dict[str, Term]) -> Term:
    """Replace names bound in env, latest binding first, so an unresolved name inside a definition stays free"""
    for name in reversed(list(env)):
        if name in free_vars(t):
            t = substitute(t, name, env[name])
    return t


def _strip_header(text: str) -> Tuple[str, str]:
    """Blank out a leading `%lambda-s` line, keeping line numbers"""
    lines = text.split("\n")
    for index, line in enumerate(lines):
        stripped = line.strip()
        if not stripped or stripped.startswith("--"):
            continue
        if stripped == LAMBDA_S_HEADER:
            lines[index] = ""
            return "\n".join(lines), LANGUAGE_LAMBDA_S
        break
    return text, LANGUAGE_LS


def parse_scalar(text: str) -> Scalar:
    """
    Parse `a`, `ai`, `a+bi` or `a-bi` where a, b are decimal literals or `1/sqrt2`

    Raises:
        ParseError: if the text is not a scalar literal or overflows
    """
    return _parse(text, "scalar")


def parse_prop(text: str, extensions: bool = False) -> Prop:
    """
    Parse a proposition

    Raises:
        ParseError: with the line and column of the offending token
    """
    return _bounded(_parse(text, "prop", extensions), *_position(text, _LEADING.match(text).end()))


def parse_term(text: str, extensions: bool = False,
               prelude: Optional[Dict[str, Term]] = None) -> Term:
    """
    Parse a single proof term; free names found in prelude are replaced by their definitions

    Raises:
        ParseError: with the line and column of the offending token
    """
    line, column = _position(text, _LEADING.match(text).end())
    result = _bounded(_parse(text, "term", extensions), line, column)
    return _after_parse(lambda: uniquify(_inline(result, prelude) if prelude else result), line, column)


def parse_stype(text: str) -> SType:
    return _bounded(_parse(text, "stype"), *_position(text, _LEADING.match(text).end()))


def parse_sterm(text: str) -> STerm:
    line, column = _position(text, _LEADING.match(text).end())
    result = _bounded(_parse(text, "sterm"), line, column)
    return _after_parse(lambda: s_uniquify(result), line, column)


def _inline_sterm(t: STerm, env: Dict[str, STerm]) -> STerm:
    for earlier in reversed(list(env)):
        if earlier in s_free_vars(t):
            t = s_substitute(t, earlier, env[earlier])
    return s_uniquify(t)


def parse_source(text: str, prelude: Optional[Dict[str, Term]] = None,
                 extensions: bool = False) -> SourceFile:
    """
    Parse a program made of `def name = term ;` definitions.

    Each definition may mention earlier ones (inlined at parse time) and, in
    the proof language, names from the prelude. Later definitions shadow
    prelude entries of the same name.

    Args:
        text: Program text, optionally starting with a `%lambda-s` header line
        prelude: Library terms available by name
        extensions: Allow the additive connectives

    Returns:
        SourceFile: Inlined definitions in source order

    Raises:
        ParseError: on a syntax error, or a definition nested more than MAX_DEPTH levels
    """
    body, language = _strip_header(text)
    source = SourceFile(language=language)

    if language == LANGUAGE_LAMBDA_S:
        env: Dict[str, STerm] = {}
        for name, term in _parse(body, "s_source"):
            _bounded(term, name.line, name.column)
            term = _after_parse(lambda: _inline_sterm(term, env), name.line, name.column)
            env[str(name)] = term
            source.definitions.append(Definition(str(name), term, name.line))
        return source

    scope: Dict[str, Term] = dict(prelude or {})
    for name, term in _parse(body, "ls_source", extensions):
        _bounded(term, name.line, name.column)
        term = _after_parse(lambda: uniquify(_inline(term, scope)), name.line, name.column)
        scope.pop(str(name), None)
        scope[str(name)] = term
        source.definitions.append(Definition(str(name), term, name.line))
    return source


def parse_source_bytes(data: bytes, prelude: Optional[Dict[str, Term]] = None,
                       extensions: bool = False) -> SourceFile:
    """Decode UTF-8 and parse; undecodable bytes raise a positioned ParseError"""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        before = data[:e.start]
        line = before.count(b"\n") + 1
        column = e.start - (before.rfind(b"\n") + 1) + 1
        raise ParseError("Input is not valid UTF-8", line, column) from None
    return parse_source(text, prelude=prelude, extensions=extensions)


# Printing

# Term printing contexts, loosest first
_DELIMITED, _SUM_LEFT, _SUM_RIGHT, _SCALED, _FUN, _ARG = range(6)


def pretty(x: Any) -> str:
    """Sugar-free text that reparses to an alpha-equivalent value"""
    if isinstance(x, Prop):
        return _pretty_prop(x)
    if isinstance(x, Term):
        return _pretty_term(x, _DELIMITED)
    if isinstance(x, SType):
        return _pretty_stype(x)
    if isinstance(x, STerm):
        return _pretty_sterm(x, _DELIMITED)
    if isinstance(x, Scalar):
        return format_scalar(x)
    raise TypeError(f"Cannot print {x!r}")


_CONNECTIVES = {Odot: "odot", Plus: "(+)", With: "&"}


def _pretty_prop(p: Prop) -> str:
    if isinstance(p, Top):
        return "T"
    if isinstance(p, Lolli):
        domain = _pretty_prop(p.domain)
        if isinstance(p.domain, Lolli):
            domain = f"({domain})"
        return f"{domain} -o {_pretty_prop(p.codomain)}"
    connective = _CONNECTIVES[type(p)]
    left = _pretty_prop(p.left)
    if not isinstance(p.left, (Top, type(p))):
        left = f"({left})"
    right = _pretty_prop(p.right)
    if not isinstance(p.right, Top):
        right = f"({right})"
    return f"{left} {connective} {right}"


def _parens(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def _pretty_term(t: Term, level: int) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Star):
        return f"star({format_scalar(t.alpha)})"
    if isinstance(t, SupPair):
        return f"[{_pretty_term(t.left, _DELIMITED)}, {_pretty_term(t.right, _DELIMITED)}]"
    if isinstance(t, WithPair):
        return f"<{_pretty_term(t.left, _DELIMITED)}, {_pretty_term(t.right, _DELIMITED)}>"
    if isinstance(t, Sum):
        text = f"{_pretty_term(t.left, _SUM_LEFT)} + {_pretty_term(t.right, _SUM_RIGHT)}"
        return _parens(text, level >= _SUM_RIGHT)
    if isinstance(t, Scale):
        text = f"{format_scalar(t.alpha)} * {_pretty_term(t.body, _SCALED)}"
        return _parens(text, level >= _FUN)
    if isinstance(t, App):
        text = f"{_pretty_term(t.fun, _FUN)} {_pretty_term(t.arg, _ARG)}"
        return _parens(text, level >= _ARG)
    if isinstance(t, Lam):
        text = f"lam {t.var}: {_pretty_prop(t.annotation)}. {_pretty_term(t.body, _DELIMITED)}"
        return _parens(text, level > _DELIMITED)
    if isinstance(t, MatchSup):
        return (f"smatch {_pretty_term(t.scrutinee, _DELIMITED)} "
                f"{{ {t.left_var} => {_pretty_term(t.left_body, _DELIMITED)} "
                f"| {t.right_var} => {_pretty_term(t.right_body, _DELIMITED)} }}")
    if isinstance(t, CasePlus):
        return (f"pmatch {_pretty_term(t.scrutinee, _DELIMITED)} "
                f"{{ inl {t.left_var} => {_pretty_term(t.left_body, _DELIMITED)} "
                f"| inr {t.right_var} => {_pretty_term(t.right_body, _DELIMITED)} }}")
    if isinstance(t, (Inl, Inr, Proj1, Proj2)):
        keyword = {Inl: "inl", Inr: "inr", Proj1: "proj1", Proj2: "proj2"}[type(t)]
        text = f"{keyword} {_pretty_term(t.body, _ARG)}"
        return _parens(text, level >= _ARG)
    if isinstance(t, Inlr):
        text = f"inlr {_pretty_term(t.left, _ARG)} {_pretty_term(t.right, _ARG)}"
        return _parens(text, level >= _ARG)
    raise TypeError(f"Cannot print {t!r}")


def _pretty_stype(a: SType) -> str:
    if isinstance(a, Base):
        return a.name
    if isinstance(a, Span):
        return f"S({_pretty_stype(a.inner)})"
    domain = _pretty_stype(a.domain)
    if isinstance(a.domain, Arrow):
        domain = f"({domain})"
    return f"{domain} -> {_pretty_stype(a.codomain)}"


def _pretty_sterm(t: STerm, level: int) -> str:
    if isinstance(t, SVar):
        return t.name
    if isinstance(t, STrue):
        return "true"
    if isinstance(t, SFalse):
        return "false"
    if isinstance(t, SSum):
        text = f"{_pretty_sterm(t.left, _SUM_LEFT)} + {_pretty_sterm(t.right, _SUM_RIGHT)}"
        return _parens(text, level >= _SUM_RIGHT)
    if isinstance(t, SScale):
        text = f"{format_scalar(t.alpha)} * {_pretty_sterm(t.body, _SCALED)}"
        return _parens(text, level >= _FUN)
    if isinstance(t, SApp):
        text = f"{_pretty_sterm(t.fun, _FUN)} {_pretty_sterm(t.arg, _ARG)}"
        return _parens(text, level >= _ARG)
    if isinstance(t, SLam):
        text = f"lam {t.var}: {_pretty_stype(t.annotation)}. {_pretty_sterm(t.body, _DELIMITED)}"
        return _parens(text, level > _DELIMITED)
    raise TypeError(f"Cannot print {t!r}")
