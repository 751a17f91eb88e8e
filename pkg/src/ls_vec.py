"""
Bridge between closed irreducible proofs of Q⊗n and vectors of C^(2^n).

decode/encode map canonical terms to numpy vectors and back, compile_matrix
turns a 2^n x 2^m matrix into a proof of Q⊗m -o Q⊗n, and measure samples
Born-rule outcomes from the canonical form of a state.
"""

import itertools
import json
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterator, List, Sequence, Union

import numpy as np
import pandas as pd

from .errors import BadLength, BadShape, NotCanonical, ShapeMismatch, UnknownName, ZeroNorm
from .ls_core import App, Lam, MatchSup, Scale, Star, SupPair, Term, Top, Var, qpow
from .ls_reduce import DEFAULT_FUEL, DETERMINISTIC, canonical_depth, normalize, split_weights, sq_norm
from .scalars import DEFAULT_EPS, INV_SQRT2, Scalar

ArrayLike = Union[np.ndarray, Sequence]


def is_power_of_two(k: int) -> bool:
    return k >= 1 and k & (k - 1) == 0


def log2(k: int) -> int:
    return k.bit_length() - 1


def as_vector(v: ArrayLike) -> np.ndarray:
    """
    Convert to a 1-D complex vector whose length is a power of two

    Raises:
        BadLength: if the length is not a power of two
    """
    if not isinstance(v, np.ndarray):
        v = [x.to_complex() if isinstance(x, Scalar) else x for x in v]
    vector = np.asarray(v, dtype=complex)
    if vector.ndim != 1 or not is_power_of_two(vector.shape[0]):
        raise BadLength(f"Vector length must be a power of two, got shape {vector.shape}")
    return vector


def as_matrix(m: ArrayLike) -> np.ndarray:
    """
    Convert to a 2-D complex matrix with power-of-two rows and columns

    Raises:
        BadShape: otherwise
    """
    matrix = np.asarray(m, dtype=complex)
    if matrix.ndim != 2:
        raise BadShape(f"Expected a matrix, got an array of shape {matrix.shape}")
    rows, cols = matrix.shape
    if not (is_power_of_two(rows) and is_power_of_two(cols)):
        raise BadShape(f"Matrix dimensions must be powers of two, got {rows}x{cols}")
    return matrix


# Encoding

def decode(t: Term) -> np.ndarray:
    """
    Vector of a canonical term: star(α) is (α), a pair stacks its halves

    Raises:
        NotCanonical: if t is not a closed irreducible proof of some Q⊗n
    """
    if canonical_depth(t) is None:
        raise NotCanonical(f"Not a canonical state: {t}")
    return np.array(list(_amplitudes(t)), dtype=complex)


def _amplitudes(t: Term) -> Iterator[complex]:
    if isinstance(t, Star):
        yield t.alpha.to_complex()
    else:
        yield from _amplitudes(t.left)
        yield from _amplitudes(t.right)


def encode(v: ArrayLike) -> Term:
    """
    Canonical term of a vector of length 2^n

    Raises:
        BadLength: if the length is not a power of two
    """
    return _encode(as_vector(v))


def _encode(v: np.ndarray) -> Term:
    if len(v) == 1:
        return Star(Scalar.from_complex(v[0]))
    half = len(v) // 2
    return SupPair(_encode(v[:half]), _encode(v[half:]))


# Matrix compiler

def compile_matrix(m: ArrayLike) -> Term:
    """
    Closed proof of Q⊗m -o Q⊗n whose application to encode(v) normalizes to encode(M v)

    Args:
        m: matrix with 2^n rows and 2^m columns

    Returns:
        Term: lam x: Q^m. ... built by splitting the columns in halves

    Raises:
        BadShape: if a dimension is not a power of two
    """
    matrix = as_matrix(m)
    names = (f"x{k}" for k in itertools.count())
    return _compile(matrix, log2(matrix.shape[1]), names)


def _compile(matrix: np.ndarray, degree: int, names: Iterator[str]) -> Term:
    x = next(names)
    if degree == 0:
        return Lam(x, Top(), _column(matrix[:, 0], Var(x)))
    half = matrix.shape[1] // 2
    x1, x2 = next(names), next(names)
    return Lam(
        x,
        qpow(degree),
        MatchSup(
            Var(x),
            x1, App(_compile(matrix[:, :half], degree - 1, names), Var(x1)),
            x2, App(_compile(matrix[:, half:], degree - 1, names), Var(x2)),
        ),
    )


def _column(u: np.ndarray, x: Var) -> Term:
    """Scale gadget: the pair tree of α·x over the entries of u"""
    if len(u) == 1:
        return Scale(Scalar.from_complex(u[0]), x)
    half = len(u) // 2
    return SupPair(_column(u[:half], x), _column(u[half:], x))


# Library

_S = INV_SQRT2

GATES: Dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    # columns are ket+ and ket-
    "H": np.array([[_S, _S], [_S, -_S]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, complex(_S, _S)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}

STATES: Dict[str, np.ndarray] = {
    "ket+": np.array([_S, _S], dtype=complex),
    "ket-": np.array([_S, -_S], dtype=complex),
    "bell": np.array([_S, 0, 0, _S], dtype=complex),
}
STATE_ALIASES = {"ketplus": "ket+", "ketminus": "ket-"}

_BASIS_RE = re.compile(r"^ket([01]+)$")


def gate_matrix(name: str) -> np.ndarray:
    if name not in GATES:
        raise UnknownName(f"Unknown gate '{name}', expected one of {', '.join(GATES)}")
    return GATES[name].copy()


def state_vector(name: str) -> np.ndarray:
    """
    Standard vector of a named state: ket+, ket-, ketplus, ketminus, bell, or ket<bits>

    Raises:
        UnknownName: for any other name
    """
    name = STATE_ALIASES.get(name, name)
    if name in STATES:
        return STATES[name].copy()
    match = _BASIS_RE.match(name)
    if match and len(match.group(1)) <= 16:
        bits = match.group(1)
        vector = np.zeros(2 ** len(bits), dtype=complex)
        vector[int(bits, 2)] = 1
        return vector
    raise UnknownName(f"Unknown state '{name}'")


@lru_cache(maxsize=None)
def gate(name: str) -> Term:
    return compile_matrix(gate_matrix(name))


@lru_cache(maxsize=None)
def state(name: str) -> Term:
    return encode(state_vector(name))


def library_prelude() -> Dict[str, Term]:
    """Gates and common states by the names programs use for them"""
    prelude = {name: gate(name) for name in GATES}
    for name in ("ket0", "ket1", "ketplus", "ketminus", "bell", "ket00", "ket01", "ket10", "ket11"):
        prelude[name] = state(name)
    return prelude


def measurement_cascade(n: int) -> Term:
    """
    lam c: Q^n. a cascade of sup-matches, most significant split first.

    Each branch rebuilds the register with zeros on the discarded side, so the
    deterministic reduction returns the input and a probabilistic reduction
    performs one full collapse.
    """
    if n < 1:
        raise ValueError(f"A measurement cascade needs at least one qubit, got {n}")
    names = (f"c{k}" for k in itertools.count())
    root = next(names)
    return Lam(root, qpow(n), _cascade(Var(root), n, names))


def _cascade(subject: Term, n: int, names: Iterator[str]) -> Term:
    if n == 0:
        return subject
    zero = encode(np.zeros(2 ** (n - 1), dtype=complex))
    left, right = next(names), next(names)
    return MatchSup(
        subject,
        left, SupPair(_cascade(Var(left), n - 1, names), zero),
        right, SupPair(zero, _cascade(Var(right), n - 1, names)),
    )


# Measurement

@dataclass
class SampleReport:
    """Outcome counts of repeated full measurements"""
    shots: int
    counts: Dict[int, int]
    seed: int
    qubits: int
    probabilities: List[float] = field(default_factory=list)

    @property
    def frequencies(self) -> Dict[int, float]:
        return {i: c / self.shots for i, c in sorted(self.counts.items())}

    def bits(self, index: int) -> str:
        return format(index, f"0{self.qubits}b") if self.qubits else "-"

    def to_frame(self) -> pd.DataFrame:
        outcomes = sorted(set(self.counts) | {i for i, p in enumerate(self.probabilities) if p > 0})
        return pd.DataFrame({
            "outcome": [self.bits(i) for i in outcomes],
            "index": outcomes,
            "count": [self.counts.get(i, 0) for i in outcomes],
            "frequency": [self.counts.get(i, 0) / self.shots for i in outcomes],
            "born": [self.probabilities[i] if i < len(self.probabilities) else 0.0 for i in outcomes],
        })

    def to_dict(self) -> Dict:
        return {
            "shots": self.shots,
            "seed": self.seed,
            "qubits": self.qubits,
            "counts": {self.bits(i): c for i, c in sorted(self.counts.items())},
            "frequencies": {self.bits(i): f for i, f in self.frequencies.items()},
        }


def _shot(c: Term, seed: int, index: int, eps: float) -> int:
    """One collapse: walk the splits top-down with the draws a cascade reduction makes"""
    rng = np.random.default_rng(seed ^ index)
    node, outcome, threshold = c, 0, eps
    while isinstance(node, SupPair):
        left, right = split_weights(node, threshold)
        p_left = left / (left + right)
        if rng.random() < p_left:
            node, weight, bit = node.left, left, 0
        else:
            node, weight, bit = node.right, right, 1
        outcome = (outcome << 1) | bit
        threshold = eps * weight
    return outcome


def measure(t: Term, shots: int, seed: int, workers: int = 1,
            eps: float = DEFAULT_EPS, fuel: int = DEFAULT_FUEL) -> SampleReport:
    """
    Sample `shots` independent full collapses of the state t normalizes to

    Shot i draws from its own generator seeded with seed ^ i, so the counts do
    not depend on `workers`.

    Raises:
        NotCanonical: if t does not normalize to a canonical state
        ZeroNorm: if its squared norm is at or below eps
    """
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    c, _ = normalize(t, DETERMINISTIC, fuel=fuel, eps=eps)
    qubits = canonical_depth(c)
    if qubits is None:
        raise NotCanonical(f"State does not normalize to a canonical form: {c}")
    if sq_norm(c) <= eps:
        raise ZeroNorm(f"State {c} has squared norm below {eps}")
    probabilities = born_distribution(decode(c), eps).tolist()

    if qubits == 0:
        return SampleReport(shots, {0: shots}, seed, 0, probabilities)

    def run(indices: range) -> Counter:
        return Counter(_shot(c, seed, i, eps) for i in indices)

    counts: Counter = Counter()
    if workers == 1:
        counts.update(run(range(shots)))
    else:
        chunk = -(-shots // workers)
        chunks = [range(start, min(start + chunk, shots)) for start in range(0, shots, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for partial in pool.map(run, chunks):
                counts.update(partial)
    return SampleReport(shots, dict(sorted(counts.items())), seed, qubits, probabilities)


def born_distribution(v: ArrayLike, eps: float = DEFAULT_EPS) -> np.ndarray:
    """|v_i|^2 / ||v||^2"""
    weights = np.abs(np.asarray(v, dtype=complex)) ** 2
    total = weights.sum()
    if total <= eps:
        raise ZeroNorm(f"Vector has squared norm {total}, at or below {eps}")
    return weights / total


def total_variation(report: SampleReport, probabilities: ArrayLike) -> float:
    """Total-variation distance between empirical frequencies and a distribution"""
    exact = np.asarray(probabilities, dtype=float)
    empirical = np.zeros(len(exact))
    for index, frequency in report.frequencies.items():
        empirical[index] = frequency
    return float(0.5 * np.abs(empirical - exact).sum())


# Dense linear algebra oracles

def vec_add(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ShapeMismatch(f"Cannot add vectors of shapes {a.shape} and {b.shape}")
    return a + b


def vec_scale(alpha: Union[complex, Scalar], v: ArrayLike) -> np.ndarray:
    if isinstance(alpha, Scalar):
        alpha = alpha.to_complex()
    return alpha * np.asarray(v, dtype=complex)


def mat_mul(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"Cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def kron(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.ndim != b.ndim:
        raise ShapeMismatch(f"Cannot take the Kronecker product of shapes {a.shape} and {b.shape}")
    return np.kron(a, b)


# Interchange format

def matrix_to_json(m: ArrayLike) -> str:
    matrix = np.asarray(m, dtype=complex)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    rows, cols = matrix.shape
    entries = [[float(z.real), float(z.imag)] for z in matrix.reshape(-1)]
    return json.dumps({"rows": rows, "cols": cols, "entries": entries})


def matrix_from_json(text: str) -> np.ndarray:
    """
    Parse `{"rows": r, "cols": c, "entries": [[re, im], ...]}` (row-major)

    Raises:
        BadShape: if the document is malformed or the entry count is not rows*cols
    """
    try:
        document = json.loads(text)
        rows, cols, entries = document["rows"], document["cols"], document["entries"]
    except (ValueError, TypeError, KeyError) as e:
        raise BadShape(f"Not a matrix document: {e}") from None
    if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
        raise BadShape(f"rows and cols must be positive integers, got {rows!r} and {cols!r}")
    if not isinstance(entries, list) or len(entries) != rows * cols:
        count = len(entries) if isinstance(entries, list) else "no"
        raise BadShape(f"Expected {rows * cols} entries for a {rows}x{cols} matrix, got {count}")
    values = []
    for entry in entries:
        if (not isinstance(entry, list) or len(entry) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)):
            raise BadShape(f"Each entry must be a [re, im] pair of numbers, got {entry!r}")
        try:
            value = complex(entry[0], entry[1])
        except OverflowError:
            raise BadShape(f"Entry {entry!r} does not fit in a double") from None
        if not np.isfinite(value):
            raise BadShape(f"Entries must be finite, got {entry!r}")
        values.append(value)
    return np.array(values, dtype=complex).reshape(rows, cols)


def load_matrix(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        return matrix_from_json(f.read())


def dump_matrix(m: ArrayLike, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(matrix_to_json(m))


def load_vector(path: str) -> np.ndarray:
    """A vector file is a matrix document with cols = 1"""
    matrix = load_matrix(path)
    if matrix.shape[1] != 1:
        raise BadShape(f"A vector document needs cols = 1, got {matrix.shape[1]}")
    return matrix[:, 0]


def dump_vector(v: ArrayLike, path: str) -> None:
    dump_matrix(np.asarray(v, dtype=complex).reshape(-1, 1), path)
