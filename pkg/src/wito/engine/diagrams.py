"""
diagrams.py — Diagrams, grid kernels and the diagram formula
------------------------------------------------------------
Responsibility:
- Enumerate diagrams of a given order (rows of n_1, ..., n_m vertices, at most
  one edge per vertex, edges only between different rows).
- Count complete diagrams by dynamic programming and evaluate Hermite moments
  E prod_i H_{n_i}(X_i) as weighted sums over complete diagrams.
- Contract grid kernels along a diagram (the discrete h_gamma: each edge pairs
  a variable with the negated value of its partner and sums it out against the
  cell masses) and sum complete contractions into product expectations.
- Classify complete diagrams as regular (edges respect a pairing of rows).

Design notes:
- Vertices are (row, position) pairs, 0-based.  An edge is stored with the
  lower row first and a diagram keeps its edges sorted, so equal diagrams
  compare equal and enumeration order is lexicographic over edge sets.
- Free variables of a contraction are numbered in row-major order.
- A GridKernel stores dense values over the positions 0..2M-1 of its regular
  system; position p and position (p + M) mod 2M are mirror cells.  The
  diagonal exclusion j_l != +-j_l' is applied as a mask whenever a kernel is
  integrated, contracted or measured, never by editing the stored values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - type checkers only
    from wito.engine.chaos import RegularSystem

LOGGER = logging.getLogger(__name__)

MAX_TOTAL_ARITY = 16

Vertex = Tuple[int, int]
Edge = Tuple[Vertex, Vertex]


# ---- Exceptions ----


class DiagramSizeError(ValueError):
    """The requested order exceeds the enumeration guard."""


class SystemMismatchError(ValueError):
    """Kernels are adapted to different regular systems, or arities do not match."""


# ---- Diagrams ----


@dataclass(frozen=True)
class Diagram:
    """
    A diagram of order (n_1, ..., n_m).
    - order: row widths
    - edges: sorted pairs ((row, pos), (row', pos')) with row < row'
    """
    order: Tuple[int, ...]
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self) -> None:
        order = tuple(int(n) for n in self.order)
        if not order or any(n < 1 for n in order):
            raise ValueError(f"Diagram.order needs m >= 1 rows of width >= 1 (got {self.order})")
        seen = set()
        canonical = []
        for a, b in self.edges:
            a, b = (int(a[0]), int(a[1])), (int(b[0]), int(b[1]))
            for v in (a, b):
                if not (0 <= v[0] < len(order) and 0 <= v[1] < order[v[0]]):
                    raise ValueError(f"Diagram vertex {v} is outside order {order}")
                if v in seen:
                    raise ValueError(f"Diagram vertex {v} has more than one edge")
                seen.add(v)
            if a[0] == b[0]:
                raise ValueError(f"Diagram edge {a}-{b} joins vertices of the same row")
            canonical.append((a, b) if a < b else (b, a))
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "edges", tuple(sorted(canonical)))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def total(self) -> int:
        return sum(self.order)

    @property
    def is_complete(self) -> bool:
        return 2 * self.edge_count == self.total

    @property
    def free_arity(self) -> int:
        return self.total - 2 * self.edge_count

    def free_vertices(self) -> List[Vertex]:
        matched = {v for e in self.edges for v in e}
        return [(r, p) for r, n in enumerate(self.order) for p in range(n) if (r, p) not in matched]

    def to_text(self) -> str:
        if not self.edges:
            return "-"
        return " ".join(f"{a[0]}.{a[1]}-{b[0]}.{b[1]}" for a, b in self.edges)

    @classmethod
    def from_text(cls, order: Sequence[int], text: str) -> "Diagram":
        text = text.strip()
        if text in ("", "-"):
            return cls(tuple(order))
        edges = []
        for token in text.split():
            left, right = token.split("-")
            r1, p1 = (int(x) for x in left.split("."))
            r2, p2 = (int(x) for x in right.split("."))
            edges.append(((r1, p1), (r2, p2)))
        return cls(tuple(order), tuple(edges))


def format_diagrams(diagrams: Sequence[Diagram]) -> str:
    """Canonical text form: one edge list per line."""
    return "".join(d.to_text() + "\n" for d in diagrams)


def parse_diagrams(order: Sequence[int], text: str) -> List[Diagram]:
    return [Diagram.from_text(order, line) for line in text.splitlines() if line.strip()]


def _telephone(n: int) -> int:
    """Number of matchings of the complete graph on n vertices."""
    a, b = 1, 1
    for k in range(2, n + 1):
        a, b = b, b + (k - 1) * a
    return b if n >= 1 else 1


def _check_order(order: Sequence[int]) -> Tuple[int, ...]:
    order = tuple(int(n) for n in order)
    if not order or any(n < 1 for n in order):
        raise ValueError(f"order needs m >= 1 rows of width >= 1 (got {order})")
    total = sum(order)
    if total > MAX_TOTAL_ARITY:
        raise DiagramSizeError(
            f"order {order} has {total} vertices (limit {MAX_TOTAL_ARITY}); "
            f"enumeration would visit up to {_telephone(total):,} diagrams"
        )
    return order


def _vertices(order: Tuple[int, ...]) -> List[Vertex]:
    return [(r, p) for r, n in enumerate(order) for p in range(n)]


def enumerate_diagrams(order: Sequence[int]) -> List[Diagram]:
    """Every diagram of the given order exactly once (the empty one included)."""
    order = _check_order(order)
    vertices = _vertices(order)
    used = [False] * len(vertices)
    found: List[Tuple[Edge, ...]] = []
    edges: List[Edge] = []

    def walk(i: int) -> None:
        while i < len(vertices) and used[i]:
            i += 1
        if i == len(vertices):
            found.append(tuple(edges))
            return
        used[i] = True
        walk(i + 1)
        for j in range(i + 1, len(vertices)):
            if not used[j] and vertices[j][0] != vertices[i][0]:
                used[j] = True
                edges.append((vertices[i], vertices[j]))
                walk(i + 1)
                edges.pop()
                used[j] = False
        used[i] = False

    walk(0)
    return [Diagram(order, e) for e in sorted(found)]


def complete_diagrams(order: Sequence[int]) -> List[Diagram]:
    """Complete diagrams only (every vertex carries an edge)."""
    order = _check_order(order)
    if sum(order) % 2:
        return []
    vertices = _vertices(order)
    used = [False] * len(vertices)
    found: List[Tuple[Edge, ...]] = []
    edges: List[Edge] = []

    def walk(i: int) -> None:
        while i < len(vertices) and used[i]:
            i += 1
        if i == len(vertices):
            found.append(tuple(edges))
            return
        used[i] = True
        for j in range(i + 1, len(vertices)):
            if not used[j] and vertices[j][0] != vertices[i][0]:
                used[j] = True
                edges.append((vertices[i], vertices[j]))
                walk(i + 1)
                edges.pop()
                used[j] = False
        used[i] = False

    walk(0)
    return [Diagram(order, e) for e in sorted(found)]


@lru_cache(maxsize=None)
def _count_state(state: Tuple[int, ...]) -> int:
    if not state:
        return 1
    first, rest = state[0], state[1:]
    if first > sum(rest):
        return 0
    total = 0
    for j, width in enumerate(rest):
        nxt = list(state)
        nxt[0] -= 1
        nxt[j + 1] -= 1
        total += width * _count_state(tuple(sorted((c for c in nxt if c), reverse=True)))
    return total


def count_complete_order(order: Sequence[int]) -> int:
    """Number of complete diagrams of an arbitrary order (no enumeration)."""
    order = tuple(int(n) for n in order)
    if any(n < 0 for n in order):
        raise ValueError(f"row widths must be >= 0 (got {order})")
    if sum(order) % 2:
        return 0
    return _count_state(tuple(sorted((n for n in order if n), reverse=True)))


def count_complete(m: int, rows: int) -> int:
    """C(m, N) for rows = 2N rows of width m: complete diagrams of Gamma(m, ..., m)."""
    if m < 1 or rows < 0:
        raise ValueError(f"count_complete needs m >= 1 and rows >= 0 (got m={m}, rows={rows})")
    if rows % 2:
        raise ValueError(f"count_complete needs an even number of rows (got {rows})")
    return count_complete_order((m,) * rows)


def double_factorial(n: int) -> int:
    """n!! with (-1)!! = 0!! = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def hermite_product_moment(orders: Sequence[int], corr) -> float:
    """
    E prod_i H_{n_i}(X_i) for standard Gaussians with correlation matrix ``corr``:
    the sum over complete diagrams of prod_{edges} corr[row, row'].
    """
    orders = tuple(int(n) for n in orders)
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (len(orders), len(orders)):
        raise ValueError(f"corr must be {len(orders)}x{len(orders)} (got {corr.shape})")
    if sum(orders) % 2:
        return 0.0

    @lru_cache(maxsize=None)
    def walk(state: Tuple[int, ...]) -> float:
        i = next((r for r, c in enumerate(state) if c), None)
        if i is None:
            return 1.0
        total = 0.0
        for j, c in enumerate(state):
            if j == i or c == 0:
                continue
            nxt = list(state)
            nxt[i] -= 1
            nxt[j] -= 1
            total += c * corr[i, j] * walk(tuple(nxt))
        return total

    return float(walk(orders))


def moment_hermite(m: int, p: int, r0: float = 1.0) -> float:
    """E H_m(xi)^p (r0 = 1); in general the complete-diagram sum with r0 on every edge."""
    if m < 1 or p < 0:
        raise ValueError(f"moment_hermite needs m >= 1 and p >= 0 (got m={m}, p={p})")
    if (m * p) % 2:
        return 0.0
    corr = np.full((p, p), float(r0))
    return hermite_product_moment((m,) * p, corr)


def is_regular(diagram: Diagram) -> bool:
    """True iff the rows split into pairs and every edge stays inside a pair."""
    if not diagram.is_complete or len(diagram.order) % 2:
        return False
    partners: Dict[int, set] = {r: set() for r in range(len(diagram.order))}
    for a, b in diagram.edges:
        partners[a[0]].add(b[0])
        partners[b[0]].add(a[0])
    return all(len(p) == 1 for p in partners.values())


def expansion_terms(order: Sequence[int]) -> List[Tuple[Diagram, int]]:
    """Diagram-formula terms of a product with the arity of each resulting integral."""
    return [(d, d.free_arity) for d in enumerate_diagrams(order)]


# ---- Grid kernels ----


@lru_cache(maxsize=64)
def admissible_mask(arity: int, size: int) -> np.ndarray:
    """Boolean (size,)*arity mask of tuples with j_l != +-j_l' for l != l'."""
    if size % 2:
        raise ValueError(f"grid kernels live on an even number of positions (got {size})")
    half = size // 2
    classes = np.arange(size) % half
    mask = np.ones((size,) * arity, dtype=bool)
    for l in range(arity):
        for lp in range(l + 1, arity):
            shape_l = [1] * arity
            shape_l[l] = size
            shape_lp = [1] * arity
            shape_lp[lp] = size
            mask &= classes.reshape(shape_l) != classes.reshape(shape_lp)
    mask.setflags(write=False)
    return mask


def same_system(a: "RegularSystem", b: "RegularSystem") -> bool:
    if a is b:
        return True
    return (
        a.nu == b.nu
        and a.resolution == b.resolution
        and a.extent == b.extent
        and np.array_equal(a.masses, b.masses)
    )


@dataclass(frozen=True, eq=False)
class GridKernel:
    """
    A simple function adapted to a regular system, stored densely.

    values has shape (2M,)*arity; arity 0 kernels hold a scalar.
    """
    system: "RegularSystem"
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        size = self.system.size
        if any(s != size for s in values.shape):
            raise SystemMismatchError(
                f"GridKernel values of shape {values.shape} do not match a system with {size} positions"
            )
        object.__setattr__(self, "values", values)

    @property
    def arity(self) -> int:
        return self.values.ndim

    @property
    def scalar(self) -> complex:
        if self.arity != 0:
            raise ValueError(f"kernel of arity {self.arity} is not a scalar")
        return complex(self.values)

    def masked(self) -> np.ndarray:
        if self.arity < 2:
            return self.values
        return np.where(admissible_mask(self.arity, self.system.size), self.values, 0.0)

    def measure(self) -> np.ndarray:
        """Product measure prod_l G(Delta_{j_l}) over the index tuples."""
        out = np.ones(())
        for _ in range(self.arity):
            out = np.multiply.outer(out, self.system.masses)
        return out

    def norm(self) -> float:
        """||f|| = (sum over admissible tuples of |f|^2 prod G)^(1/2)."""
        return float(np.sqrt(np.sum(np.abs(self.masked()) ** 2 * self.measure())))

    def negated(self) -> np.ndarray:
        """Values at (-j_1, ..., -j_n)."""
        out = self.values
        neg = self.system.neg
        for axis in range(self.arity):
            out = np.take(out, neg, axis=axis)
        return out

    def hermitian_defect(self) -> float:
        """max |f(-j) - conj f(j)| over admissible tuples."""
        if self.arity == 0:
            return float(abs(self.values.imag))
        diff = np.abs(self.negated() - np.conj(self.values))
        if self.arity >= 2:
            diff = np.where(admissible_mask(self.arity, self.system.size), diff, 0.0)
        return float(diff.max())

    def with_values(self, values: np.ndarray) -> "GridKernel":
        return GridKernel(self.system, values)

    def tensor(self, other: "GridKernel") -> "GridKernel":
        if not same_system(self.system, other.system):
            raise SystemMismatchError("tensor product of kernels on different regular systems")
        return GridKernel(self.system, np.multiply.outer(self.values, other.values))

    def __mul__(self, scale: complex) -> "GridKernel":
        return GridKernel(self.system, self.values * scale)

    __rmul__ = __mul__


def tensor_product(kernels: Sequence[GridKernel]) -> GridKernel:
    if not kernels:
        raise ValueError("tensor_product needs at least one kernel")
    out = kernels[0]
    for k in kernels[1:]:
        out = out.tensor(k)
    return out


def symmetrize(kernel: GridKernel) -> GridKernel:
    """Sym f: the average of f over all permutations of its variables."""
    n = kernel.arity
    if n < 2:
        return kernel
    total = np.zeros_like(kernel.values)
    for perm in permutations(range(n)):
        total = total + np.transpose(kernel.values, perm)
    return kernel.with_values(total / math.factorial(n))


def kernel_norm(kernel: GridKernel) -> float:
    return kernel.norm()


def _check_kernels(kernels: Sequence[GridKernel], order: Optional[Tuple[int, ...]] = None) -> None:
    if not kernels:
        raise ValueError("at least one kernel is required")
    base = kernels[0].system
    for k in kernels[1:]:
        if not same_system(base, k.system):
            raise SystemMismatchError("kernels are adapted to different regular systems")
    if order is not None:
        arities = tuple(k.arity for k in kernels)
        if arities != order:
            raise SystemMismatchError(f"kernel arities {arities} do not match diagram order {order}")


def contract(
    kernels: Sequence[GridKernel],
    diagram: Diagram,
    masses: Optional[np.ndarray] = None,
) -> GridKernel:
    """
    h_gamma: the tensor product of the (diagonal-excluded) kernels with each
    edge's second variable set to the negated partner index and summed out
    against the cell masses.  Free variables follow row-major order.
    """
    _check_kernels(kernels, diagram.order)
    system = kernels[0].system
    weights = system.masses if masses is None else np.asarray(masses, dtype=float)
    if weights.shape != (system.size,):
        raise SystemMismatchError(f"masses of shape {weights.shape} do not match {system.size} positions")

    labels: Dict[Vertex, int] = {}
    negate: set = set()
    next_label = 0
    for a, b in diagram.edges:
        labels[a] = labels[b] = next_label
        negate.add(b)
        next_label += 1
    edge_labels = list(range(next_label))
    free = diagram.free_vertices()
    for v in free:
        labels[v] = next_label
        next_label += 1

    operands: List = []
    for row, kernel in enumerate(kernels):
        values = kernel.masked()
        for pos in range(kernel.arity):
            if (row, pos) in negate:
                values = np.take(values, system.neg, axis=pos)
        operands.append(values)
        operands.append([labels[(row, pos)] for pos in range(kernel.arity)])
    for label in edge_labels:
        operands.append(weights)
        operands.append([label])
    output = [labels[v] for v in free]
    result = np.einsum(*operands, output, optimize=True)
    return GridKernel(system, np.asarray(result, dtype=complex))


def product_expectation(kernels: Sequence[GridKernel], masses: Optional[np.ndarray] = None) -> float:
    """
    E prod_i (sum over admissible tuples of f_i(j) Z_{j_1}...Z_{j_{n_i}}):
    the sum of the fully contracted h_gamma over complete diagrams.
    """
    _check_kernels(kernels)
    order = tuple(k.arity for k in kernels)
    if sum(order) % 2:
        return 0.0
    if any(n == 0 for n in order):
        scalars = [k for k in kernels if k.arity == 0]
        rest = [k for k in kernels if k.arity > 0]
        factor = np.prod([k.scalar for k in scalars])
        if not rest:
            return float(np.real(factor))
        return float(np.real(factor) * product_expectation(rest, masses))
    total = 0.0 + 0.0j
    for diagram in complete_diagrams(order):
        total += contract(kernels, diagram, masses).scalar
    return float(total.real)


__all__ = [
    "Diagram",
    "DiagramSizeError",
    "GridKernel",
    "MAX_TOTAL_ARITY",
    "SystemMismatchError",
    "admissible_mask",
    "complete_diagrams",
    "contract",
    "count_complete",
    "count_complete_order",
    "double_factorial",
    "enumerate_diagrams",
    "expansion_terms",
    "format_diagrams",
    "hermite_product_moment",
    "is_regular",
    "kernel_norm",
    "moment_hermite",
    "parse_diagrams",
    "product_expectation",
    "same_system",
    "symmetrize",
    "tensor_product",
]
