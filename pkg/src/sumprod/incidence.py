"""Solution counts for ``A_1 B_1 + ... + A_d B_d = E + F`` over set families,
and point-line incidences ``Y = A X + B`` in M_n(F_q)^2.

Matrices are named by their index (see ``fq_linalg.mat_index``); all counts
are exact integers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field
from fractions import Fraction
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .digraph import sample_indices
from .errors import BudgetExceeded, ConfigError, SizeTooLarge
from .fq_linalg import FieldSpec, MatrixRing
from .parallel import run_chunks, split_range
from .spectrum import paper_exponent

DEFAULT_BUDGET = 10**9
CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class SetFamily:
    field: FieldSpec
    n: int
    d: int
    a_sets: tuple[tuple[int, ...], ...]
    b_sets: tuple[tuple[int, ...], ...]
    e_set: tuple[int, ...]
    f_set: tuple[int, ...]

    def __post_init__(self):
        if len(self.a_sets) != self.d or len(self.b_sets) != self.d:
            raise ConfigError(f"need {self.d} A-sets and {self.d} B-sets")
        Q = self.ring_order
        for s in (*self.a_sets, *self.b_sets, self.e_set, self.f_set):
            if len(set(s)) != len(s):
                raise ConfigError("duplicate matrix index in a set")
            if any(not 0 <= i < Q for i in s):
                raise ConfigError(f"matrix index outside [0, {Q})")

    @classmethod
    def build(cls, field, n, d, a_sets, b_sets, e_set, f_set) -> "SetFamily":
        as_tuple = lambda s: tuple(int(i) for i in s)  # noqa: E731
        return cls(
            field, n, d,
            tuple(as_tuple(s) for s in a_sets),
            tuple(as_tuple(s) for s in b_sets),
            as_tuple(e_set),
            as_tuple(f_set),
        )

    @property
    def ring_order(self) -> int:
        return self.field.q ** (self.n * self.n)

    def sizes(self) -> dict[str, int]:
        out = {f"a{i + 1}": len(s) for i, s in enumerate(self.a_sets)}
        out.update({f"b{i + 1}": len(s) for i, s in enumerate(self.b_sets)})
        out.update(e=len(self.e_set), f=len(self.f_set))
        return out

    def size_product(self) -> int:
        return math.prod(self.sizes().values())


@dataclass
class IncidenceReport:
    kind: str
    count: int
    main_term: float
    main_term_exact: str
    error_observed: float
    paper_exponent: float
    paper_constant: float
    error_bound_paper: float
    measured_paper_constant: float
    holds_paper: bool
    error_bound_measured_lambda: float | None
    holds_measured: bool | None
    sizes: dict[str, int] = dc_field(default_factory=dict)
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _ring_for(field: FieldSpec, n: int, ring: MatrixRing | None) -> MatrixRing:
    if ring is not None and ring.field == field and ring.n == n:
        return ring
    return MatrixRing(field, n)


def _cartesian(sets: Sequence[Sequence[int]]) -> np.ndarray:
    """All tuples from ``sets`` as rows, first coordinate most significant."""
    if any(len(s) == 0 for s in sets):
        return np.empty((0, len(sets)), dtype=np.int64)
    grids = np.meshgrid(*[np.asarray(s, dtype=np.int64) for s in sets], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _tuple_products(ring: MatrixRing, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sum_i a_i b_i`` for every (row of a, row of b): shape ``(len(a), len(b))``."""
    acc = ring.mul[a[:, None, 0], b[None, :, 0]]
    for i in range(1, a.shape[1]):
        acc = ring.add[acc, ring.mul[a[:, None, i], b[None, :, i]]]
    return acc


def _count_chunk(ring: MatrixRing, a_tuples, b_tuples, e_arr, f_member, bounds) -> int:
    lo, hi = bounds
    total = 0
    per_b = max(1, len(e_arr))
    b_step = max(1, CHUNK_ELEMS // per_b)
    for b_lo in range(0, len(b_tuples), b_step):
        bt = b_tuples[b_lo : b_lo + b_step]
        a_step = max(1, CHUNK_ELEMS // (per_b * len(bt)))
        for a_lo in range(lo, hi, a_step):
            s = _tuple_products(ring, a_tuples[a_lo : min(a_lo + a_step, hi)], bt)
            f = ring.sub[s[:, :, None], e_arr[None, None, :]]
            total += int(f_member[f].sum())
    return total


def _work(fam: SetFamily, last: Sequence[int]) -> int:
    return math.prod(len(s) for s in (*fam.a_sets, *fam.b_sets)) * len(last)


def count_solutions(fam: SetFamily, ring: MatrixRing | None = None,
                    budget: int = DEFAULT_BUDGET, workers: int = 1) -> int:
    """Exact N: iterate (A-tuple, B-tuple, E) and look up ``F = sum A_i B_i - E``.

    The outer A-tuple range is split across ``workers``.
    """
    ring = _ring_for(fam.field, fam.n, ring)
    work = _work(fam, fam.e_set)
    if work > budget:
        raise BudgetExceeded(f"{work} equation evaluations exceed budget {budget}")
    if work == 0 or not fam.f_set:
        return 0
    a_tuples = _cartesian(fam.a_sets)
    b_tuples = _cartesian(fam.b_sets)
    f_member = np.zeros(ring.order, dtype=bool)
    f_member[list(fam.f_set)] = True
    e_arr = np.asarray(fam.e_set, dtype=np.int64)
    parts = split_range(len(a_tuples), max(1, workers))
    fn = partial(_count_chunk, ring, a_tuples, b_tuples, e_arr, f_member)
    return sum(run_chunks(fn, parts, workers))


def count_solutions_via_f(fam: SetFamily, ring: MatrixRing | None = None,
                          budget: int = DEFAULT_BUDGET) -> int:
    """Same N, iterating F in the outer loop and looking up ``E = sum A_i B_i - F``."""
    ring = _ring_for(fam.field, fam.n, ring)
    work = _work(fam, fam.f_set)
    if work > budget:
        raise BudgetExceeded(f"{work} equation evaluations exceed budget {budget}")
    if work == 0 or not fam.e_set:
        return 0
    e_member = np.zeros(ring.order, dtype=bool)
    e_member[list(fam.e_set)] = True
    a_tuples = _cartesian(fam.a_sets)
    b_tuples = _cartesian(fam.b_sets)
    total = 0
    step = max(1, CHUNK_ELEMS // len(b_tuples))
    for lo in range(0, len(a_tuples), step):
        sums = _tuple_products(ring, a_tuples[lo : lo + step], b_tuples).ravel()
        for f in fam.f_set:
            total += int(e_member[ring.sub[sums, f]].sum())
    return total


def theorem_report(fam: SetFamily, lambda_est: float | None = None, ring: MatrixRing | None = None,
                   budget: int = DEFAULT_BUDGET, workers: int = 1) -> IncidenceReport:
    """Compare N with its main term and with both error bounds.

    The ``q**paper_exponent`` bound is taken with constant 1, so ``holds_paper``
    is informational.
    The measured-lambda bound is the mixing inequality for the vertex sets
    ``A_1 x .. x A_d x E`` and ``B_1 x .. x B_d x F`` and is exact.
    """
    count = count_solutions(fam, ring, budget, workers)
    q, n, d = fam.field.q, fam.n, fam.d
    size_prod = fam.size_product()
    main = Fraction(size_prod, fam.ring_order)
    err = abs(count - main)
    expo = paper_exponent(n, d)
    root = math.sqrt(size_prod)
    scale = float(q) ** expo * root
    bound = scale
    measured_bound = None if lambda_est is None else lambda_est * root
    notes = []
    if q % 2 == 0:
        notes.append("even q: extrapolation beyond the odd-q hypothesis")
    if n < 2:
        notes.append("n = 1: below the n >= 2 hypothesis")
    return IncidenceReport(
        kind="solutions",
        count=count,
        main_term=float(main),
        main_term_exact=str(main),
        error_observed=float(err),
        paper_exponent=expo,
        paper_constant=1.0,
        error_bound_paper=bound,
        measured_paper_constant=float(err) / scale if scale else 0.0,
        holds_paper=bool(float(err) <= bound),
        error_bound_measured_lambda=measured_bound,
        holds_measured=None if measured_bound is None else bool(float(err) <= measured_bound),
        sizes=fam.sizes(),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# points and lines


def _as_pairs(items, Q: int, what: str) -> np.ndarray:
    arr = np.asarray(list(items), dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= Q):
        raise ConfigError(f"{what}: matrix index outside [0, {Q})")
    if len(np.unique(arr[:, 0] * Q + arr[:, 1])) != len(arr):
        raise ConfigError(f"{what}: duplicates")
    return arr


def incidences_pairwise(points, lines, ring: MatrixRing) -> int:
    """Test every (point, line) pair."""
    pts = _as_pairs(points, ring.order, "points")
    lns = _as_pairs(lines, ring.order, "lines")
    if len(pts) == 0 or len(lns) == 0:
        return 0
    total = 0
    step = max(1, CHUNK_ELEMS // len(pts))
    for lo in range(0, len(lns), step):
        a, b = lns[lo : lo + step, 0], lns[lo : lo + step, 1]
        y = ring.add[ring.mul[a[:, None], pts[None, :, 0]], b[:, None]]
        total += int((y == pts[None, :, 1]).sum())
    return total


def _incidences_by_line(pts: np.ndarray, lns: np.ndarray, ring: MatrixRing) -> int:
    # walk each line through all X and look its points up
    Q = ring.order
    member = np.zeros(Q * Q, dtype=bool)
    member[pts[:, 0] * Q + pts[:, 1]] = True
    xs = np.arange(Q)
    total = 0
    step = max(1, CHUNK_ELEMS // Q)
    for lo in range(0, len(lns), step):
        a, b = lns[lo : lo + step, 0], lns[lo : lo + step, 1]
        y = ring.add[ring.mul[a[:, None], xs[None, :]], b[:, None]]
        total += int(member[xs[None, :] * Q + y].sum())
    return total


def count_incidences(points, lines, field: FieldSpec, n: int, lambda_est: float | None = None,
                     ring: MatrixRing | None = None, budget: int = DEFAULT_BUDGET) -> IncidenceReport:
    """``I(P, L) = #{((X, Y), (A, B)) : Y = A X + B}`` with its bounds.

    For ``n = 2`` the stated bound is ``sqrt(2) q^(7/2) sqrt(|P||L|)`` on
    the one-sided excess ``I - |P||L| / q^4``; other n reuse the exponent
    ``n^2 - 1/2`` and are flagged as extrapolation. The measured-lambda bound
    is two-sided, from the d = 1 digraph via lines ``(A, B) -> (A, -B)``.
    """
    ring = _ring_for(field, n, ring)
    Q = ring.order
    pts = _as_pairs(points, Q, "points")
    lns = _as_pairs(lines, Q, "lines")
    work = min(len(pts), Q) * len(lns)
    if work > budget:
        raise BudgetExceeded(f"{work} incidence tests exceed budget {budget}")
    if len(pts) == 0 or len(lns) == 0:
        count = 0
    elif len(pts) < Q:
        count = incidences_pairwise(pts, lns, ring)
    else:
        count = _incidences_by_line(pts, lns, ring)

    q = field.q
    size_prod = len(pts) * len(lns)
    main = Fraction(size_prod, Q)
    excess = count - main
    expo = n * n - 0.5
    root = math.sqrt(size_prod)
    scale = float(q) ** expo * root
    bound = math.sqrt(2) * scale
    notes = []
    if n != 2:
        notes.append(f"n = {n}: incidence bound extrapolated with exponent n^2 - 1/2")
    if q % 2 == 0:
        notes.append("even q: extrapolation beyond the odd-q hypothesis")
    measured_bound = None if lambda_est is None else lambda_est * root
    return IncidenceReport(
        kind="incidences",
        count=count,
        main_term=float(main),
        main_term_exact=str(main),
        error_observed=float(abs(excess)),
        paper_exponent=expo,
        paper_constant=math.sqrt(2),
        error_bound_paper=bound,
        measured_paper_constant=float(abs(excess)) / scale if scale else 0.0,
        holds_paper=bool(float(excess) <= bound),
        error_bound_measured_lambda=measured_bound,
        holds_measured=None if measured_bound is None else bool(float(abs(excess)) <= measured_bound),
        sizes={"points": len(pts), "lines": len(lns)},
        notes=notes,
    )


def incidence_vertex_sets(points, lines, ring: MatrixRing) -> tuple[np.ndarray, np.ndarray]:
    """Vertex indices of the d = 1 digraph whose edge count ``e(L', P')``
    equals ``I(P, L)``: line ``(A, B)`` becomes ``(A, -B)``, point ``(X, Y)``
    stays ``(X, Y)``."""
    Q = ring.order
    pts = _as_pairs(points, Q, "points")
    lns = _as_pairs(lines, Q, "lines")
    return lns[:, 0] * Q + ring.neg[lns[:, 1]], pts[:, 0] * Q + pts[:, 1]


# ---------------------------------------------------------------------------
# sampling


def _resolve_sizes(sizes, d: int) -> list[int]:
    count = 2 * d + 2
    if isinstance(sizes, int):
        return [sizes] * count
    sizes = [int(s) for s in sizes]
    if len(sizes) == 1:
        return sizes * count
    if len(sizes) != count:
        raise ConfigError(f"expected 1 or {count} sizes (a1..ad, b1..bd, e, f), got {len(sizes)}")
    return sizes


def random_family(sizes, field: FieldSpec, n: int, d: int, seed: int) -> SetFamily:
    """Uniform subsets drawn without replacement, in the order a1..ad, b1..bd, e, f."""
    Q = field.q ** (n * n)
    sz = _resolve_sizes(sizes, d)
    if any(s < 0 or s > Q for s in sz):
        raise SizeTooLarge(f"set sizes must lie in [0, {Q}], got {sz}")
    rng = np.random.default_rng(seed)
    sets = [tuple(int(i) for i in sample_indices(rng, Q, s)) if s else () for s in sz]
    return SetFamily(field, n, d, tuple(sets[:d]), tuple(sets[d : 2 * d]), sets[2 * d], sets[2 * d + 1])


def full_family(field: FieldSpec, n: int, d: int) -> SetFamily:
    Q = field.q ** (n * n)
    return random_family(Q, field, n, d, seed=0)


def random_pairs(count: int, ring_order: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """``count`` distinct (matrix, matrix) pairs, e.g. points or lines."""
    total = ring_order * ring_order
    if count > total:
        raise SizeTooLarge(f"only {total} distinct pairs exist")
    flat = sample_indices(rng, total, count)
    return [(int(i // ring_order), int(i % ring_order)) for i in flat]


# ---------------------------------------------------------------------------
# files


def write_family(path, fam: SetFamily) -> None:
    """Sections ``[a1] .. [ad] [b1] .. [bd] [e] [f]``, one decimal index per line."""
    lines = [f"# q={fam.field.q} n={fam.n} d={fam.d}"]
    names = [f"a{i + 1}" for i in range(fam.d)] + [f"b{i + 1}" for i in range(fam.d)] + ["e", "f"]
    for name, s in zip(names, (*fam.a_sets, *fam.b_sets, fam.e_set, fam.f_set)):
        lines.append(f"[{name}]")
        lines.extend(str(i) for i in s)
    Path(path).write_text("\n".join(lines) + "\n")


def read_family(path, field: FieldSpec, n: int, d: int) -> SetFamily:
    sections: dict[str, list[int]] = {}
    current = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections[current] = []
        elif current is None:
            raise ConfigError(f"{path}: index before any section header")
        else:
            sections[current].append(int(line))
    known = {f"a{i + 1}" for i in range(d)} | {f"b{i + 1}" for i in range(d)} | {"e", "f"}
    unknown = sorted(set(sections) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown sections {unknown} for d={d}")
    get = lambda name: sections.get(name, [])  # noqa: E731
    return SetFamily.build(
        field, n, d,
        [get(f"a{i + 1}") for i in range(d)],
        [get(f"b{i + 1}") for i in range(d)],
        get("e"),
        get("f"),
    )


def write_pairs(path, pairs) -> None:
    Path(path).write_text("".join(f"{a} {b}\n" for a, b in pairs))


def read_pairs(path) -> list[tuple[int, int]]:
    out = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        a, b = line.split()
        out.append((int(a), int(b)))
    return out
