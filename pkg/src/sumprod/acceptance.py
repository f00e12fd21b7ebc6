"""The acceptance checks behind ``sumprod verify-all``.

Every check runs at the reference configuration q=3, n=2, d=1 unless it says
otherwise, and returns a ``CriterionResult`` whose ``details`` are plain
JSON-ready values.  Seeds are derived from one base seed, so two runs with
the same seed produce identical results.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .digraph import GraphParams, SumProductDigraph, audit_degrees, audit_graph, sample_indices
from .fq_linalg import MatrixRing, field_make
from .incidence import (
    count_incidences,
    count_solutions_via_f,
    full_family,
    random_family,
    random_pairs,
    theorem_report,
)
from .rank_census import (
    census_bruteforce,
    count_rank_bound,
    count_rank_exact,
    measured_constant,
    solvable_pairs_bruteforce,
    solvable_pairs_naive,
)
from .spectrum import (
    AAtOperator,
    common_out_oracle_matvec,
    dense_spectrum,
    mixing_check,
    second_singular_direction,
)

REF_Q, REF_N, REF_D = 3, 2, 1
SPECTRAL_TOL = 1e-9
DENSE_MATCH_TOL = 1e-8
OPERATOR_MATCH_TOL = 1e-9
MIXING_MARGIN = 1e-6


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = dc_field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}"

    def to_dict(self) -> dict:
        return asdict(self)


class Context:
    """Shared objects for one verification run (graphs and measured lambda)."""

    def __init__(self, seed: int = 0, workers: int = 1, pair_sample: int = 10_000):
        self.seed = seed
        self.workers = workers
        self.pair_sample = pair_sample
        self.field = field_make(REF_Q)
        self.ring = MatrixRing(self.field, REF_N)
        self.graph = SumProductDigraph(GraphParams(self.field, REF_N, REF_D), self.ring)
        self._spectrum = None

    def rng(self, criterion: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, criterion])

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = second_singular_direction(
                self.graph, tol=SPECTRAL_TOL, seed=self.seed, workers=self.workers
            )
        return self._spectrum


def rank_census(ctx: Context) -> CriterionResult:
    cells = []
    ok = True
    for n, t, q in [(2, 2, 3), (2, 2, 5), (2, 4, 3)]:
        f = field_make(q)
        for rec in census_bruteforce(n, t, f):
            exact = count_rank_exact(n, t, rec.k, f)
            bound = count_rank_bound(n, t, rec.k, f)
            good = rec.exact_count == exact and bound >= exact
            ok &= good
            cells.append({"n": n, "t": t, "q": q, "k": rec.k, "brute": rec.exact_count,
                          "exact": exact, "bound": bound, "ok": good})
    ref = [count_rank_exact(2, 2, k, ctx.field) for k in range(3)]
    ok &= ref == [1, 32, 48]
    return CriterionResult(1, "rank census: closed form = enumeration, bound >= exact", ok,
                           {"reference_counts": ref, "cells": cells})


def solvable_pairs(ctx: Context) -> CriterionResult:
    recs = solvable_pairs_bruteforce(2, 2, ctx.field)
    naive = solvable_pairs_naive(2, 2, ctx.field)
    const = measured_constant(recs)
    table = {(r.m, r.k): r.exact_count for r in recs}
    zero_above = all(table[m, k] == 0 for m, k in table if k > m)
    full_rank_row = [table[2, k] for k in range(3)]
    expected_row = [48 * c for c in (1, 32, 48)]
    within = all(r.exact_count <= const * r.paper_bound for r in recs)
    ok = zero_above and full_rank_row == expected_row and within and math.isfinite(const) and recs == naive
    return CriterionResult(2, "solvable pairs: T_mk = 0 for k > m, full-rank row, bounded ratio", ok, {
        "cells": [r.to_dict() for r in recs],
        "measured_constant": const,
        "zero_when_k_gt_m": zero_above,
        "full_rank_row": full_rank_row,
        "naive_agrees": recs == naive,
    })


def regularity(ctx: Context) -> CriterionResult:
    g = ctx.graph
    outs, ins, bad = audit_degrees(g, np.arange(g.n_vertices), ctx.workers)
    ref = {"vertices": int(len(outs)), "out_min": int(outs.min()), "out_max": int(outs.max()),
           "in_min": int(ins.min()), "in_max": int(ins.max()), "non_edges": bad}
    g5 = SumProductDigraph(GraphParams(field_make(5), 2, 1))
    verts = sample_indices(ctx.rng(3), g5.n_vertices, 1000)
    o5, i5, bad5 = audit_degrees(g5, verts, ctx.workers)
    q5 = {"vertices": int(len(o5)), "out_min": int(o5.min()), "out_max": int(o5.max()),
          "in_min": int(i5.min()), "in_max": int(i5.max()), "non_edges": bad5}
    ok = (
        ref["vertices"] == 6561
        and ref["out_min"] == ref["out_max"] == ref["in_min"] == ref["in_max"] == 81
        and q5["out_min"] == q5["out_max"] == q5["in_min"] == q5["in_max"] == 625
        and bad == bad5 == 0
    )
    return CriterionResult(3, "regularity: in/out degree 81 (q=3, all), 625 (q=5, sample)", ok,
                           {"q3_exhaustive": ref, "q5_sample": q5})


def normality(ctx: Context) -> CriterionResult:
    rep = audit_graph(ctx.graph, ctx.graph.n_vertices, ctx.pair_sample, seed=int(ctx.rng(4).integers(2**31)),
                      workers=ctx.workers, raise_on_failure=False)
    values_ok = set(rep.predicted_values_off_diagonal) <= {0, 1, 9}
    ok = (
        rep.normality_pairs_checked >= 10_000
        and rep.normality_violations == 0
        and rep.prediction_violations == 0
        and rep.in_prediction_violations == 0
        and values_ok
    )
    return CriterionResult(4, "normality + case prediction: |N+| = |N-| = prediction on sampled pairs", ok, {
        "report": rep.to_dict(),
        "normality_holds": rep.normality_violations == 0,
        "out_prediction_exact": rep.prediction_violations == 0,
        "in_prediction_exact": rep.in_prediction_violations == 0,
        "predicted_values_subset_0_1_9": values_ok,
    })


def spectrum_checks(ctx: Context) -> CriterionResult:
    small = SumProductDigraph(GraphParams(ctx.field, 1, 1))
    dense = dense_spectrum(small)
    power = second_singular_direction(small, tol=SPECTRAL_TOL, seed=ctx.seed)
    small_rel = abs(power.lambda_est - dense.lambda_est) / dense.lambda_est

    rng = ctx.rng(5)
    x = rng.standard_normal((ctx.graph.n_vertices, 10))
    implicit = AAtOperator(ctx.graph, ctx.workers)(x)
    oracle = common_out_oracle_matvec(ctx.graph, x)
    rel = np.linalg.norm(implicit - oracle, axis=0) / np.linalg.norm(oracle, axis=0)
    rep = ctx.spectrum
    ok = (
        small_rel <= DENSE_MATCH_TOL
        and float(rel.max()) <= OPERATOR_MATCH_TOL
        and rep.converged
        and rep.residual <= SPECTRAL_TOL
        and rep.lambda_est <= ctx.graph.degree
    )
    return CriterionResult(5, "spectrum: power = dense oracle, implicit = classified A A^T, residual", ok, {
        "n1_dense_lambda": dense.lambda_est,
        "n1_power_lambda": power.lambda_est,
        "n1_relative_difference": small_rel,
        "operator_max_relative_error": float(rel.max()),
        "reference": rep.to_dict(),
    })


def mixing(ctx: Context) -> CriterionResult:
    g = ctx.graph
    lam = ctx.spectrum.lambda_est * (1 + MIXING_MARGIN)
    rng = ctx.rng(6)
    results = []
    for _ in range(100):
        sb, sc = (int(s) for s in rng.integers(1, g.n_vertices + 1, size=2))
        b = sample_indices(rng, g.n_vertices, sb)
        c = sample_indices(rng, g.n_vertices, sc)
        results.append(mixing_check(b, c, lam, g))
    everything = np.arange(g.n_vertices)
    full = mixing_check(everything, everything, lam, g)
    ok = all(r.holds for r in results) and full.holds and full.error == 0
    worst = max(r.error / r.error_bound for r in results)
    return CriterionResult(6, "mixing inequality with measured lambda: 100 random (B, C) and B = C = V", ok, {
        "lambda": lam,
        "random_pairs_holding": sum(r.holds for r in results),
        "worst_error_over_bound": worst,
        "full": full.to_dict(),
    })


def theorem_solutions(ctx: Context) -> CriterionResult:
    lam = ctx.spectrum.lambda_est * (1 + MIXING_MARGIN)
    full = theorem_report(full_family(ctx.field, REF_N, REF_D), lam, ctx.ring, workers=ctx.workers)
    rng = ctx.rng(7)
    runs = []
    for _ in range(50):
        fam = random_family(20, ctx.field, REF_N, REF_D, seed=int(rng.integers(2**31)))
        rep = theorem_report(fam, lam, ctx.ring)
        other = count_solutions_via_f(fam, ctx.ring)
        runs.append({"count": rep.count, "other": other, "error": rep.error_observed,
                     "measured_bound": rep.error_bound_measured_lambda, "holds_measured": rep.holds_measured,
                     "measured_constant": rep.measured_paper_constant})
    ok = (
        full.count == 3**12
        and full.error_observed == 0
        and all(r["count"] == r["other"] and r["holds_measured"] for r in runs)
    )
    return CriterionResult(7, "solution counts: full family exact, 50 random families agree and obey the bound", ok, {
        "full": full.to_dict(),
        "random_runs": runs,
        "max_measured_constant": max(r["measured_constant"] for r in runs),
    })


def theorem_incidences(ctx: Context) -> CriterionResult:
    Q = ctx.ring.order
    everything = [(x, y) for x in range(Q) for y in range(Q)]
    full = count_incidences(everything, everything, ctx.field, REF_N, ring=ctx.ring)
    rng = ctx.rng(8)
    runs = []
    for _ in range(20):
        pts = random_pairs(500, Q, rng)
        lns = random_pairs(500, Q, rng)
        rep = count_incidences(pts, lns, ctx.field, REF_N, ring=ctx.ring)
        limit = 500 * 500 / 81 + math.sqrt(2) * 3**3.5 * math.sqrt(500 * 500)
        runs.append({"count": rep.count, "limit": limit, "holds": rep.count <= limit})
    ok = full.count == 3**12 and full.error_observed == 0 and all(r["holds"] for r in runs)
    return CriterionResult(8, "incidences: full sets exact, 20 random (P, L) under the bound", ok, {
        "full": full.to_dict(),
        "random_runs": runs,
    })


CRITERIA = [
    rank_census,
    solvable_pairs,
    regularity,
    normality,
    spectrum_checks,
    mixing,
    theorem_solutions,
    theorem_incidences,
]


def canonical(results: list[CriterionResult]) -> str:
    return json.dumps([r.to_dict() for r in results], sort_keys=True)


def run_criteria(seed: int = 0, workers: int = 1, pair_sample: int = 10_000,
                 timing: dict | None = None) -> list[CriterionResult]:
    ctx = Context(seed, workers, pair_sample)
    out = []
    for check in CRITERIA:
        t0 = time.perf_counter()
        out.append(check(ctx))
        if timing is not None:
            timing[check.__name__] = time.perf_counter() - t0
    return out


def run_all(seed: int = 0, workers: int = 1, pair_sample: int = 10_000,
            timing: dict | None = None) -> list[CriterionResult]:
    """Criteria 1-8, then a repeat run compared for determinism (criterion 9)."""
    first = run_criteria(seed, workers, pair_sample, timing)
    t0 = time.perf_counter()
    second = run_criteria(seed, workers, pair_sample)
    same = canonical(first) == canonical(second)
    if timing is not None:
        timing["determinism"] = time.perf_counter() - t0
    first.append(CriterionResult(9, "determinism: identical results for identical seed", same,
                                 {"repeat_identical": same}))
    return first
