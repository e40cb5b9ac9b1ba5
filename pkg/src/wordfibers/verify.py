"""Executable checkers for the fiber inequalities, each returning a structured
pass/fail report with reproducible witnesses.

Exhaustive checkers report "pass" or "fail"; sampled checkers never report
"pass", only "inconclusive-sampled" (zero violations found) or "fail".
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded
from .fibers import (
    DEFAULT_BUDGET,
    eval_automorphic,
    fiber_distribution,
    max_fiber,
    max_fiber_per_target,
    pi_w,
    rewrite_coset_equation,
)
from .groups import (
    AutSet,
    FiniteGroup,
    SubgroupHandle,
    WreathSampler,
    automorphism_group,
    induced_autset,
    is_simple,
    make_group,
    power_group,
    quotient,
    restricted_autset,
)
from .words import ReducedWord, format_word, variations


@dataclass
class CheckReport:
    claim: str
    params: dict
    outcome: str  # "pass" | "fail" | "inconclusive-sampled"
    witness: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.outcome == "fail"


def _require_inner(a: AutSet) -> None:
    if not a.contains_inner:
        raise ValueError("the automorphism set must contain all inner automorphisms")


def check_identity_maximal(
    g: FiniteGroup,
    w: ReducedWord,
    a: AutSet,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> CheckReport:
    """Every target's best fiber is at most the identity's best fiber."""
    _require_inner(a)
    pt = max_fiber_per_target(g, w, a, budget=budget, threads=threads)
    identity_max = int(pt.values[0])
    worst = int(np.argmax(pt.values))
    params = {
        "group": g.spec,
        "word": format_word(w),
        "autset": a.kind,
        "autset_size": len(a),
    }
    counters = {"tuples_examined": pt.tuples_examined, "evaluations": pt.evaluations}
    if int(pt.values[worst]) > identity_max:
        return CheckReport(
            claim="identity-max",
            params=params,
            outcome="fail",
            witness={
                "target": worst,
                "target_max": int(pt.values[worst]),
                "identity_max": identity_max,
                "witness_tuple_index": int(pt.witness_tuple_indices[worst]),
            },
            counters=counters,
        )
    return CheckReport(
        claim="identity-max",
        params=params,
        outcome="pass",
        witness={
            "identity_max": identity_max,
            "per_target_max": [int(v) for v in pt.values],
        },
        counters=counters,
    )


def check_submultiplicative(
    g: FiniteGroup,
    n: SubgroupHandle,
    w: ReducedWord,
    a: AutSet,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> CheckReport:
    """Per-target and overall product bounds across a characteristic subgroup."""
    _require_inner(a)
    ind = induced_autset(g, n, a)
    res = restricted_autset(g, n, a)
    qh = quotient(g, n)
    pt_g = max_fiber_per_target(g, w, a, budget=budget, threads=threads)
    pt_q = max_fiber_per_target(qh.quotient, w, ind, budget=budget, threads=threads)
    pt_n = max_fiber_per_target(res.group, w, res, budget=budget, threads=threads)
    n_identity = int(pt_n.values[0])
    params = {
        "group": g.spec,
        "subgroup_order": n.order,
        "word": format_word(w),
        "autset": a.kind,
        "autset_size": len(a),
        "induced_size": len(ind),
        "restricted_size": len(res),
    }
    counters = {
        "evaluations": pt_g.evaluations + pt_q.evaluations + pt_n.evaluations,
        "tuples_examined": pt_g.tuples_examined
        + pt_q.tuples_examined
        + pt_n.tuples_examined,
    }
    for target in range(g.order):
        lhs = int(pt_g.values[target])
        rhs = int(pt_q.values[qh.projection[target]]) * n_identity
        if lhs > rhs:
            return CheckReport(
                claim="submultiplicative",
                params=params,
                outcome="fail",
                witness={
                    "part": 1,
                    "target": target,
                    "group_value": lhs,
                    "quotient_value": int(pt_q.values[qh.projection[target]]),
                    "subgroup_identity_value": n_identity,
                },
                counters=counters,
            )
    overall_lhs = int(pt_g.values.max())
    overall_rhs = int(pt_q.values.max()) * int(pt_n.values.max())
    if overall_lhs > overall_rhs:
        return CheckReport(
            claim="submultiplicative",
            params=params,
            outcome="fail",
            witness={
                "part": 3,
                "group_value": overall_lhs,
                "quotient_value": int(pt_q.values.max()),
                "subgroup_value": int(pt_n.values.max()),
            },
            counters=counters,
        )
    return CheckReport(
        claim="submultiplicative",
        params=params,
        outcome="pass",
        witness={
            "group_value": overall_lhs,
            "quotient_value": int(pt_q.values.max()),
            "subgroup_value": int(pt_n.values.max()),
        },
        counters=counters,
    )


def check_dihedral_counterexample(o: int, budget: int = DEFAULT_BUDGET) -> CheckReport:
    """The squaring word on the dihedral group of order 2o beats the product of
    the plain bounds over its cyclic index-2 subgroup and the order-2 quotient."""
    if o < 3 or o % 2 == 0:
        raise ValueError(f"o must be an odd integer >= 3, got {o}")
    from .words import parse_word

    w = parse_word("x1^2")
    g = make_group(f"dih:{o}")
    sub = make_group(f"cyc:{o}")
    quo = make_group("cyc:2")
    pi_g, _ = pi_w(g, w, budget=budget)
    pi_n, _ = pi_w(sub, w, budget=budget)
    pi_q, _ = pi_w(quo, w, budget=budget)
    violated = pi_g > pi_n * pi_q
    return CheckReport(
        claim="dihedral-counterexample",
        params={"o": o},
        outcome="pass" if violated else "fail",
        witness={
            "group_max": pi_g,
            "subgroup_max": pi_n,
            "quotient_max": pi_q,
            "product": pi_n * pi_q,
        },
        counters={"evaluations": 2 * o + o + 2},
    )


def check_rewrite(
    g: FiniteGroup,
    n: SubgroupHandle,
    w: ReducedWord,
    trials: int = 100,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> CheckReport:
    """Random trials of the coset-equation rewrite, each verified over all of N^d."""
    aut = automorphism_group(g)
    rng = np.random.default_rng(seed)
    d = w.num_variables
    sweep = n.order**d
    if trials * sweep * 2 > budget:
        raise BudgetExceeded(f"{trials} trials over {sweep} coset tuples exceed budget")
    params = {
        "group": g.spec,
        "subgroup_order": n.order,
        "word": format_word(w),
        "trials": trials,
        "seed": seed,
    }
    checked = 0
    for trial in range(trials):
        tuple_indices = [int(i) for i in rng.integers(0, len(aut), w.length)]
        auts = tuple(aut[i] for i in tuple_indices)
        base = tuple(int(x) for x in rng.integers(0, g.order, d))
        result = rewrite_coset_equation(g, n, w, auts, base)
        for combo in itertools.product(range(n.order), repeat=d):
            shifted = tuple(g.mul(n.elements[c], b) for c, b in zip(combo, base))
            lhs = eval_automorphic(g, w, auts, shifted) == result.target
            rhs = eval_automorphic(result.n_group, w, result.beta, combo) == 0
            checked += 1
            if lhs != rhs:
                return CheckReport(
                    claim="rewrite",
                    params=params,
                    outcome="fail",
                    witness={
                        "trial": trial,
                        "tuple_indices": tuple_indices,
                        "base": list(base),
                        "coset_tuple": list(combo),
                        "lhs_holds": lhs,
                        "rhs_holds": rhs,
                    },
                    counters={"equivalences_checked": checked},
                )
    return CheckReport(
        claim="rewrite",
        params=params,
        outcome="pass",
        witness={},
        counters={"equivalences_checked": checked},
    )


def variation_profile(
    s: FiniteGroup,
    w: ReducedWord,
    aut: AutSet,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> tuple[Fraction, list[dict], int]:
    """Exact best fiber proportion over all variations, with a per-form breakdown.

    Variations sharing a flattened form are computed once; the breakdown lists
    each distinct flattened word with its proportion and multiplicity.
    """
    by_form: dict[str, dict] = {}
    for v in variations(w):
        key = format_word(v.flattened)
        if key in by_form:
            by_form[key]["multiplicity"] += 1
            continue
        by_form[key] = {"word": key, "flattened": v.flattened, "multiplicity": 1}
    evaluations = 0
    best = Fraction(0)
    breakdown = []
    for entry in by_form.values():
        res = max_fiber(s, entry["flattened"], aut, budget=budget, threads=threads)
        evaluations += res.evaluations
        best = max(best, res.proportion)
        breakdown.append(
            {
                "word": entry["word"],
                "multiplicity": entry["multiplicity"],
                "proportion": res.proportion,
                "value": res.value,
            }
        )
    return best, breakdown, evaluations


def bound_exponent(n: int, l: int, mode: str = "ceil") -> int:
    """Exponent n/l^2, rounded up by default; "floor" gives the weaker bound."""
    if mode == "ceil":
        return -((-n) // (l * l))
    if mode == "floor":
        return n // (l * l)
    raise ValueError(f"unknown exponent mode {mode!r}")


def check_variation_bound(
    s: FiniteGroup,
    n: int,
    w: ReducedWord,
    mode: str = "exact",
    samples: int = 1000,
    seed: int = 0,
    exponent_mode: str = "ceil",
    epsilon_factor: Fraction = Fraction(1),
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> CheckReport:
    """Fiber proportions over S^n stay below the best variation proportion,
    raised to the n/l^2 exponent.

    n = 1 is checked exactly; n >= 2 draws sampled automorphism tuples through
    the coordinate-permuting construction and can only report
    inconclusive-sampled or fail.  ``exponent_mode`` selects the ceiling
    (default) or the weaker floor exponent; ``epsilon_factor`` rescales the
    computed bound (used by negative controls).
    """
    if s.is_abelian or not is_simple(s):
        raise ValueError("the base group must be a nonabelian simple group")
    if exponent_mode not in ("ceil", "floor"):
        raise ValueError(f"unknown exponent mode {exponent_mode!r}")
    aut = automorphism_group(s)
    epsilon, breakdown, evaluations = variation_profile(
        s, w, aut, budget=budget, threads=threads
    )
    epsilon_used = epsilon * epsilon_factor
    l = w.length
    exponent = bound_exponent(n, l, exponent_mode)
    bound = epsilon_used**exponent
    params = {
        "simple": s.spec,
        "n": n,
        "word": format_word(w),
        "aut_size": len(aut),
        "epsilon": epsilon,
        "epsilon_factor": epsilon_factor,
        "exponent_mode": exponent_mode,
        "exponent": exponent,
        "bound": bound,
        "variation_breakdown": breakdown,
    }
    if n == 1:
        res = max_fiber(s, w, aut, budget=budget, threads=threads)
        evaluations += res.evaluations
        holds = res.proportion <= bound
        return CheckReport(
            claim="variation-bound",
            params=params,
            outcome="pass" if holds else "fail",
            witness={
                "proportion": res.proportion,
                "value": res.value,
                "target": res.witness_target,
                "tuple_indices": res.witness_tuple_indices,
            },
            counters={"evaluations": evaluations},
        )
    power = power_group(s, n)
    sampler = WreathSampler(s, n, aut, power=power)
    rng = np.random.default_rng(seed)
    total = power.order**w.num_variables
    worst_count = 0
    worst = {}
    for sample_idx in range(samples):
        tup = tuple(sampler.sample(rng) for _ in range(l))
        dist = fiber_distribution(power, w, tup, budget=budget)
        evaluations += total
        value, target = dist.max_fiber()
        if value > worst_count:
            worst_count = value
            worst = {"sample": sample_idx, "value": value, "target": target}
        # exact comparison: value/total <= bound
        if value * bound.denominator > bound.numerator * total:
            return CheckReport(
                claim="variation-bound",
                params=params,
                outcome="fail",
                witness={
                    "sample": sample_idx,
                    "seed": seed,
                    "value": value,
                    "target": target,
                    "proportion": Fraction(value, total),
                },
                counters={"evaluations": evaluations, "samples": sample_idx + 1},
            )
    return CheckReport(
        claim="variation-bound",
        params=params,
        outcome="inconclusive-sampled",
        witness={"worst_sampled": worst, "seed": seed},
        counters={"evaluations": evaluations, "samples": samples},
    )


def check_variation_projection(
    g: FiniteGroup,
    w: ReducedWord,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> CheckReport:
    """Whenever some variation's map can be made constant, so can the word's,
    demonstrated by reusing the witness tuple."""
    aut = automorphism_group(g)
    d = w.num_variables
    total = g.order**d
    evaluations = 0
    constant_forms = []
    by_form: dict[str, object] = {}
    for v in variations(w):
        key = format_word(v.flattened)
        if key in by_form:
            continue
        by_form[key] = v.flattened
    params = {"group": g.spec, "word": format_word(w), "forms": sorted(by_form)}
    for key, flattened in sorted(by_form.items()):
        res = max_fiber(g, flattened, aut, budget=budget, threads=threads)
        evaluations += res.evaluations
        if res.proportion != 1:
            continue
        dist = fiber_distribution(g, w, res.witness_tuple, budget=budget)
        evaluations += total
        value, target = dist.max_fiber()
        constant_forms.append({"word": key, "target": target})
        if value != total:
            return CheckReport(
                claim="variation-projection",
                params=params,
                outcome="fail",
                witness={
                    "variation": key,
                    "tuple_indices": res.witness_tuple_indices,
                    "word_max_fiber": value,
                    "needed": total,
                },
                counters={"evaluations": evaluations},
            )
    return CheckReport(
        claim="variation-projection",
        params=params,
        outcome="pass",
        witness={"constant_variations": constant_forms},
        counters={"evaluations": evaluations},
    )
