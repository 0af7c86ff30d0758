"""Pattern matching of index conditions into solution-count certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .index_conditions import ConditionResult

PATTERNS = {
    "S1": ("I0", "I1"),
    "S2": ("I1", "I0"),
    "S3": ("I0", "I1", "I0"),
    "S4": ("I1", "I0", "I1"),
    "S5": ("I0", "I1", "I0", "I1"),
    "S6": ("I1", "I0", "I1", "I0"),
}
KIND_ALIASES = {"I0": "I0", "I0_strong": "I0", "I1": "I1", "I1_strong": "I1"}


@dataclass(frozen=True)
class LedgerEntry:
    rho: float
    kind: str
    result: ConditionResult | None = None


@dataclass
class ConditionLedger:
    """Holding index conditions sorted by rho; strengthened variants count as their base kind."""

    entries: list
    c: float

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise ValueError("c must lie in (0, 1]")
        cleaned = []
        for e in self.entries:
            if not isinstance(e, LedgerEntry):
                e = LedgerEntry(*e)
            if e.kind not in KIND_ALIASES:
                raise ValueError(f"ledger kind must be I0 or I1, got {e.kind!r}")
            if not e.rho > 0:
                raise ValueError("rho must be positive")
            if e.result is not None and not e.result.holds:
                raise ValueError(f"{e.kind} at rho={e.rho} does not hold")
            cleaned.append(LedgerEntry(float(e.rho), KIND_ALIASES[e.kind], e.result))
        cleaned.sort(key=lambda e: (e.rho, e.kind))
        # the same (rho, kind) from an exact and a strengthened check is one fact
        unique = []
        for e in cleaned:
            if not unique or (unique[-1].rho, unique[-1].kind) != (e.rho, e.kind):
                unique.append(e)
        self.entries = unique

    @classmethod
    def from_results(cls, results, c: float) -> "ConditionLedger":
        return cls([LedgerEntry(r.rho, r.kind, r) for r in results
                    if r.holds and r.kind in KIND_ALIASES and r.rho is not None], c)


@dataclass(frozen=True)
class Shell:
    """Region between two certified radii guaranteed to hold a fixed point.

    The inner boundary excludes the closure of K_rho (sup norm) or V_rho
    (window minimum) according to ``inner_set``; the outer boundary keeps the
    solution inside K_R or V_R according to ``outer_set``.  Radii are None
    when the eigenvalue criteria only assert their existence.
    """

    inner_rho: float | None
    outer_rho: float | None
    inner_set: str
    outer_set: str
    c: float

    @property
    def description(self) -> str:
        if self.inner_rho is None:
            return "rho0 < ||u|| and min_[a,b] u < R for some unspecified small rho0 and large R"
        inner = "||u||" if self.inner_set == "K" else "min_[a,b] u"
        outer = "||u||" if self.outer_set == "K" else "min_[a,b] u"
        return f"{inner} > {self.inner_rho:.15g} and {outer} < {self.outer_rho:.15g}"

    @property
    def norm_bounds(self) -> tuple[float, float]:
        """Bounds on ||u|| implied by the shell (using K_rho in V_rho in K_{rho/c})."""
        if self.inner_rho is None:
            return (0.0, float("inf"))
        lo = self.inner_rho
        hi = self.outer_rho if self.outer_set == "K" else self.outer_rho / self.c
        return (lo, hi)

    def contains(self, norm: float, window_min: float) -> bool:
        if self.inner_rho is None:
            return norm > 0
        inner = norm if self.inner_set == "K" else window_min
        outer = norm if self.outer_set == "K" else window_min
        return inner > self.inner_rho and outer < self.outer_rho

    def to_dict(self) -> dict:
        return {"inner_rho": self.inner_rho, "outer_rho": self.outer_rho,
                "inner_set": self.inner_set, "outer_set": self.outer_set,
                "norm_bounds": list(self.norm_bounds), "description": self.description}


@dataclass
class Certificate:
    pattern: str
    solution_count: int
    shells: list
    provenance: dict = field(default_factory=dict)
    advisory: bool = False

    def __post_init__(self):
        if self.solution_count not in (0, 1, 2, 3):
            raise ValueError("solution_count must be 0..3")
        if len(self.shells) != self.solution_count:
            raise ValueError("one shell per certified solution")


def _chain_ok(kinds, rhos, c: float) -> bool:
    """After I0 at rho the next radius must exceed rho/c, after I1 it must exceed rho."""
    for k, r, r_next in zip(kinds, rhos, rhos[1:]):
        bound = r / c if k == "I0" else r
        if not r_next > bound:
            return False
    return True


def _revalidate(name: str, rhos, c: float) -> bool:
    """Pattern inequalities written out case by case, independent of ``_chain_ok``."""
    r = rhos
    if name == "S1":
        return r[0] / c < r[1]
    if name == "S2":
        return r[0] < r[1]
    if name == "S3":
        return r[0] / c < r[1] < r[2]
    if name == "S4":
        return r[0] < r[1] and r[1] / c < r[2]
    if name == "S5":
        return r[0] / c < r[1] < r[2] and r[2] / c < r[3]
    if name == "S6":
        return r[0] < r[1] and r[1] / c < r[2] < r[3]
    return False


def shells_for(kinds, rhos, c: float) -> list[Shell]:
    """I1 then I0 gives V_R minus cl K_rho; I0 then I1 gives K_R minus cl V_rho."""
    out = []
    for k, r, r_next in zip(kinds, rhos, rhos[1:]):
        if k == "I1":
            out.append(Shell(r, r_next, "K", "V", c))
        else:
            out.append(Shell(r, r_next, "V", "K", c))
    return out


def match_patterns(ledger: ConditionLedger) -> Certificate:
    """Best pattern (S1-S6) realised by a subsequence of the ledger."""
    entries = ledger.entries
    c = ledger.c
    matches = []
    for name, kinds in PATTERNS.items():
        for combo in combinations(entries, len(kinds)):
            if tuple(e.kind for e in combo) != kinds:
                continue
            rhos = [e.rho for e in combo]
            if _chain_ok(kinds, rhos, c):
                if not _revalidate(name, rhos, c):
                    raise AssertionError(f"pattern {name} failed re-validation at {rhos}")
                matches.append((name, combo))
    if not matches:
        return Certificate("NONE", 0, [], {"matches": [], "c": c,
                                            "ledger": [(e.rho, e.kind) for e in entries]})
    # most solutions first; then the earliest radii (tightest localisation)
    name, combo = max(matches, key=lambda m: (len(m[1]) - 1, [-e.rho for e in m[1]]))
    kinds = PATTERNS[name]
    rhos = [e.rho for e in combo]
    used = [e.result for e in combo if e.result is not None]
    provenance = {
        "c": c,
        "radii": rhos,
        "kinds": list(kinds),
        "margins": [r.margin for r in used],
        "matches": [(n, [e.rho for e in cb]) for n, cb in matches],
        "ledger": [(e.rho, e.kind) for e in entries],
    }
    return Certificate(name, len(kinds) - 1, shells_for(kinds, rhos, c), provenance,
                       any(r.advisory for r in used))


def certify_eig(problem, eig_results) -> Certificate:
    """Certificate from the eigenvalue criteria (1), (2), (3).

    (1) and (3) give index 1 near 0 and index 0 far out: one nontrivial
    solution.  (1) and (2) only describe small radii and are reported as an
    index clash without a solution count.
    """
    crit1, crit2, crit3 = eig_results
    provenance = {
        "criteria": {r.kind: {"holds": r.holds, "lhs": r.lhs, "threshold": r.threshold,
                              "notes": list(r.notes)} for r in eig_results},
        "exact_criterion_1": "not implemented; strengthened chain used",
    }
    if crit1.holds and crit3.holds:
        return Certificate("EIG_13", 1, [Shell(None, None, "K", "V", problem.c)], provenance,
                           crit1.advisory or crit3.advisory)
    if crit1.holds and crit2.holds:
        provenance["note"] = "index 1 on K_rho and index 0 on V_rho at small radii; no count claimed"
        return Certificate("EIG_1_2", 0, [], provenance, crit1.advisory or crit2.advisory)
    return Certificate("NONE", 0, [], provenance, False)
