"""
Pseudo-Boolean constraint model: literals, normalized constraints, objectives,
assignments and the normalization/evaluation rules everything else builds on
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from config import Config

logger = logging.getLogger(__name__)

HARD = "hard"
OBJECTIVE = "objective"

OPERATORS = (">=", "<=", "=")


class PBModelError(ValueError):
    """Base class for model-level failures"""


class TriviallyUnsatError(PBModelError):
    """A constraint whose bound exceeds the sum of its coefficients"""

    def __init__(self, constraint_id: int, bound: int, total: int, line: Optional[int] = None):
        self.constraint_id = constraint_id
        self.bound = bound
        self.total = total
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(
            f"Constraint {constraint_id}{where} is trivially unsatisfiable: "
            f"bound {bound} > coefficient sum {total}"
        )


class CoefficientOverflowError(PBModelError):
    """Coefficient magnitudes too large for 64-bit arithmetic"""


@dataclass(frozen=True)
class Literal:
    """A variable (1-based) or its negation"""
    var: int
    negated: bool = False

    @property
    def pol(self) -> int:
        """Value of the variable that makes this literal true"""
        return 0 if self.negated else 1

    def __str__(self) -> str:
        return f"~x{self.var}" if self.negated else f"x{self.var}"


@dataclass(frozen=True)
class Term:
    """Positive coefficient times a literal"""
    coeff: int
    lit: Literal


@dataclass
class PBConstraint:
    """Normalized constraint: sum of coeff*literal >= bound"""
    id: int
    terms: Tuple[Term, ...]
    bound: int
    kind: str = HARD
    weight: int = 1
    care: int = 0
    line: Optional[int] = field(default=None, compare=False)  # source line, when parsed

    @property
    def total(self) -> int:
        return sum(t.coeff for t in self.terms)

    def __str__(self) -> str:
        body = " ".join(f"+{t.coeff} {t.lit}" for t in self.terms)
        return f"{body} >= {self.bound}"


@dataclass
class Objective:
    """Linear objective to minimize: constant_offset + sum of coeff*literal"""
    terms: Tuple[Term, ...] = ()
    constant_offset: int = 0

    @property
    def total(self) -> int:
        return sum(t.coeff for t in self.terms)

    @property
    def is_empty(self) -> bool:
        return not self.terms


class RawTerm(NamedTuple):
    """Signed, un-normalized term as written in a source file"""
    coeff: int
    var: int
    negated: bool = False


@dataclass
class RawConstraint:
    """Relation over raw terms, before normalization"""
    terms: List[RawTerm]
    operator: str
    rhs: int
    line: Optional[int] = None


@dataclass
class Assignment:
    """Complete 0/1 valuation; values[i] is the value of variable i+1"""
    values: List[int]

    @classmethod
    def zeros(cls, num_vars: int) -> "Assignment":
        return cls([0] * num_vars)

    def value(self, var: int) -> int:
        return self.values[var - 1]

    def __len__(self) -> int:
        return len(self.values)


def _check_magnitude(terms: Sequence[RawTerm], what: str) -> None:
    if sum(abs(t.coeff) for t in terms) > Config.MAX_COEFF_SUM:
        raise CoefficientOverflowError(f"{what}: coefficient sum exceeds 2^62")


def _merge_signed(terms: Iterable[RawTerm], rhs: int) -> Tuple[Dict[int, int], int]:
    """
    Rewrite every term onto its positive variable, merging duplicates.

    a*~x is a - a*x, so the constant moves to the right-hand side.
    """
    merged: Dict[int, int] = {}
    for coeff, var, negated in terms:
        if negated:
            rhs -= coeff
            coeff = -coeff
        merged[var] = merged.get(var, 0) + coeff
    return merged, rhs


def _positive_form(merged: Dict[int, int], rhs: int) -> Tuple[Tuple[Term, ...], int]:
    """Turn signed coefficients on positive variables into positive-coefficient terms"""
    terms = []
    for var, coeff in merged.items():
        if coeff > 0:
            terms.append(Term(coeff, Literal(var)))
        elif coeff < 0:
            # c*x = c - c*~x with c < 0
            rhs -= coeff
            terms.append(Term(-coeff, Literal(var, negated=True)))
    return tuple(terms), rhs


def _normalize_geq(terms: Sequence[RawTerm], rhs: int, constraint_id: int,
                   line: Optional[int]) -> Optional[PBConstraint]:
    merged, rhs = _merge_signed(terms, rhs)
    norm_terms, bound = _positive_form(merged, rhs)
    if bound <= 0:
        return None
    total = sum(t.coeff for t in norm_terms)
    if bound > total:
        raise TriviallyUnsatError(constraint_id, bound, total, line)
    return PBConstraint(id=constraint_id, terms=norm_terms, bound=bound, line=line)


def normalize_constraint(terms: Sequence[RawTerm], operator: str, rhs: int,
                         constraint_id: int = 0, line: Optional[int] = None) -> List[PBConstraint]:
    """
    Normalize a raw relation into zero, one or two ">=" constraints

    Args:
        terms: Signed raw terms
        operator: One of ">=", "<=", "="
        rhs: Right-hand side
        constraint_id: Id stamped on the outputs and carried by errors
        line: Source line, for diagnostics

    Returns:
        Normalized constraints; an empty list means the relation is a tautology

    Raises:
        TriviallyUnsatError: If a normalized bound exceeds its coefficient sum
        CoefficientOverflowError: If coefficients are too large
        ValueError: On an unknown operator
    """
    if operator not in OPERATORS:
        raise ValueError(f"Unknown operator '{operator}'")
    _check_magnitude(terms, f"constraint {constraint_id}")

    negated = [RawTerm(-c, v, n) for c, v, n in terms]
    forms = []
    if operator in (">=", "="):
        forms.append((terms, rhs))
    if operator in ("<=", "="):
        forms.append((negated, -rhs))

    result = []
    for form_terms, form_rhs in forms:
        constraint = _normalize_geq(form_terms, form_rhs, constraint_id, line)
        if constraint is not None:
            result.append(constraint)
    return result


def normalize_objective(terms: Sequence[RawTerm], constant_offset: int = 0) -> Objective:
    """Normalize raw objective terms to positive coefficients, accumulating the offset"""
    _check_magnitude(terms, "objective")
    merged, neg_rhs = _merge_signed(terms, -constant_offset)
    norm_terms, neg_offset = _positive_form(merged, neg_rhs)
    # the objective has no relation, so the moved constants are its offset
    return Objective(terms=norm_terms, constant_offset=-neg_offset)


def evaluate_constraint(c: PBConstraint, assignment: Assignment) -> Tuple[int, bool]:
    """Sum of coefficients of true literals, and whether it reaches the bound"""
    values = assignment.values
    total = 0
    for term in c.terms:
        if values[term.lit.var - 1] == term.lit.pol:
            total += term.coeff
    return total, total >= c.bound


def objective_value(obj: Objective, assignment: Assignment) -> int:
    values = assignment.values
    return obj.constant_offset + sum(
        t.coeff for t in obj.terms if values[t.lit.var - 1] == t.lit.pol
    )


def build_objective_constraint(obj: Objective, k: int) -> PBConstraint:
    """
    Encode "objective value <= k" as a constraint over the negated objective literals

    Σ bᵢ·lᵢ <= k - offset  ⇔  Σ bᵢ·¬lᵢ >= Σ bᵢ - (k - offset). A bound <= 0 marks
    the constraint as a tautology (inactive).
    """
    terms = tuple(Term(t.coeff, Literal(t.lit.var, not t.lit.negated)) for t in obj.terms)
    bound = obj.total - (k - obj.constant_offset)
    return PBConstraint(id=-1, terms=terms, bound=bound, kind=OBJECTIVE, weight=1, care=0)


def initial_objective_bound(obj: Objective) -> int:
    """k0 before any feasible solution: one below the largest possible objective value"""
    return obj.constant_offset + obj.total - 1


@dataclass
class PBOInstance:
    """Parsed and normalized problem"""
    num_vars: int
    hard_constraints: List[PBConstraint]
    objective: Objective = field(default_factory=Objective)
    # occurrences[v] = [(constraint id, coeff, pol)], index 0 unused
    occurrences: List[List[Tuple[int, int, int]]] = field(init=False, repr=False)

    def __post_init__(self):
        if self.num_vars < 0:
            raise ValueError("num_vars must be >= 0")
        self.occurrences = [[] for _ in range(self.num_vars + 1)]
        for index, c in enumerate(self.hard_constraints):
            if c.id != index:
                raise ValueError(f"Constraint at position {index} has id {c.id}")
            for term in c.terms:
                self._check_var(term.lit.var)
                self.occurrences[term.lit.var].append((index, term.coeff, term.lit.pol))
        for term in self.objective.terms:
            self._check_var(term.lit.var)

    def _check_var(self, var: int) -> None:
        if not 1 <= var <= self.num_vars:
            raise ValueError(f"Variable x{var} outside 1..{self.num_vars}")

    @property
    def is_decision(self) -> bool:
        return self.objective.is_empty

    @classmethod
    def from_raw(cls, num_vars: int, raw_constraints: Sequence[RawConstraint],
                 raw_objective: Optional[Sequence[RawTerm]] = None,
                 objective_offset: int = 0) -> "PBOInstance":
        """
        Build a normalized instance from raw relations

        Raises:
            TriviallyUnsatError: Propagated from normalization
        """
        hard: List[PBConstraint] = []
        dropped = 0
        for raw_id, raw in enumerate(raw_constraints):
            normalized = normalize_constraint(raw.terms, raw.operator, raw.rhs,
                                              constraint_id=raw_id, line=raw.line)
            if not normalized:
                dropped += 1
            for c in normalized:
                c.id = len(hard)
                hard.append(c)
        if dropped:
            logger.debug(f"Dropped {dropped} tautological constraints")
        objective = normalize_objective(raw_objective or [], objective_offset)
        return cls(num_vars=num_vars, hard_constraints=hard, objective=objective)
