"""
Shared builders for tests
"""
import io
import itertools
import textwrap
from typing import Iterator, List, Optional, Sequence, Tuple

from models.pbo import Assignment, PBOInstance, RawConstraint, RawTerm
from services.opb_service import OpbService

# (coeff, var) or (coeff, var, negated)
TermSpec = Tuple


def make_instance(num_vars: int, constraints: Sequence[Tuple[Sequence[TermSpec], str, int]],
                  objective: Optional[Sequence[TermSpec]] = None, offset: int = 0) -> PBOInstance:
    raw = [
        RawConstraint(terms=[RawTerm(*t) for t in terms], operator=op, rhs=rhs, line=i + 1)
        for i, (terms, op, rhs) in enumerate(constraints)
    ]
    raw_objective = [RawTerm(*t) for t in objective] if objective is not None else None
    return PBOInstance.from_raw(num_vars, raw, raw_objective, offset)


def parse(text: str) -> PBOInstance:
    return OpbService.parse_opb(io.StringIO(textwrap.dedent(text)))


def all_assignments(num_vars: int) -> Iterator[Assignment]:
    for values in itertools.product((0, 1), repeat=num_vars):
        yield Assignment(values=list(values))


def raw_holds(terms: List[RawTerm], operator: str, rhs: int, assignment: Assignment) -> bool:
    """Evaluate a raw relation directly, without normalization"""
    lhs = 0
    for coeff, var, negated in terms:
        value = assignment.value(var)
        lhs += coeff * ((1 - value) if negated else value)
    if operator == ">=":
        return lhs >= rhs
    if operator == "<=":
        return lhs <= rhs
    return lhs == rhs
