"""
Service for reading and writing the PB-competition OPB linear format and
competition-style solver output
"""
import logging
import re
from dataclasses import dataclass, field
from typing import IO, Iterator, List, Optional, Tuple

from config import Config
from models.pbo import (
    Assignment, PBOInstance, RawConstraint, RawTerm,
)
from models.schemas import InstanceSummary, SolveStatus

logger = logging.getLogger(__name__)

HEADER_RE = re.compile(r"#variable=\s*(\d+)\s+#constraint=\s*(\d+)")
OFFSET_RE = re.compile(r"#objective_offset=\s*([+-]?\d+)")
SUBTOKEN_RE = re.compile(r"min:|max:|>=|<=|=|;|[<>]|[^\s;=<>]+")
INT_RE = re.compile(r"[+-]?\d+")
LITERAL_RE = re.compile(r"(~?)x(\d+)")
SOLUTION_LITERAL_RE = re.compile(r"([-~]?)x(\d+)")

RELATIONS = (">=", "<=", "=")


class ParseError(ValueError):
    """Malformed OPB or solution input"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class UnsupportedNonlinearError(ParseError):
    """Product of variables inside a term"""


@dataclass
class OpbDocument:
    """Raw content of an OPB file before normalization"""
    declared_vars: Optional[int] = None
    declared_constraints: Optional[int] = None
    objective: Optional[List[RawTerm]] = None
    objective_offset: int = 0
    objective_line: Optional[int] = None
    raw_constraints: List[RawConstraint] = field(default_factory=list)

    @property
    def max_var(self) -> int:
        highest = 0
        for raw in self.raw_constraints:
            for term in raw.terms:
                highest = max(highest, term.var)
        for term in self.objective or []:
            highest = max(highest, term.var)
        return highest


class OpbService:
    """Handles OPB parsing, instance writing and solution output"""

    @staticmethod
    def read_document(stream: IO[str]) -> OpbDocument:
        """
        Tokenize an OPB stream into raw statements

        Args:
            stream: Text stream with OPB content

        Returns:
            OpbDocument with raw terms and relations

        Raises:
            ParseError: On malformed input, with the offending line number
            UnsupportedNonlinearError: On product terms
        """
        doc = OpbDocument()
        statement: List[Tuple[str, int]] = []

        for line_no, line in OpbService._numbered_lines(stream):
            stripped = line.strip()
            if stripped.startswith("*"):
                header = HEADER_RE.search(stripped)
                if header and doc.declared_vars is None:
                    doc.declared_vars = int(header.group(1))
                    doc.declared_constraints = int(header.group(2))
                offset = OFFSET_RE.search(stripped)
                if offset:
                    doc.objective_offset = int(offset.group(1))
                continue

            for token in SUBTOKEN_RE.findall(stripped):
                if token == ";":
                    if not statement:
                        raise ParseError("empty statement", line_no)
                    OpbService._add_statement(doc, statement)
                    statement = []
                else:
                    statement.append((token, line_no))

        if statement:
            raise ParseError("missing ';' at end of statement", statement[0][1])
        return doc

    @staticmethod
    def _numbered_lines(stream: IO[str]) -> Iterator[Tuple[int, str]]:
        """Yield (line number, line), turning decode failures into ParseError"""
        lines = iter(stream)
        line_no = 0
        while True:
            line_no += 1
            try:
                line = next(lines)
            except StopIteration:
                return
            except UnicodeDecodeError as e:
                raise ParseError(f"not valid UTF-8 text ({e.reason})", line_no) from e
            yield line_no, line

    @staticmethod
    def _add_statement(doc: OpbDocument, tokens: List[Tuple[str, int]]) -> None:
        head, line = tokens[0]
        if head == "max:":
            raise ParseError("maximization objectives are not supported; use 'min:'", line)
        if head == "min:":
            if doc.objective is not None:
                raise ParseError("multiple objectives", line)
            if doc.raw_constraints:
                logger.warning(f"Objective on line {line} follows constraints")
            doc.objective = OpbService._parse_terms(tokens[1:], line)
            doc.objective_line = line
            return

        relations = [i for i, (tok, _) in enumerate(tokens) if tok in RELATIONS]
        for tok, tok_line in tokens:
            if tok in ("<", ">"):
                raise ParseError(f"unknown operator '{tok}'", tok_line)
            if tok in ("min:", "max:"):
                raise ParseError(f"'{tok}' inside a constraint (missing ';'?)", tok_line)
        if not relations:
            raise ParseError("missing relational operator", line)
        if len(relations) > 1:
            raise ParseError("more than one relational operator (missing ';'?)",
                             tokens[relations[1]][1])

        op_index = relations[0]
        rhs_tokens = tokens[op_index + 1:]
        if len(rhs_tokens) != 1:
            raise ParseError("right-hand side must be a single integer", tokens[op_index][1])
        rhs = OpbService._parse_int(*rhs_tokens[0])
        terms = OpbService._parse_terms(tokens[:op_index], line)
        doc.raw_constraints.append(
            RawConstraint(terms=terms, operator=tokens[op_index][0], rhs=rhs, line=line)
        )

    @staticmethod
    def _parse_int(token: str, line: int) -> int:
        if not INT_RE.fullmatch(token):
            if re.match(r"[+-]?\d", token):
                raise ParseError(f"malformed integer '{token}'", line)
            raise ParseError(f"unexpected token '{token}'", line)
        return int(token)

    @staticmethod
    def _parse_literal(token: str, line: int) -> Optional[Tuple[int, bool]]:
        match = LITERAL_RE.fullmatch(token)
        if not match:
            return None
        var = int(match.group(2))
        if var == 0:
            raise ParseError("variable index 0 (variables are numbered from x1)", line)
        return var, match.group(1) == "~"

    @staticmethod
    def _parse_terms(tokens: List[Tuple[str, int]], line: int) -> List[RawTerm]:
        """Parse '<int> <literal>' pairs; a bare literal has coefficient 1"""
        terms: List[RawTerm] = []
        i = 0
        while i < len(tokens):
            token, tok_line = tokens[i]
            literal = OpbService._parse_literal(token, tok_line)
            if literal is not None:
                coeff = 1
            else:
                coeff = OpbService._parse_int(token, tok_line)
                i += 1
                if i >= len(tokens):
                    raise ParseError(f"coefficient '{token}' without a variable", tok_line)
                token, tok_line = tokens[i]
                literal = OpbService._parse_literal(token, tok_line)
                if literal is None:
                    raise ParseError(f"expected a variable after coefficient, got '{token}'", tok_line)
            i += 1
            if i < len(tokens) and OpbService._parse_literal(*tokens[i]) is not None:
                raise UnsupportedNonlinearError(
                    f"nonlinear term (product of variables) '{token} {tokens[i][0]}'", tok_line
                )
            var, negated = literal
            terms.append(RawTerm(coeff, var, negated))
        return terms

    @staticmethod
    def parse_opb(stream: IO[str]) -> PBOInstance:
        """
        Parse and normalize an OPB stream

        Raises:
            ParseError: On malformed input or variables beyond the declared count
            TriviallyUnsatError: If a constraint can never be satisfied
            CoefficientOverflowError: If coefficient sums exceed 2^62
        """
        doc = OpbService.read_document(stream)
        max_var = doc.max_var

        if doc.declared_vars is not None:
            if max_var > doc.declared_vars:
                line = OpbService._first_line_with_var(doc, doc.declared_vars)
                raise ParseError(
                    f"variable x{max_var} exceeds declared #variable= {doc.declared_vars}", line
                )
            if max_var != doc.declared_vars:
                logger.warning(f"Header declares {doc.declared_vars} variables, highest index used is {max_var}")
            if doc.declared_constraints != len(doc.raw_constraints):
                logger.warning(
                    f"Header declares {doc.declared_constraints} constraints, "
                    f"parsed {len(doc.raw_constraints)}"
                )
            num_vars = doc.declared_vars
        else:
            num_vars = max_var

        instance = PBOInstance.from_raw(
            num_vars=num_vars,
            raw_constraints=doc.raw_constraints,
            raw_objective=doc.objective,
            objective_offset=doc.objective_offset,
        )
        logger.info(
            f"Parsed instance: {instance.num_vars} variables, "
            f"{len(doc.raw_constraints)} raw / {len(instance.hard_constraints)} normalized constraints, "
            f"{len(instance.objective.terms)} objective terms"
        )
        return instance

    @staticmethod
    def _first_line_with_var(doc: OpbDocument, limit: int) -> Optional[int]:
        if doc.objective and any(t.var > limit for t in doc.objective):
            return doc.objective_line
        for raw in doc.raw_constraints:
            if any(t.var > limit for t in raw.terms):
                return raw.line
        return None

    @staticmethod
    def write_opb(instance: PBOInstance, stream: IO[str]) -> None:
        """Write a normalized instance back as OPB (">=" constraints, '~x' literals)"""
        stream.write(f"* #variable= {instance.num_vars} #constraint= {len(instance.hard_constraints)}\n")
        objective = instance.objective
        if objective.constant_offset:
            stream.write(f"* #objective_offset= {objective.constant_offset}\n")
        if objective.terms or objective.constant_offset:
            body = "".join(f"+{t.coeff} {t.lit} " for t in objective.terms)
            stream.write(f"min: {body};\n")
        for c in instance.hard_constraints:
            body = "".join(f"+{t.coeff} {t.lit} " for t in c.terms)
            stream.write(f"{body}>= {c.bound} ;\n")

    @staticmethod
    def emit_improvement(cost: int, stream: IO[str]) -> None:
        """Write one 'o' line and flush it right away"""
        stream.write(f"o {cost}\n")
        stream.flush()

    @staticmethod
    def format_v_lines(assignment: Assignment, width: int = Config.V_LINE_WIDTH) -> List[str]:
        """'v' lines covering every variable, each at most width characters"""
        lines: List[str] = []
        current = "v"
        for index, value in enumerate(assignment.values, start=1):
            literal = f"x{index}" if value else f"-x{index}"
            if len(current) + 1 + len(literal) > width:
                lines.append(current)
                current = "v"
            current += " " + literal
        lines.append(current)
        return lines

    @staticmethod
    def emit_solution(
        status: SolveStatus,
        best: Optional[Tuple[Assignment, int]],
        stream: IO[str],
        emit_cost: bool = True
    ) -> None:
        """
        Write the final competition output

        Args:
            status: Final status
            best: Best assignment and its cost, required when feasible
            stream: Output stream
            emit_cost: Write an 'o' line for the final cost (off when already streamed
                or for decision instances)
        """
        status = SolveStatus(status)
        if status == SolveStatus.SATISFIABLE:
            if best is None:
                raise ValueError("A feasible status needs a best assignment")
            assignment, cost = best
            if emit_cost:
                stream.write(f"o {cost}\n")
            stream.write(f"s {status.value}\n")
            for line in OpbService.format_v_lines(assignment):
                stream.write(line + "\n")
        else:
            stream.write(f"s {status.value}\n")
        stream.flush()

    @staticmethod
    def read_solution(stream: IO[str], num_vars: int) -> Tuple[Optional[SolveStatus], Optional[Assignment], Optional[int]]:
        """
        Read competition output ('s', 'o' and 'v' lines)

        Returns:
            Tuple of (status, assignment or None when no 'v' lines, last 'o' cost)

        Raises:
            ParseError: On unknown literals, conflicts or missing variables
        """
        status: Optional[SolveStatus] = None
        cost: Optional[int] = None
        values: List[Optional[int]] = [None] * num_vars
        seen_values = False

        for line_no, line in OpbService._numbered_lines(stream):
            parts = line.split()
            if not parts or parts[0] == "c":
                continue
            kind, rest = parts[0], parts[1:]
            if kind == "s":
                try:
                    status = SolveStatus(" ".join(rest))
                except ValueError:
                    raise ParseError(f"unknown status '{' '.join(rest)}'", line_no)
            elif kind == "o":
                if len(rest) != 1:
                    raise ParseError("'o' line needs exactly one value", line_no)
                cost = OpbService._parse_int(rest[0], line_no)
            elif kind == "v":
                seen_values = True
                for token in rest:
                    match = SOLUTION_LITERAL_RE.fullmatch(token)
                    if not match:
                        raise ParseError(f"malformed literal '{token}'", line_no)
                    var = int(match.group(2))
                    if not 1 <= var <= num_vars:
                        raise ParseError(f"variable x{var} outside 1..{num_vars}", line_no)
                    value = 0 if match.group(1) else 1
                    if values[var - 1] is not None and values[var - 1] != value:
                        raise ParseError(f"conflicting values for x{var}", line_no)
                    values[var - 1] = value
            else:
                raise ParseError(f"unexpected line type '{kind}'", line_no)

        if not seen_values:
            return status, None, cost
        missing = [i + 1 for i, v in enumerate(values) if v is None]
        if missing:
            shown = ", ".join(f"x{v}" for v in missing[:5])
            raise ParseError(f"{len(missing)} variables without a value ({shown}...)")
        return status, Assignment(values=[int(v) for v in values]), cost

    @staticmethod
    def describe(instance: PBOInstance) -> InstanceSummary:
        """Size statistics, counting the clausal and cardinality special cases"""
        coeffs = [t.coeff for c in instance.hard_constraints for t in c.terms]
        clauses = cardinality = 0
        for c in instance.hard_constraints:
            if all(t.coeff == 1 for t in c.terms):
                if c.bound == 1:
                    clauses += 1
                else:
                    cardinality += 1
        return InstanceSummary(
            num_vars=instance.num_vars,
            num_constraints=len(instance.hard_constraints),
            objective_terms=len(instance.objective.terms),
            objective_offset=instance.objective.constant_offset,
            min_coeff=min(coeffs) if coeffs else None,
            max_coeff=max(coeffs) if coeffs else None,
            clauses=clauses,
            cardinality_constraints=cardinality,
            general_constraints=len(instance.hard_constraints) - clauses - cardinality,
        )
