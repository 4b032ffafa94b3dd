"""
Random PBO instance generator for tests and benchmarks
"""
import io
import logging
import random
from typing import List, Optional, Tuple

from models.pbo import PBOInstance
from services.opb_service import OpbService

logger = logging.getLogger(__name__)

MAX_GENERATED_VARS = 1_000_000
NEGATION_RATE = 0.5
OBJECTIVE_NEGATION_RATE = 0.25


def _format_terms(terms: List[Tuple[int, int, bool]]) -> str:
    return " ".join(f"+{coeff} {'~' if negated else ''}x{var}" for coeff, var, negated in terms)


class GeneratorService:
    """Deterministic random instances in OPB text form"""

    @staticmethod
    def generate_random_instance(
        num_vars: int,
        num_constraints: int,
        terms_range: Tuple[int, int] = (2, 5),
        coeff_range: Tuple[int, int] = (1, 10),
        objective_density: float = 0.5,
        seed: int = 0,
        planted: bool = False,
    ) -> Tuple[PBOInstance, str]:
        """
        Generate a random instance

        Every constraint is ">=" with a bound in [1, sum of its coefficients], so each
        is satisfiable on its own. With planted=True a hidden assignment is drawn
        first and every bound is at most what that assignment reaches, so the
        whole instance is feasible.

        Args:
            num_vars: Number of variables (at most 10^6)
            num_constraints: Number of hard constraints
            terms_range: Inclusive (min, max) terms per constraint, capped at num_vars
            coeff_range: Inclusive (min, max) coefficient
            objective_density: Probability that a variable appears in the objective
            seed: Random seed; equal arguments give byte-identical text
            planted: Guarantee feasibility through a hidden assignment

        Returns:
            Tuple of (parsed instance, OPB text)

        Raises:
            ValueError: On out-of-range arguments
        """
        min_terms, max_terms = terms_range
        min_coeff, max_coeff = coeff_range
        if not 0 <= num_vars <= MAX_GENERATED_VARS:
            raise ValueError(f"num_vars must lie in [0, {MAX_GENERATED_VARS}]")
        if num_constraints < 0:
            raise ValueError("num_constraints must be >= 0")
        if num_constraints and num_vars == 0:
            raise ValueError("constraints need at least one variable")
        if not 1 <= min_terms <= max_terms:
            raise ValueError("terms_range must satisfy 1 <= min <= max")
        if not 1 <= min_coeff <= max_coeff:
            raise ValueError("coeff_range must satisfy 1 <= min <= max")
        if not 0.0 <= objective_density <= 1.0:
            raise ValueError("objective_density must lie in [0, 1]")

        rng = random.Random(seed)
        hidden: Optional[List[int]] = [rng.randint(0, 1) for _ in range(num_vars)] if planted else None

        lines = [f"* #variable= {num_vars} #constraint= {num_constraints}"]
        objective = []
        for var in range(1, num_vars + 1):
            if rng.random() < objective_density:
                objective.append((rng.randint(min_coeff, max_coeff), var, rng.random() < OBJECTIVE_NEGATION_RATE))
        if objective:
            lines.append(f"min: {_format_terms(objective)} ;")

        for _ in range(num_constraints):
            size = rng.randint(min(min_terms, num_vars), min(max_terms, num_vars))
            terms = [
                (rng.randint(min_coeff, max_coeff), var, rng.random() < NEGATION_RATE)
                for var in rng.sample(range(1, num_vars + 1), size)
            ]
            if hidden is None:
                reach = sum(coeff for coeff, _, _ in terms)
            else:
                def true_under_hidden(var: int, negated: bool) -> bool:
                    return hidden[var - 1] == (0 if negated else 1)

                if not any(true_under_hidden(var, negated) for _, var, negated in terms):
                    coeff, var, negated = terms[0]
                    terms[0] = (coeff, var, not negated)
                reach = sum(coeff for coeff, var, negated in terms if true_under_hidden(var, negated))
            bound = rng.randint(1, reach)
            lines.append(f"{_format_terms(terms)} >= {bound} ;")

        text = "\n".join(lines) + "\n"
        instance = OpbService.parse_opb(io.StringIO(text))
        logger.debug(
            f"Generated instance seed={seed}: {num_vars} vars, {num_constraints} constraints, "
            f"{len(objective)} objective terms"
        )
        return instance, text
