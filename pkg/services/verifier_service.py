"""
Independent solution checking and exhaustive enumeration oracles
"""
import logging
from enum import Enum
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from config import Config
from models.pbo import Assignment, PBOInstance
from models.schemas import VerificationReport

logger = logging.getLogger(__name__)

CHUNK_BITS = 16


class TooLargeError(ValueError):
    """Instance exceeds an enumeration guard"""

    def __init__(self, num_vars: int, limit: int):
        self.num_vars = num_vars
        self.limit = limit
        super().__init__(f"Enumeration limited to {limit} variables, instance has {num_vars}")


class ForcedStatus(str, Enum):
    FORCED_1 = "forced-1"
    FORCED_0 = "forced-0"
    FREE = "free"
    INFEASIBLE = "instance-infeasible"


class VerifierService:
    """Checks assignments from scratch and enumerates small instances"""

    @staticmethod
    def verify(instance: PBOInstance, assignment: Assignment) -> VerificationReport:
        """
        Evaluate every hard constraint and the objective directly on the assignment

        Raises:
            ValueError: If the assignment does not cover exactly the instance variables
        """
        if len(assignment) != instance.num_vars:
            raise ValueError(
                f"Assignment has {len(assignment)} values, instance has {instance.num_vars} variables"
            )
        values = assignment.values
        violated = []
        for c in instance.hard_constraints:
            reached = 0
            for term in c.terms:
                if values[term.lit.var - 1] == term.lit.pol:
                    reached += term.coeff
            if reached < c.bound:
                violated.append(c.id)

        objective = instance.objective
        cost = objective.constant_offset
        for term in objective.terms:
            if values[term.lit.var - 1] == term.lit.pol:
                cost += term.coeff

        return VerificationReport(feasible=not violated, violated=violated, objective_value=cost)

    @staticmethod
    def _feasible_chunks(instance: PBOInstance) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """
        Enumerate all assignments in lexicographic order (x1 most significant),
        one chunk at a time

        Yields:
            (bits, feasible): bits[v-1] holds x_v over the chunk; feasible is the
            mask of rows satisfying every hard constraint
        """
        n = instance.num_vars
        total = 1 << n
        chunk = 1 << min(n, CHUNK_BITS)
        shifts = np.arange(n - 1, -1, -1, dtype=np.int64).reshape(-1, 1)
        for start in range(0, total, chunk):
            index = np.arange(start, min(start + chunk, total), dtype=np.int64)
            bits = (index >> shifts) & 1
            feasible = np.ones(index.shape[0], dtype=bool)
            for c in instance.hard_constraints:
                reached = np.zeros(index.shape[0], dtype=np.int64)
                for term in c.terms:
                    reached += term.coeff * (bits[term.lit.var - 1] == term.lit.pol)
                feasible &= reached >= c.bound
            yield bits, feasible

    @staticmethod
    def brute_force_optimum(instance: PBOInstance,
                            max_vars: int = Config.BRUTE_FORCE_MAX_VARS) -> Optional[int]:
        """
        Minimum objective value over all feasible assignments

        Returns:
            Optimal cost, or None if no assignment is feasible

        Raises:
            TooLargeError: Above max_vars variables
        """
        if instance.num_vars > max_vars:
            raise TooLargeError(instance.num_vars, max_vars)

        objective = instance.objective
        best: Optional[int] = None
        for bits, feasible in VerifierService._feasible_chunks(instance):
            if not feasible.any():
                continue
            cost = np.zeros(feasible.shape[0], dtype=np.int64)
            for term in objective.terms:
                cost += term.coeff * (bits[term.lit.var - 1] == term.lit.pol)
            chunk_best = int(cost[feasible].min())
            if best is None or chunk_best < best:
                best = chunk_best

        if best is None:
            logger.debug("Enumeration found no feasible assignment")
            return None
        return best + objective.constant_offset

    @staticmethod
    def forced_literal_oracle(instance: PBOInstance,
                              max_vars: int = Config.FORCED_ORACLE_MAX_VARS) -> Dict[int, ForcedStatus]:
        """
        Classify each variable by the values it takes across all feasible assignments

        Raises:
            TooLargeError: Above max_vars variables
        """
        n = instance.num_vars
        if n > max_vars:
            raise TooLargeError(n, max_vars)

        seen_one = np.zeros(n, dtype=bool)
        seen_zero = np.zeros(n, dtype=bool)
        any_feasible = False
        for bits, feasible in VerifierService._feasible_chunks(instance):
            if not feasible.any():
                continue
            any_feasible = True
            rows = bits[:, feasible]
            seen_one |= (rows == 1).any(axis=1)
            seen_zero |= (rows == 0).any(axis=1)

        result: Dict[int, ForcedStatus] = {}
        for var in range(1, n + 1):
            if not any_feasible:
                result[var] = ForcedStatus.INFEASIBLE
            elif seen_one[var - 1] and seen_zero[var - 1]:
                result[var] = ForcedStatus.FREE
            elif seen_one[var - 1]:
                result[var] = ForcedStatus.FORCED_1
            else:
                result[var] = ForcedStatus.FORCED_0
        return result
