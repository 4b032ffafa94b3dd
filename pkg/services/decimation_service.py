"""
Unit-propagation decimation for building an initial assignment

Improved generalized unit clauses are detected on the residual constraints of a
partial assignment and propagated; soft preferences from the objective come
next, and a uniformly random assignment is the fallback.
"""
import logging
import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Set, Tuple

from models.pbo import Assignment, PBOInstance

logger = logging.getLogger(__name__)

UNASSIGNED = -1

VARIABLE_CONFLICT = "variable"
CONSTRAINT_CONFLICT = "constraint"


@dataclass
class Contradiction:
    """A variable forced both ways, or a constraint that can no longer be met"""
    kind: str
    var: Optional[int] = None
    constraint: Optional[int] = None
    origins: Tuple[Optional[int], ...] = ()


@dataclass
class DecimationStatistics:
    hard_forcings: int = 0
    soft_assignments: int = 0
    random_assignments: int = 0
    conflict_assignments: int = 0
    contradictions: int = 0
    rounds: int = 0


class DecimationState:
    """
    Partial assignment plus residual bound/sum of every hard constraint.

    For constraint c: res_bound[c] = B - (coefficients of literals already true),
    res_sum[c] = coefficients of still unassigned terms. res_bound <= 0 retires c,
    res_sum < res_bound marks it falsified.
    """

    def __init__(self, instance: PBOInstance, rng: random.Random,
                 stats: Optional[DecimationStatistics] = None):
        self.instance = instance
        self.rng = rng
        n = instance.num_vars
        hard = instance.hard_constraints
        m = len(hard)

        self.values: List[int] = [UNASSIGNED] * (n + 1)
        self.assigned_by: List[Optional[int]] = [None] * (n + 1)
        self.res_bound: List[int] = [c.bound for c in hard]
        self.res_sum: List[int] = [c.total for c in hard]
        self.retired: List[bool] = [False] * m
        self.falsified: List[bool] = [False] * m
        self._fired: List[bool] = [False] * m

        # terms by descending coefficient, lowest variable first on ties
        self._order: List[List[Tuple[int, int, int]]] = [
            sorted(((t.lit.var, t.coeff, t.lit.pol) for t in c.terms), key=lambda e: (-e[1], e[0]))
            for c in hard
        ]
        self._cursor: List[int] = [0] * m

        self._unassigned: List[int] = list(range(1, n + 1))
        self._unassigned_pos: List[int] = [-1] + list(range(n))

        self._pending: Dict[int, Tuple[int, Optional[int]]] = {}
        self._pending_vars: List[int] = []
        self._pending_pos: Dict[int, int] = {}
        self._conflicted: Deque[int] = deque()
        self._conflicted_set: Set[int] = set()

        # soft units prefer each objective literal false; exponential keys give
        # a pick order proportional to the objective coefficients
        keyed = []
        for index, term in enumerate(instance.objective.terms):
            key = math.log(1.0 - rng.random()) / term.coeff
            keyed.append((key, index, term.lit.var, 1 - term.lit.pol))
        keyed.sort(key=lambda e: (-e[0], e[1]))
        self._soft: List[Tuple[int, int]] = [(var, value) for _, _, var, value in keyed]
        self._soft_cursor = 0

        self.contradictions: List[Contradiction] = []
        self.initial_forcings: List[Tuple[int, int]] = []
        self.implied_forcings: List[Tuple[int, int]] = []
        self._free_decision = False
        self._scanning = False
        self.stats = stats if stats is not None else DecimationStatistics()

    # -- detection -------------------------------------------------------

    def _max_unassigned(self, c: int) -> Optional[Tuple[int, int, int]]:
        order = self._order[c]
        cursor = self._cursor[c]
        values = self.values
        while cursor < len(order) and values[order[cursor][0]] != UNASSIGNED:
            cursor += 1
        self._cursor[c] = cursor
        return order[cursor] if cursor < len(order) else None

    def detect_1ofall(self, c: int) -> Optional[Tuple[int, int]]:
        """
        1-of-all unit: the unassigned literal with the largest coefficient is forced
        when the other unassigned terms cannot reach the residual bound on their own.

        Returns:
            (var, value) making that literal true, or None
        """
        if self.retired[c] or self.falsified[c]:
            return None
        bound, total = self.res_bound[c], self.res_sum[c]
        if bound < 1 or total < bound:
            return None
        entry = self._max_unassigned(c)
        if entry is None:
            return None
        var, coeff, pol = entry
        if total - coeff < bound:
            return var, pol
        return None

    def detect_all_of_all(self, c: int) -> List[Tuple[int, int]]:
        """
        All-of-all unit: when the unassigned coefficients sum exactly to the residual
        bound every unassigned literal is forced. A sum below the bound flags the
        constraint falsified and forces nothing.
        """
        if self.retired[c]:
            return []
        bound, total = self.res_bound[c], self.res_sum[c]
        if bound < 1:
            return []
        if total < bound:
            self._mark_falsified(c)
            return []
        if total == bound:
            values = self.values
            return [(var, pol) for var, _, pol in self._order[c][self._cursor[c]:]
                    if values[var] == UNASSIGNED]
        return []

    def _mark_falsified(self, c: int) -> None:
        if not self.falsified[c]:
            self.falsified[c] = True
            self.contradictions.append(Contradiction(kind=CONSTRAINT_CONFLICT, constraint=c))

    def _schedule(self, c: int) -> None:
        if self.retired[c] or self.falsified[c] or self._fired[c]:
            return
        forced = self.detect_all_of_all(c)
        if forced:
            self._fired[c] = True
            for var, value in forced:
                self._enqueue(var, value, c)
            return
        single = self.detect_1ofall(c)
        if single is not None:
            self._enqueue(single[0], single[1], c)

    # -- queues ----------------------------------------------------------

    def _enqueue(self, var: int, value: int, origin: Optional[int]) -> None:
        current = self.values[var]
        if current != UNASSIGNED:
            if current != value:
                self.contradictions.append(Contradiction(
                    kind=VARIABLE_CONFLICT, var=var, origins=(self.assigned_by[var], origin)
                ))
            return
        if var in self._conflicted_set:
            return
        queued = self._pending.get(var)
        if queued is not None:
            if queued[0] != value:
                self.contradictions.append(Contradiction(
                    kind=VARIABLE_CONFLICT, var=var, origins=(queued[1], origin)
                ))
                self._remove_pending(var)
                self._conflicted.append(var)
                self._conflicted_set.add(var)
            return

        self._pending[var] = (value, origin)
        self._pending_pos[var] = len(self._pending_vars)
        self._pending_vars.append(var)
        if not self._free_decision:
            self.implied_forcings.append((var, value))
        if self._scanning:
            self.initial_forcings.append((var, value))

    def _remove_pending(self, var: int) -> None:
        pos = self._pending_pos.pop(var)
        last = self._pending_vars.pop()
        if last != var:
            self._pending_vars[pos] = last
            self._pending_pos[last] = pos
        del self._pending[var]

    def _remove_unassigned(self, var: int) -> None:
        pos = self._unassigned_pos[var]
        last = self._unassigned.pop()
        if last != var:
            self._unassigned[pos] = last
            self._unassigned_pos[last] = pos
        self._unassigned_pos[var] = -1

    def _next_soft(self) -> Optional[Tuple[int, int]]:
        while self._soft_cursor < len(self._soft):
            var, value = self._soft[self._soft_cursor]
            self._soft_cursor += 1
            if self.values[var] == UNASSIGNED:
                return var, value
        return None

    # -- propagation -----------------------------------------------------

    def propagate_literal(self, var: int, value: int, origin: Optional[int] = None) -> None:
        """
        Assign var and simplify every hard constraint containing it, queueing the
        forcings this exposes

        Args:
            var: Unassigned variable
            value: 0 or 1
            origin: Constraint whose forcing this is, None for free decisions
        """
        if self.values[var] != UNASSIGNED:
            raise ValueError(f"x{var} is already assigned")
        self.values[var] = value
        self.assigned_by[var] = origin
        self.stats.rounds += 1
        self._remove_unassigned(var)
        if var in self._pending:
            self._remove_pending(var)
        self._conflicted_set.discard(var)

        res_bound, res_sum, retired = self.res_bound, self.res_sum, self.retired
        for c, coeff, pol in self.instance.occurrences[var]:
            if value == pol:
                res_bound[c] -= coeff
            res_sum[c] -= coeff
            if retired[c]:
                continue
            if res_bound[c] <= 0:
                retired[c] = True
            elif res_sum[c] < res_bound[c]:
                self._mark_falsified(c)
            else:
                self._schedule(c)

    def run(self) -> Assignment:
        """
        Decimate until every variable is assigned: queued hard forcings first
        (uniformly at random), then soft preferences, then a random variable and value.
        """
        self._scanning = True
        for c in range(len(self.instance.hard_constraints)):
            self._schedule(c)
        self._scanning = False

        rng = self.rng
        while self._unassigned:
            if self._conflicted:
                var = self._conflicted.popleft()
                self._conflicted_set.discard(var)
                if self.values[var] != UNASSIGNED:
                    continue
                self._free_decision = True
                self.stats.conflict_assignments += 1
                self.propagate_literal(var, rng.randint(0, 1))
            elif self._pending_vars:
                var = self._pending_vars[rng.randrange(len(self._pending_vars))]
                value, origin = self._pending[var]
                self.stats.hard_forcings += 1
                self.propagate_literal(var, value, origin)
            else:
                soft = self._next_soft()
                self._free_decision = True
                if soft is not None:
                    self.stats.soft_assignments += 1
                    self.propagate_literal(soft[0], soft[1])
                else:
                    var = self._unassigned[rng.randrange(len(self._unassigned))]
                    self.stats.random_assignments += 1
                    self.propagate_literal(var, rng.randint(0, 1))

        self.stats.contradictions = len(self.contradictions)
        logger.info(
            f"Decimation finished: {self.stats.hard_forcings} forced, "
            f"{self.stats.soft_assignments} soft, {self.stats.random_assignments} random, "
            f"{len(self.contradictions)} contradictions"
        )
        return Assignment(values=self.values[1:])

    def recompute_residuals(self) -> Tuple[List[int], List[int]]:
        """Residual bounds and sums computed from scratch"""
        bounds, sums = [], []
        values = self.values
        for c in self.instance.hard_constraints:
            bound, total = c.bound, 0
            for term in c.terms:
                value = values[term.lit.var]
                if value == UNASSIGNED:
                    total += term.coeff
                elif value == term.lit.pol:
                    bound -= term.coeff
            bounds.append(bound)
            sums.append(total)
        return bounds, sums


class DecimationService:
    """Entry point for decimation-based initialization"""

    @staticmethod
    def igup_decimation(instance: PBOInstance, rng: random.Random,
                        stats: Optional[DecimationStatistics] = None) -> Assignment:
        """
        Complete assignment from improved generalized unit propagation

        Args:
            instance: Normalized instance
            rng: Source of every random choice
            stats: Filled with the run's counters when given

        Returns:
            Assignment of every variable
        """
        return DecimationState(instance, rng, stats).run()
