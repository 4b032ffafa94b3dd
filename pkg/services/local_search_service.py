"""
Weighted local search with care-driven constraint selection

The search keeps every hard constraint plus the objective constraint
"objective <= cost* - 1" as weighted constraints, flips the variable with the
best positive score, and at local optima bumps weights, accumulates care and
repairs a falsified constraint chosen by the Care-FC rule.
"""
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple

from config import SolverParams
from models.pbo import (
    Assignment,
    PBOInstance,
    build_objective_constraint,
    initial_objective_bound,
)
from models.schemas import SolveStatistics, SolveStatus
from services.decimation_service import DecimationService, DecimationStatistics

logger = logging.getLogger(__name__)

ImprovementCallback = Callable[[int, float], None]


class IndexedSet:
    """Set with O(1) add, discard and uniform random pick"""

    def __init__(self):
        self._items: List[int] = []
        self._pos: Dict[int, int] = {}

    def add(self, item: int) -> None:
        if item not in self._pos:
            self._pos[item] = len(self._items)
            self._items.append(item)

    def discard(self, item: int) -> None:
        pos = self._pos.pop(item, None)
        if pos is None:
            return
        last = self._items.pop()
        if last != item:
            self._items[pos] = last
            self._pos[last] = pos

    def random(self, rng: random.Random) -> int:
        return self._items[rng.randrange(len(self._items))]

    def __contains__(self, item: int) -> bool:
        return item in self._pos

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[int]:
        return iter(self._items)

    def as_set(self) -> Set[int]:
        return set(self._items)


@dataclass
class SolveResult:
    """Outcome of one solver run"""
    status: SolveStatus
    best: Optional[Assignment]
    best_cost: Optional[int]
    statistics: SolveStatistics
    initial_assignment: Assignment
    improvements: List[Tuple[int, float]] = field(default_factory=list)


class SolverState:
    """
    Incremental search state.

    Constraints are indexed 0..m-1 for the hard ones; when the objective is
    non-empty the objective constraint sits at index m. For every constraint the
    true-coefficient sum is cached, and for every variable the weighted score
    sum over its constraints of w(c) * (sat after flip - sat now).
    """

    def __init__(self, instance: PBOInstance, params: SolverParams, initial: Assignment,
                 rng: random.Random, on_improvement: Optional[ImprovementCallback] = None,
                 clock: Callable[[], float] = time.monotonic, start: Optional[float] = None):
        if len(initial) != instance.num_vars:
            raise ValueError(
                f"Initial assignment has {len(initial)} values, instance has {instance.num_vars} variables"
            )
        self.instance = instance
        self.params = params
        self.rng = rng
        self.on_improvement = on_improvement
        self.clock = clock
        self.start = clock() if start is None else start

        self.num_vars = instance.num_vars
        self.num_hard = len(instance.hard_constraints)
        objective = instance.objective

        self.terms: List[List[Tuple[int, int, int]]] = []
        self.bounds: List[int] = []
        for c in instance.hard_constraints:
            self.terms.append([(t.lit.var, t.coeff, t.lit.pol) for t in c.terms])
            self.bounds.append(c.bound)

        self.objective_index: Optional[int] = None
        if not objective.is_empty:
            obj_constraint = build_objective_constraint(objective, initial_objective_bound(objective))
            self.objective_index = self.num_hard
            self.terms.append([(t.lit.var, t.coeff, t.lit.pol) for t in obj_constraint.terms])
            self.bounds.append(obj_constraint.bound)
        self.objective_total = objective.total
        self.objective_offset = objective.constant_offset

        count = len(self.terms)
        self.weights: List[int] = [1] * count
        self.care: List[int] = [0] * self.num_hard
        self.amax: List[int] = [max((a for _, a, _ in ts), default=0) for ts in self.terms]

        self.occurrences: List[List[Tuple[int, int, int]]] = [[] for _ in range(self.num_vars + 1)]
        for c, ts in enumerate(self.terms):
            for var, coeff, pol in ts:
                self.occurrences[var].append((c, coeff, pol))

        self.values: List[int] = [0] + list(initial.values)
        self.sums: List[int] = [
            sum(a for var, a, pol in ts if self.values[var] == pol) for ts in self.terms
        ]
        self.falsified = IndexedSet()
        for c in range(self.num_hard):
            if self.sums[c] < self.bounds[c]:
                self.falsified.add(c)

        self.scores: List[int] = [0] * (self.num_vars + 1)
        self.good = IndexedSet()
        for c in range(count):
            self._contribute(c, 1)

        self.best_values: Optional[List[int]] = None
        self.best_cost: Optional[int] = None
        self.improvements: List[Tuple[int, float]] = []
        self.first_feasible_s: Optional[float] = None
        self.flips = 0
        self.local_optima = 0

    # -- score bookkeeping -----------------------------------------------

    def _add_score(self, var: int, delta: int) -> None:
        score = self.scores[var] + delta
        self.scores[var] = score
        if score > 0:
            self.good.add(var)
        else:
            self.good.discard(var)

    def _contribute(self, c: int, sign: int) -> None:
        """Add (sign=1) or remove (sign=-1) constraint c's share of every score"""
        s, bound, amax = self.sums[c], self.bounds[c], self.amax[c]
        # no single flip can change satisfaction
        if s >= bound + amax or s + amax < bound:
            return
        w = sign * self.weights[c]
        values = self.values
        if s >= bound:
            slack = s - bound
            for var, a, pol in self.terms[c]:
                if a > slack and values[var] == pol:
                    self._add_score(var, -w)
        else:
            need = bound - s
            for var, a, pol in self.terms[c]:
                if a >= need and values[var] != pol:
                    self._add_score(var, w)

    def score(self, var: int) -> int:
        """Weighted net change of satisfied constraints if var were flipped"""
        return self.scores[var]

    def set_weight(self, c: int, weight: int) -> None:
        """Set a constraint weight, refreshing the affected scores"""
        self._contribute(c, -1)
        self.weights[c] = weight
        self._contribute(c, 1)

    # -- search steps ------------------------------------------------------

    def pick_scoring_var(self) -> Optional[int]:
        """
        Variable with the highest positive score, ties uniform; None at a local optimum.
        With bms > 0 only that many random candidates are compared.
        """
        good = self.good
        if not len(good):
            return None
        scores = self.scores
        rng = self.rng
        if self.params.bms:
            best = good.random(rng)
            for _ in range(self.params.bms - 1):
                var = good.random(rng)
                if scores[var] > scores[best]:
                    best = var
            return best

        best_score = 0
        ties: List[int] = []
        for var in good:
            score = scores[var]
            if score > best_score:
                best_score = score
                ties = [var]
            elif score == best_score:
                ties.append(var)
        return ties[0] if len(ties) == 1 else ties[rng.randrange(len(ties))]

    def objective_falsified(self) -> bool:
        c = self.objective_index
        return c is not None and self.sums[c] < self.bounds[c]

    def update_weights(self) -> None:
        """
        Hard weights +hard_weight_inc on every falsified hard constraint; when none
        is falsified a falsified objective constraint gains objective_weight_inc,
        never beyond gamma
        """
        if len(self.falsified):
            inc = self.params.hard_weight_inc
            for c in list(self.falsified):
                self.set_weight(c, self.weights[c] + inc)
        elif self.objective_falsified():
            c = self.objective_index
            weight = min(self.weights[c] + self.params.objective_weight_inc, self.params.gamma)
            if weight > self.weights[c]:
                self.set_weight(c, weight)

    def update_care(self) -> None:
        for c in self.falsified:
            self.care[c] += 1

    def select_stuck_constraint(self) -> Optional[int]:
        """
        Care-FC selection: with probability p a uniformly random falsified hard
        constraint, otherwise the falsified hard constraint with the highest care
        (ties uniform). With no hard constraint falsified, the objective constraint
        if it is falsified; None if nothing is.
        """
        rng = self.rng
        if len(self.falsified):
            if rng.random() < self.params.p:
                return self.falsified.random(rng)
            care = self.care
            best = -1
            ties: List[int] = []
            for c in self.falsified:
                if care[c] > best:
                    best = care[c]
                    ties = [c]
                elif care[c] == best:
                    ties.append(c)
            return ties[0] if len(ties) == 1 else ties[rng.randrange(len(ties))]
        if self.objective_falsified():
            return self.objective_index
        return None

    def pick_var_in_constraint(self, c: int) -> int:
        """Best-score variable among the false literals of c, ties uniform"""
        values = self.values
        candidates = [var for var, _, pol in self.terms[c] if values[var] != pol]
        if not candidates:
            candidates = [var for var, _, _ in self.terms[c]]
        scores = self.scores
        best_score = max(scores[var] for var in candidates)
        ties = [var for var in candidates if scores[var] == best_score]
        return ties[0] if len(ties) == 1 else ties[self.rng.randrange(len(ties))]

    def flip(self, var: int) -> None:
        """Toggle var, update sums, falsified set and scores, record improvements"""
        occurrences = self.occurrences[var]
        for c, _, _ in occurrences:
            self._contribute(c, -1)

        value = 1 - self.values[var]
        self.values[var] = value
        sums, bounds = self.sums, self.bounds
        for c, coeff, pol in occurrences:
            sums[c] += coeff if value == pol else -coeff
            if c < self.num_hard:
                if sums[c] < bounds[c]:
                    self.falsified.add(c)
                else:
                    self.falsified.discard(c)
            self._contribute(c, 1)

        self.flips += 1
        self.check_improvement()

    def current_cost(self) -> int:
        c = self.objective_index
        if c is None:
            return self.objective_offset
        # the objective constraint sums the negated objective literals
        return self.objective_offset + self.objective_total - self.sums[c]

    def is_feasible(self) -> bool:
        return not len(self.falsified)

    def check_improvement(self) -> bool:
        """Record the current assignment if it is feasible and cheaper than cost*"""
        if not self.is_feasible():
            return False
        cost = self.current_cost()
        if self.best_cost is not None and cost >= self.best_cost:
            return False

        elapsed = self.clock() - self.start
        self.best_cost = cost
        self.best_values = self.values[1:]
        if self.first_feasible_s is None:
            self.first_feasible_s = elapsed
        self.improvements.append((cost, elapsed))
        logger.info(f"New best cost {cost} after {self.flips} flips ({elapsed:.3f}s)")
        if self.on_improvement is not None:
            self.on_improvement(cost, elapsed)
        if self.objective_index is not None:
            self.tighten_objective_bound(cost - 1)
        return True

    def tighten_objective_bound(self, k: int) -> None:
        """Require objective value <= k from now on"""
        c = self.objective_index
        if c is None:
            return
        self._contribute(c, -1)
        self.bounds[c] = self.objective_total - (k - self.objective_offset)
        self._contribute(c, 1)

    def at_lower_bound(self) -> bool:
        """cost* already equals the cheapest value any assignment can have"""
        return self.best_cost is not None and self.best_cost <= self.objective_offset

    def best_assignment(self) -> Optional[Assignment]:
        return None if self.best_values is None else Assignment(values=list(self.best_values))

    # -- driver ------------------------------------------------------------

    def step(self) -> None:
        """One search step: a greedy flip, or a weighting and repair flip at a local optimum"""
        var = self.pick_scoring_var()
        if var is None:
            self.local_optima += 1
            self.update_weights()
            self.update_care()
            c = self.select_stuck_constraint()
            if c is None:
                var = self.rng.randint(1, self.num_vars)
            else:
                var = self.pick_var_in_constraint(c)
        self.flip(var)

    def run(self) -> str:
        """
        Search until the cutoff, the flip budget or (if enabled) the lower bound

        Returns:
            Termination reason: "cutoff", "max_flips", "lower_bound" or "empty"
        """
        params = self.params
        interval = params.time_check_interval
        self.check_improvement()
        while True:
            if params.stop_at_lower_bound and self.at_lower_bound():
                return "lower_bound"
            if params.max_flips is not None and self.flips >= params.max_flips:
                return "max_flips"
            if self.flips % interval == 0 and self.clock() - self.start >= params.cutoff:
                return "cutoff"
            if self.num_vars == 0:
                return "empty"
            self.step()

    def recompute(self) -> Tuple[List[int], Set[int], List[int]]:
        """Sums, falsified hard set and scores computed from scratch"""
        values = self.values
        sums = [sum(a for var, a, pol in ts if values[var] == pol) for ts in self.terms]
        falsified = {c for c in range(self.num_hard) if sums[c] < self.bounds[c]}
        scores = [0] * (self.num_vars + 1)
        for c, ts in enumerate(self.terms):
            bound, s, w = self.bounds[c], sums[c], self.weights[c]
            before = s >= bound
            for var, a, pol in ts:
                after = (s - a if values[var] == pol else s + a) >= bound
                scores[var] += w * (int(after) - int(before))
        return sums, falsified, scores


class LocalSearchService:
    """Entry point for complete solver runs"""

    @staticmethod
    def solve(instance: PBOInstance, params: SolverParams,
              on_improvement: Optional[ImprovementCallback] = None,
              clock: Callable[[], float] = time.monotonic) -> SolveResult:
        """
        Run decimation (unless disabled) followed by local search

        Args:
            instance: Normalized instance
            params: Run parameters
            on_improvement: Called with (cost, seconds) on every new best solution
            clock: Monotonic clock in seconds

        Returns:
            SolveResult with SATISFIABLE and the best solution, or UNKNOWN
        """
        start = clock()
        rng = random.Random(params.seed)
        stats = SolveStatistics()

        if params.decimation:
            deci = DecimationStatistics()
            initial = DecimationService.igup_decimation(instance, rng, deci)
            stats.decimation_hard_forcings = deci.hard_forcings
            stats.decimation_soft_assignments = deci.soft_assignments
            stats.decimation_random_assignments = deci.random_assignments + deci.conflict_assignments
            stats.decimation_contradictions = deci.contradictions
            stats.decimation_time_s = clock() - start
        else:
            initial = Assignment.zeros(instance.num_vars)

        if params.cutoff <= 0:
            stats.elapsed_s = clock() - start
            logger.info("Cutoff is zero, search skipped")
            return SolveResult(SolveStatus.UNKNOWN, None, None, stats, initial)

        state = SolverState(instance, params, initial, rng, on_improvement, clock, start)
        reason = state.run()

        stats.flips = state.flips
        stats.local_optima = state.local_optima
        stats.improvements = len(state.improvements)
        stats.time_to_first_feasible_s = state.first_feasible_s
        stats.best_cost = state.best_cost
        stats.elapsed_s = clock() - start
        logger.info(
            f"Search stopped ({reason}): {state.flips} flips, {state.local_optima} local optima, "
            f"best cost {state.best_cost}"
        )

        best = state.best_assignment()
        status = SolveStatus.SATISFIABLE if best is not None else SolveStatus.UNKNOWN
        return SolveResult(status, best, state.best_cost, stats, initial, list(state.improvements))
