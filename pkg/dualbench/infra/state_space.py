"""
State space enumeration
Read-only, indexed collections of occupation configurations
"""
from itertools import product
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

State = Tuple[int, ...]


def compositions(total: int, caps: Sequence[Optional[int]]) -> Iterator[State]:
    """
    Configurations with the given total in lexicographic order

    Args:
        total: Number of particles to place
        caps: Per-location capacity, None for unbounded

    Yields:
        Occupation tuples, least-significant location last
    """
    if not caps:
        if total == 0:
            yield ()
        return
    rest = caps[1:]
    rest_room = None if any(c is None for c in rest) else sum(rest)
    head = total if caps[0] is None else min(caps[0], total)
    for first in range(head + 1):
        if rest_room is not None and total - first > rest_room:
            continue
        for tail in compositions(total - first, rest):
            yield (first,) + tail


class StateSpace:
    """
    Ordered collection of configurations over named locations

    Sector unions are stored sector by sector in ascending total, each sector
    in lexicographic order. The full product space is lexicographic.
    """

    def __init__(self, states: Iterable[State], locations: Sequence[str],
                 caps: Sequence[Optional[int]]):
        """
        Initialize the space

        Args:
            states: Configurations in index order
            locations: Location labels aligned with each configuration
            caps: Per-location capacity, None for unbounded
        """
        self._states: Tuple[State, ...] = tuple(states)
        self._index: Dict[State, int] = {s: k for k, s in enumerate(self._states)}
        self.locations = tuple(locations)
        self.caps = tuple(caps)

    @classmethod
    def sector(cls, locations: Sequence[str], caps: Sequence[Optional[int]],
               total: int) -> "StateSpace":
        return cls(compositions(total, caps), locations, caps)

    @classmethod
    def sectors(cls, locations: Sequence[str], caps: Sequence[Optional[int]],
                totals: Iterable[int]) -> "StateSpace":
        states: List[State] = []
        for total in sorted(set(totals)):
            states.extend(compositions(total, caps))
        return cls(states, locations, caps)

    @classmethod
    def product(cls, locations: Sequence[str], caps: Sequence[int]) -> "StateSpace":
        return cls(product(*[range(c + 1) for c in caps]), locations, caps)

    @property
    def states(self) -> Tuple[State, ...]:
        return self._states

    def index_of(self, state: State) -> int:
        return self._index[tuple(state)]

    def count(self) -> int:
        return len(self._states)

    def __len__(self) -> int:
        return len(self._states)

    def __iter__(self) -> Iterator[State]:
        return iter(self._states)

    def __contains__(self, state: object) -> bool:
        return isinstance(state, tuple) and state in self._index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateSpace):
            return NotImplemented
        return self._states == other._states and self.locations == other.locations

    def __hash__(self) -> int:
        return hash((self._states, self.locations))

    def __repr__(self) -> str:
        return f"StateSpace(locations={self.locations}, count={len(self._states)})"
