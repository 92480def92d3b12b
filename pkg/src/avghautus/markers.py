"""Non-float markers for unbounded values and failed preconditions.

Sweep drivers tabulate these as values; they are never raised and never
encoded as float sentinels such as ``inf`` or ``nan``.
"""

import enum
from dataclasses import dataclass


class Marker(enum.Enum):
    """Enumerated marker for a quantity that grows without bound."""

    INFINITE = "infinite"

    def __repr__(self):  # pragma: no cover - cosmetic
        return f"Marker.{self.name}"


INFINITE = Marker.INFINITE


@dataclass(frozen=True)
class Infeasible:
    """A formula's hypothesis failed; ``reason`` names the violated one."""

    reason: str


def is_value(x) -> bool:
    """True when x is an ordinary finite number, not a marker."""
    return not isinstance(x, (Marker, Infeasible))
