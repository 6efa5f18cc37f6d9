"""Cost accounting in fine-equivalent operator applications."""

from __future__ import annotations

from collections import Counter


class CostMeter:
    """Counts forward/adjoint applications per level.

    One application of an operator with ``m_level`` rows costs
    ``m_level / m_fine`` units, so a fine application costs exactly 1.
    """

    def __init__(self, m_fine: int):
        if m_fine <= 0:
            raise ValueError("m_fine must be positive")
        self.m_fine = int(m_fine)
        self.applies = Counter()
        self.units = 0.0

    def charge(self, m_level: int, n: int = 1) -> None:
        self.applies[int(m_level)] += n
        self.units += n * m_level / self.m_fine

    def ledger_units(self) -> float:
        """Recompute the total from the per-level counters."""
        return sum(count * m / self.m_fine for m, count in sorted(self.applies.items()))

    def wrap(self, op):
        return MeteredOperator(op, self)


class MeteredOperator:
    """Measurement operator view that charges a :class:`CostMeter` on every apply."""

    def __init__(self, op, meter: CostMeter):
        self._op = op
        self.meter = meter

    def forward(self, x):
        self.meter.charge(self._op.m)
        return self._op.forward(x)

    def adjoint(self, v):
        self.meter.charge(self._op.m)
        return self._op.adjoint(v)

    def normal(self, x):
        return self.adjoint(self.forward(x))

    @property
    def unmetered(self):
        return self._op

    def __getattr__(self, name):
        return getattr(self._op, name)
