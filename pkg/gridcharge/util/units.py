"""Physical units and currencies on the :mod:`iam_units` registry.

Each currency is a dimension of its own, so amounts in different currencies never
convert implicitly. A :class:`Currency` carries exchange rates as quantities of a
``reference_currency`` per unit of each currency, and converts through them.

>>> Currency().convert(70, "USD")
64.0
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np
from iam_units import registry

log = logging.getLogger(__name__)

Q = registry.Quantity

#: Units of the reference currency (here VND) per unit of each currency.
#: 1 $ = 25 500 VND, and 70 $ = 64 €.
DEFAULT_RATES = {"VND": 1.0, "USD": 25500.0, "EUR": 25500.0 * 70 / 64}

REFERENCE = "reference_currency"


def define_currency(code: str) -> None:
    """Add `code` to the registry as a dimension, unless already known."""
    if code not in registry:
        registry.define(f"{code} = [currency_{code}]")


for _code in [REFERENCE] + list(DEFAULT_RATES):
    define_currency(_code)


def magnitude(value, units: str, to: str):
    """Magnitude of `value` in `units`, expressed in `to`."""
    return Q(value, units).to(to).magnitude


@dataclass(frozen=True)
class Currency:
    """Base currency plus exchange rates.

    Parameters
    ----------
    base : str
        Currency in which all monetary outputs are reported.
    rates : dict
        Value of one unit of each currency, expressed in a common reference currency.
        Only ratios matter; the reference itself need not appear.
    """

    base: str = "EUR"
    rates: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_RATES))

    def __post_init__(self):
        for code, rate in self.rates.items():
            if not rate > 0:
                raise ValueError(f"Exchange rate for {code!r} must be > 0; got {rate}")
        if self.base not in self.rates:
            raise ValueError(f"No exchange rate for base currency {repr(self.base)}")

    @classmethod
    def from_config(cls, info: Mapping) -> "Currency":
        rates = dict(DEFAULT_RATES)
        rates.update(info.get("rates", {}))
        return cls(base=info.get("base", "EUR"), rates=rates)

    def rate(self, code: str):
        """Exchange rate of `code` as a quantity, reference currency per `code`."""
        try:
            value = self.rates[code]
        except KeyError:
            raise ValueError(f"Unknown currency {code!r}") from None
        # Rates from configuration may name currencies not yet on the registry
        define_currency(code)
        return Q(value, f"{REFERENCE} / {code}")

    def convert(self, value, from_: str, to: Optional[str] = None):
        """Convert `value` from currency `from_` to `to` (default: :attr:`base`).

        Returns a float for scalar `value`, otherwise an array.
        """
        to = to or self.base
        amount = Q(np.asarray(value, dtype=float), from_) * self.rate(from_)
        result = (amount / self.rate(to)).to(to).magnitude
        return float(result) if np.ndim(result) == 0 else result

    def as_dict(self) -> Dict:
        return dict(base=self.base, rates=dict(sorted(self.rates.items())))
