"""ornlab: schedules, routing and bounds for oblivious and semi-oblivious reconfigurable networks."""

__version__ = "0.1.0"

from . import ff, prob, routing, schedule, tradeoff  # noqa: E402,F401
