"""horolab: simulation laboratory for horoball processes and low-cost
graphings on products of finitely generated groups."""

__version__ = "0.1.0"

from .groups import GroupSpec, ball, growth_series, make_oracle  # noqa: F401
from .product import ProductMetric, ProductSpace, perfect_diamond  # noqa: F401
from .schedule import build_schedule, linear_schedule  # noqa: F401
