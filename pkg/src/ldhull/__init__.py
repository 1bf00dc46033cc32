"""Large-deviation rates for the perimeter and area of planar random-walk hulls."""

__version__ = "0.1.0"
