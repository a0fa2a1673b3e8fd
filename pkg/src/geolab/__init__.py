"""geolab: closed geodesics, critical exponents and cusp excursions."""

__version__ = "0.1.0"
