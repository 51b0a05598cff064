"""Desk-scale lab for robust microservice deployment on LEO constellations."""

__version__ = "0.1.0"
