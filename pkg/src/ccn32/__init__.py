"""Carnot-Caratheodory distance and heat kernel on the free step-two group N(3,2)."""

__version__ = "0.1.0"
