"""Merton structural credit risk: simulation, closed forms, risk measures."""
