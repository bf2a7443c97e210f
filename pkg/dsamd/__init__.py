"""Distributed stochastic mirror descent simulator."""
