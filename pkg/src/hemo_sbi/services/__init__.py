"""Simulation, dataset, estimation and evaluation services."""
