"""Semiclassical coherent-state propagators and bipartite purity from complex trajectories."""
