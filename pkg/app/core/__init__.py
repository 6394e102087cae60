"""Simulation core: grid dynamics, identities, teams and policies."""
