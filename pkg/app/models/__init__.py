"""Pydantic models and dataclasses for environments, agents and experiments."""
