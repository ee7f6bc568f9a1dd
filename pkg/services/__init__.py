"""Service package initializer."""

