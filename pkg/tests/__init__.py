"""Test suite package initializer."""

