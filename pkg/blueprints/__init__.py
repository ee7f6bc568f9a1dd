"""Blueprint package initializer."""

