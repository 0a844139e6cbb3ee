"""Pytest configuration; shared fixtures live in the test modules that use them."""
