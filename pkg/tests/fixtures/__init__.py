"""Test fixtures directory.

This directory contains configuration files used by the test suite.
"""
