"""Tests for rabi-dce."""
