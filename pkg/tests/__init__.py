"""Test suite for pybeltrami."""
