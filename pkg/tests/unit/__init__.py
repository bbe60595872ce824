"""Unit tests - one numerical component at a time, checked against closed forms."""
