"""Test suite for the preferential attachment lab."""
