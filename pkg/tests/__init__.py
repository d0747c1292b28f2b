"""Test suite for the Schmitt-Trigger metastability toolkit."""
