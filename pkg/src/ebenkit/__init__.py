"""Multiband speech enhancement toolkit."""
