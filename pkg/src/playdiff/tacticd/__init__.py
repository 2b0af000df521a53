"""Operational surface: command-line interface and HTTP service."""
