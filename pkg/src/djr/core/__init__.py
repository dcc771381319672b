"""Core configuration and setup for djr-verifier."""
