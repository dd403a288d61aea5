"""Core library modules for the NC Linearization Toolkit."""
