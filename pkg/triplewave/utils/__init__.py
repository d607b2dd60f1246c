"""
Shared helpers: smooth cutoffs and report/array export.
"""
