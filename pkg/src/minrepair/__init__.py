"""Minimal-edit program repair harness.

Mines (wrong, correct) program pairs from online-judge submission logs,
generates repair candidates, validates them in a sandboxed judge, and
suggests the functionally correct candidate closest to the original
program in character edit distance.
"""

__version__ = "0.1.0"
