"""
Berarducci Tree Engine Package
"""

__version__ = "1.0.0"
__author__ = "Berarducci Tree Engine Team"
