"""Ultrametric Wreath package.

Finite ultrametric spaces, L-trees and generalized wreath products. Every
group isomorphism the package claims is computed on both sides and checked
element by element through an explicit bijection.
"""

__version__ = "0.1.0"
