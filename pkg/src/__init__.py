"""
Railway time-slot allocation toolkit.

Allocates departure slots on shared railway infrastructure among competing
railway undertakings, evaluates their profit under the allocation and
searches for Nash equilibria of the induced bidding game.
"""

__version__ = "0.1.0"
