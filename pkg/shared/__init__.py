"""
Shared models and configuration for the combinatorial switching-cost bandit simulator
"""

__version__ = "1.0.0"
__description__ = "Shared components for the batched combinatorial bandit simulation engine"
