"""
Simulation engine: adversaries, batched learners and the experiment harness
"""
