"""
Duality Workbench
Interacting particle systems, their symmetries and dualities, verified exactly
and by simulation
"""
