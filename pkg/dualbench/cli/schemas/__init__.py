"""
Experiment and result schemas
"""
