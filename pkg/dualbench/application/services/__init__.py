"""
Services layer
Models, symmetries, dualities, simulation and verification
"""
