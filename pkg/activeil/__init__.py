"""
Active imitation learning laboratory package
"""
__version__ = "1.0.0"
