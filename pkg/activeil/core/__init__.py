"""
Core - numerics, exceptions and logging shared by every layer
"""
