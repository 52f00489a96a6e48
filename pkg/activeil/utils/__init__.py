"""
Utils - Result files and checkpoints
"""
