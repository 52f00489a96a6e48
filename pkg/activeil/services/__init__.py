"""
Services - Training loop, query selection and experiment harness
"""
