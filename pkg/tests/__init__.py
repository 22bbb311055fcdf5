"""
traveling_observer tests
"""
