"""
Helpers shared by config objects.
"""
