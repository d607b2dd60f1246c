"""
Test package for triplewave
"""
