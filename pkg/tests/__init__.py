"""
Test package
""" 