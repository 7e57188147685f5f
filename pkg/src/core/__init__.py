"""Core module for PT-Weyl.

Contains configuration management, structured logging, the error hierarchy
and run metrics shared by every service.
"""
