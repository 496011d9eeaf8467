"""
Shared helpers: files, progress output, config validation and random streams
"""
