"""All-to-All schedules and cost models for reconfigurable optical rings"""
__version__ = "0.1.0"
