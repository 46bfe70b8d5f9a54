"""
VQA Plan Monitor

Classical PDDL planning that checks each step against yes/no/skip visual questions and replans on contradiction.
"""

__version__ = "0.1.0"
