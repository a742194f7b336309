"""
Synthetic task families for the self-grading environment
"""

from .base import BaseTaskFamily
from .exact import ExactBinaryFamily, ExactFamily, ExactMultiFamily
from .graded import GradedAmbiguousFamily
from .registry import FamilyRegistry, build_family, registry

__all__ = ['BaseTaskFamily', 'ExactFamily', 'ExactBinaryFamily', 'ExactMultiFamily',
           'GradedAmbiguousFamily', 'FamilyRegistry', 'build_family', 'registry']
