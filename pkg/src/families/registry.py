"""
Family registry - builds task families by kind
"""

from errors import UsageError
from .exact import ExactBinaryFamily, ExactMultiFamily
from .graded import GradedAmbiguousFamily


class FamilyRegistry:
    """Maps family kinds to their classes"""

    def __init__(self):
        self.families = {
            cls.kind: cls
            for cls in (ExactBinaryFamily, ExactMultiFamily, GradedAmbiguousFamily)
        }

    def kinds(self):
        """Get list of known family kinds"""
        return list(self.families.keys())

    def build(self, kind, **params):
        """
        Build a family

        Args:
            kind: One of kinds()
            **params: Constructor parameters (answer_count, ambiguity, ...)

        Returns:
            BaseTaskFamily

        Raises:
            UsageError: Unknown kind or invalid parameters
        """
        if kind not in self.families:
            raise UsageError(
                f"Task family '{kind}' not known. "
                f"Known families: {', '.join(self.kinds())}"
            )
        try:
            return self.families[kind](**params)
        except TypeError as e:
            raise UsageError(f"Invalid parameters for {kind}: {e}")


registry = FamilyRegistry()


def build_family(kind, **params):
    """Shortcut for registry.build"""
    return registry.build(kind, **params)
