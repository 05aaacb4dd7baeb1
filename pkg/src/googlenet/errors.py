"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An operation received inputs whose shapes cannot be combined."""


class FormatError(ValueError):
    """A serialized file or graph description is malformed."""
