"""Exception hierarchy shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(ToolkitError):
    """Invalid box or polygon geometry."""


class ParseError(ToolkitError):
    """Input document is not well-formed (bad JSON, bad line)."""


class ValidationError(ToolkitError):
    """Document parsed but violates the schema; message names the field path."""


class ConfigError(ToolkitError):
    """Bad configuration (unreadable vocabulary, invalid option)."""


class EmptyInputError(ToolkitError):
    """An operation that requires at least one item received none."""


class EndpointError(ToolkitError):
    """The inference endpoint is unreachable or persistently failing."""
