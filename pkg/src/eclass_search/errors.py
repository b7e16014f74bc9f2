"""Exception types shared across the package.

The CLI maps each family onto an exit code: ``ConfigError`` -> 1,
``DataError`` -> 2, ``ProviderError`` -> 3.
"""


class SearchError(Exception):
    pass


class ConfigError(SearchError, ValueError):
    """Invalid parameters or configuration."""


class DataError(SearchError, ValueError):
    """Malformed or inconsistent input data."""


class CatalogError(DataError):
    pass


class DatasetError(DataError):
    pass


class ProvenanceError(DataError):
    """An index was used with a query/config it was not built for."""


class ProviderError(SearchError, RuntimeError):
    """A remote model endpoint failed after retries."""
